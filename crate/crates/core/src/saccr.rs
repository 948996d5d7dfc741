//! Standardised-approach counterparty credit exposure (SA-CCR) for an
//! unmargined book of single-name equity vanillas in one asset class.
//!
//! ```text
//! EAD        = alpha * (RC + multiplier * AddOn)
//! RC         = max(Q - C, 0)
//! multiplier = min(1, 0.05 + 0.95 exp((Q - C) / (2 * 0.95 * AddOn)))
//! AddOn      = sqrt((sum_e rho_e A_e)^2 + sum_e (1 - rho_e^2) A_e^2)
//! A_e        = SF * sum_{i in e} AN_i * SD_i * MF_i
//! ```

use std::path::Path;

use crate::error::{invalid, Result};
use crate::io::CsvOut;
use crate::portfolio::VanillaTrade;
use crate::pricing::{norm_cdf, OptionKind};
use crate::scalar::{CompensatedSum, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct SaccrParams<T> {
    pub alpha: T,
    pub sigma_sup: T,
    pub supervisory_factor: T,
    pub collateral: T,
    /// Correlation of each reference entity with the systematic factor,
    /// indexed by entity id.
    pub entity_rho: Vec<T>,
}

impl<T: Scalar> Default for SaccrParams<T> {
    fn default() -> Self {
        Self {
            alpha: T::lit(1.4),
            sigma_sup: T::lit(1.2),
            supervisory_factor: T::lit(0.32),
            collateral: T::zero(),
            entity_rho: vec![T::lit(0.5)],
        }
    }
}

impl<T: Scalar> SaccrParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero()) {
            return invalid("alpha must be positive");
        }
        if !(self.sigma_sup > T::zero()) {
            return invalid("supervisory volatility must be positive");
        }
        if !(self.supervisory_factor > T::zero()) {
            return invalid("supervisory factor must be positive");
        }
        if !self.collateral.is_finite() {
            return invalid("collateral must be finite");
        }
        if self.entity_rho.is_empty() {
            return invalid("at least one entity correlation is required");
        }
        if self.entity_rho.iter().any(|r| !(*r >= T::zero() && *r <= T::one())) {
            return invalid("entity correlations must lie in [0, 1]");
        }
        Ok(())
    }
}

/// A trade tagged with the reference entity it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaccrTrade<T> {
    pub trade: VanillaTrade<T>,
    pub entity: usize,
}

/// Assigns every trade to entity 0.
pub fn single_entity<T: Scalar>(trades: &[VanillaTrade<T>]) -> Vec<SaccrTrade<T>> {
    trades.iter().map(|&trade| SaccrTrade { trade, entity: 0 }).collect()
}

/// Supervisory delta. Long calls and short puts are positive, short calls
/// and long puts negative. A zero strike takes the `d -> inf` limit.
pub fn supervisory_delta<T: Scalar>(trade: &VanillaTrade<T>, spot: T, sigma_sup: T) -> Result<T> {
    if !(trade.strike >= T::zero()) {
        return invalid(format!(
            "supervisory delta needs a non-negative strike, got {}",
            trade.strike
        ));
    }
    if !(trade.maturity > T::zero()) {
        return invalid(format!(
            "supervisory delta needs a positive maturity, got {}",
            trade.maturity
        ));
    }
    let cp = trade.kind.sign::<T>();
    let side = if trade.position() < T::zero() {
        -T::one()
    } else {
        T::one()
    };
    if trade.strike == T::zero() {
        return Ok(match trade.kind {
            OptionKind::Call => side,
            OptionKind::Put => T::zero(),
        });
    }
    let d = ((spot / trade.strike).ln() + T::lit(0.5) * sigma_sup * sigma_sup * trade.maturity)
        / (sigma_sup * trade.maturity.sqrt());
    Ok(side * cp * norm_cdf(cp * d))
}

/// `sqrt(min(M, 1y) / 1y)` for unmargined trades.
pub fn maturity_factor<T: Scalar>(maturity: T) -> Result<T> {
    if !(maturity > T::zero()) {
        return invalid(format!("maturity factor needs a positive maturity, got {maturity}"));
    }
    Ok(maturity.min(T::one()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeCapital<T> {
    pub adjusted_notional: T,
    pub supervisory_delta: T,
    pub maturity_factor: T,
    pub effective_notional: T,
}

pub fn trade_capital<T: Scalar>(trade: &VanillaTrade<T>, spot: T, sigma_sup: T) -> Result<TradeCapital<T>> {
    let an = trade.weight.abs() * spot;
    let sd = supervisory_delta(trade, spot, sigma_sup)?;
    let mf = maturity_factor(trade.maturity)?;
    Ok(TradeCapital {
        adjusted_notional: an,
        supervisory_delta: sd,
        maturity_factor: mf,
        effective_notional: an * sd * mf,
    })
}

/// `AN * SD * MF`, signed through the supervisory delta.
pub fn effective_notional<T: Scalar>(trade: &VanillaTrade<T>, spot: T, sigma_sup: T) -> Result<T> {
    Ok(trade_capital(trade, spot, sigma_sup)?.effective_notional)
}

/// Combines entity add-ons into the asset-class add-on.
pub fn aggregate_entities<T: Scalar>(entity_addons: &[T], rho: &[T]) -> T {
    let present: Vec<usize> = (0..entity_addons.len())
        .filter(|&e| entity_addons[e] != T::zero())
        .collect();
    if present.len() <= 1 {
        // sqrt(rho^2 A^2 + (1 - rho^2) A^2) = |A|
        return present.first().map_or(T::zero(), |&e| entity_addons[e].abs());
    }
    let mut systematic = CompensatedSum::new();
    let mut idio = CompensatedSum::new();
    for &e in &present {
        let a = entity_addons[e];
        let r = rho[e];
        systematic.add(r * a);
        idio.add((T::one() - r * r) * a * a);
    }
    let s = systematic.value();
    (s * s + idio.value()).sqrt()
}

/// Per-entity add-ons and the aggregate add-on.
pub fn addon_aggregate<T: Scalar>(trades: &[SaccrTrade<T>], spot: T, params: &SaccrParams<T>) -> Result<(Vec<T>, T)> {
    params.validate()?;
    let n_entities = params.entity_rho.len();
    let mut acc = vec![CompensatedSum::new(); n_entities];
    for t in trades {
        if t.entity >= n_entities {
            return invalid(format!(
                "trade references entity {} but only {n_entities} are configured",
                t.entity
            ));
        }
        acc[t.entity].add(effective_notional(&t.trade, spot, params.sigma_sup)?);
    }
    let addons: Vec<T> = acc.iter().map(|a| a.value() * params.supervisory_factor).collect();
    let aggregate = aggregate_entities(&addons, &params.entity_rho);
    Ok((addons, aggregate))
}

/// PFE multiplier. With a zero add-on it is reported as 1 and flagged.
pub fn pfe_multiplier<T: Scalar>(q: T, collateral: T, addon: T) -> (T, bool) {
    if !(addon > T::zero()) {
        return (T::one(), true);
    }
    let floor = T::lit(0.05);
    let body = T::lit(0.95);
    let m = floor + body * ((q - collateral) / (T::lit(2.0) * body * addon)).exp();
    (m.min(T::one()), false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapitalReport<T> {
    pub q: T,
    pub rc: T,
    pub multiplier: T,
    /// Multiplier was not computable because the add-on is zero.
    pub degenerate: bool,
    pub addon_entity: Vec<T>,
    pub addon_aggregate: T,
    pub pfe_addon: T,
    pub ead: T,
    pub trades: Vec<(VanillaTrade<T>, TradeCapital<T>)>,
}

/// Full EAD computation for a book worth `q` today.
pub fn compute_ead<T: Scalar>(
    q: T,
    trades: &[SaccrTrade<T>],
    spot: T,
    params: &SaccrParams<T>,
) -> Result<CapitalReport<T>> {
    params.validate()?;
    if !q.is_finite() {
        return invalid("portfolio value must be finite");
    }
    let rows = trades
        .iter()
        .map(|t| Ok((t.trade, trade_capital(&t.trade, spot, params.sigma_sup)?)))
        .collect::<Result<Vec<_>>>()?;
    let (addon_entity, addon) = addon_aggregate(trades, spot, params)?;
    let rc = (q - params.collateral).max(T::zero());
    let (multiplier, degenerate) = pfe_multiplier(q, params.collateral, addon);
    let pfe_addon = multiplier * addon;
    Ok(CapitalReport {
        q,
        rc,
        multiplier,
        degenerate: degenerate && !trades.is_empty(),
        addon_entity,
        addon_aggregate: addon,
        pfe_addon,
        ead: params.alpha * (rc + pfe_addon),
        trades: rows,
    })
}

/// Percentage EAD reduction of the compressed book relative to the target.
pub fn compare_capital<T: Scalar>(target: &CapitalReport<T>, compressed: &CapitalReport<T>) -> Result<T> {
    if target.ead == T::zero() {
        return invalid("target EAD is zero; reduction is undefined");
    }
    Ok(T::lit(100.0) * (target.ead - compressed.ead) / target.ead)
}

pub const CAPITAL_TRADE_HEADER: [&str; 9] = [
    "strike",
    "maturity",
    "kind",
    "direction",
    "weight",
    "an",
    "sd",
    "mf",
    "en",
];

/// Per-trade table, a blank line, then a `metric,value` summary block.
pub fn write_capital_csv(path: impl AsRef<Path>, report: &CapitalReport<f64>) -> Result<()> {
    let path = path.as_ref();
    let mut out = CsvOut::create(path, &CAPITAL_TRADE_HEADER)?;
    for (t, c) in &report.trades {
        out.row([
            t.strike.to_string(),
            t.maturity.to_string(),
            t.kind.as_str().to_string(),
            t.direction.as_str().to_string(),
            t.weight.to_string(),
            c.adjusted_notional.to_string(),
            c.supervisory_delta.to_string(),
            c.maturity_factor.to_string(),
            c.effective_notional.to_string(),
        ])?;
    }
    out.finish()?;
    let mut summary = String::from("\nmetric,value\n");
    let mut line = |k: &str, v: f64| summary.push_str(&format!("{k},{v}\n"));
    line("q", report.q);
    line("rc", report.rc);
    line("multiplier", report.multiplier);
    for (e, a) in report.addon_entity.iter().enumerate() {
        line(&format!("addon_entity_{e}"), *a);
    }
    line("addon_aggregate", report.addon_aggregate);
    line("pfe", report.pfe_addon);
    line("ead", report.ead);
    summary.push_str(&format!("degenerate,{}\n", report.degenerate));
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| crate::error::Error::io(path, e))?;
    f.write_all(summary.as_bytes())
        .map_err(|e| crate::error::Error::io(path, e))
}

/// Reads the summary block of a capital report as `(metric, value)` pairs.
pub fn read_capital_summary(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| crate::error::Error::io(path, e))?;
    let block = text
        .split("\nmetric,value\n")
        .nth(1)
        .ok_or_else(|| crate::io::format_err(path, 1, "missing summary block"))?;
    Ok(block
        .lines()
        .filter_map(|l| l.split_once(','))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::Direction;

    fn t(strike: f64, maturity: f64, kind: OptionKind, direction: Direction, weight: f64) -> VanillaTrade<f64> {
        VanillaTrade {
            strike,
            maturity,
            kind,
            direction,
            weight,
        }
    }

    #[test]
    fn maturity_factor_examples() {
        assert_eq!(maturity_factor(0.25).unwrap(), 0.5);
        assert_eq!(maturity_factor(1.0).unwrap(), 1.0);
        assert_eq!(maturity_factor(2.0).unwrap(), 1.0);
        assert!(maturity_factor(0.0).is_err());
    }

    #[test]
    fn delta_signs_and_limits() {
        let lc = t(1e-12, 0.5, OptionKind::Call, Direction::Long, 1.0);
        assert!((supervisory_delta(&lc, 1.0, 1.2).unwrap() - 1.0).abs() < 1e-15);
        let call = t(1.1, 0.5, OptionKind::Call, Direction::Long, 1.0);
        let put = t(1.1, 0.5, OptionKind::Put, Direction::Long, 1.0);
        let sc = supervisory_delta(&call, 1.0, 1.2).unwrap();
        let sp = supervisory_delta(&put, 1.0, 1.2).unwrap();
        assert!(sp < 0.0);
        assert!((sc + sp.abs() - 1.0).abs() < 1e-15);
        let short_put = t(1.1, 0.5, OptionKind::Put, Direction::Short, 1.0);
        assert_eq!(supervisory_delta(&short_put, 1.0, 1.2).unwrap(), -sp);
        assert_eq!(
            supervisory_delta(&t(0.0, 0.5, OptionKind::Call, Direction::Short, 1.0), 1.0, 1.2).unwrap(),
            -1.0
        );
        assert_eq!(
            supervisory_delta(&t(0.0, 0.5, OptionKind::Put, Direction::Long, 1.0), 1.0, 1.2).unwrap(),
            0.0
        );
        assert!(supervisory_delta(&t(-1.0, 0.5, OptionKind::Call, Direction::Long, 1.0), 1.0, 1.2).is_err());
        assert!(supervisory_delta(&t(1.0, 0.0, OptionKind::Call, Direction::Long, 1.0), 1.0, 1.2).is_err());
    }

    #[test]
    fn effective_notional_sign_flip() {
        assert_eq!(
            effective_notional(&t(1.0, 0.5, OptionKind::Call, Direction::Long, 0.0), 1.0, 1.2).unwrap(),
            0.0
        );
        let l = effective_notional(&t(0.9, 0.75, OptionKind::Call, Direction::Long, 2.0), 1.0, 1.2).unwrap();
        let s = effective_notional(&t(0.9, 0.75, OptionKind::Call, Direction::Short, 2.0), 1.0, 1.2).unwrap();
        assert_eq!(l, -s);
    }

    #[test]
    fn aggregation_cases() {
        let a = 3.7;
        assert_eq!(aggregate_entities(&[a, 0.0], &[0.5, 0.5]), a);
        assert_eq!(aggregate_entities(&[a, a], &[1.0, 1.0]), 2.0 * a);
        let v = aggregate_entities(&[a, -a], &[0.5, 0.5]);
        assert!((v - a * 1.5_f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn multiplier_regimes() {
        assert_eq!(pfe_multiplier(10.0, 0.0, 3.0), (1.0, false));
        assert_eq!(pfe_multiplier(0.0, 0.0, 3.0), (1.0, false));
        let (m, _) = pfe_multiplier(-1e9, 0.0, 3.0);
        assert_eq!(m, 0.05);
        let addon = 2.0;
        let (m, _) = pfe_multiplier(-2.0 * 0.95 * addon, 0.0, addon);
        assert!((m - (0.05 + 0.95 * (-1.0_f64).exp())).abs() < 1e-15);
        assert_eq!(pfe_multiplier(1.0, 0.0, 0.0), (1.0, true));
    }

    #[test]
    fn empty_book() {
        let r = compute_ead(0.0, &[], 1.0, &SaccrParams::default()).unwrap();
        assert_eq!((r.rc, r.addon_aggregate, r.ead), (0.0, 0.0, 0.0));
        assert!(!r.degenerate);
    }

    #[test]
    fn report_identities() {
        let trades = single_entity(&[
            t(0.9, 0.25, OptionKind::Call, Direction::Long, 1.0),
            t(1.1, 1.0, OptionKind::Put, Direction::Long, 3.0),
        ]);
        let p = SaccrParams {
            collateral: 0.05,
            ..SaccrParams::default()
        };
        let r = compute_ead(0.3, &trades, 1.0, &p).unwrap();
        assert!((r.rc - 0.25).abs() < 1e-15);
        assert!((r.ead - 1.4 * (r.rc + r.pfe_addon)).abs() < 1e-15);
        assert!(r.multiplier >= 0.05 && r.multiplier <= 1.0);
        let en: f64 = r.trades.iter().map(|(_, c)| c.effective_notional).sum();
        assert!((r.addon_aggregate - (0.32 * en).abs()).abs() < 1e-15);
    }

    #[test]
    fn zero_target_ead_is_an_error() {
        let r = compute_ead(0.0, &[], 1.0, &SaccrParams::default()).unwrap();
        assert!(compare_capital(&r, &r).is_err());
    }

    #[test]
    fn capital_file_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("capital_report.csv");
        let trades = single_entity(&[t(0.9, 0.25, OptionKind::Call, Direction::Long, 1.0)]);
        let r = compute_ead(0.2, &trades, 1.0, &SaccrParams::default()).unwrap();
        write_capital_csv(&path, &r).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("strike,maturity,kind,direction,weight,an,sd,mf,en\n0.9,0.25,call,long,1,1,"));
        let summary = read_capital_summary(&path).unwrap();
        let ead = summary.iter().find(|(k, _)| k == "ead").unwrap();
        assert_eq!(ead.1.parse::<f64>().unwrap(), r.ead);
    }
}
