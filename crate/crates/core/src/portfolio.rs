//! Target option book: construction, serialization and path-wise revaluation.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::io::{format_err, CsvIn, CsvOut};
use crate::market_sim::{HorizonGrid, MarketConfig};
use crate::pricing::{GreeksTriple, OptionKind, VanillaPricer};
use crate::scalar::{CompensatedSum, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Long,
    Short,
}

impl Direction {
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Direction::Long => T::one(),
            Direction::Short => -T::one(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Long => "long",
            Direction::Short => "short",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "long" | "buy" | "1" | "+1" => Some(Direction::Long),
            "short" | "sell" | "-1" => Some(Direction::Short),
            _ => None,
        }
    }
}

/// One European option position. Maturity is measured from time zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanillaTrade<T> {
    pub strike: T,
    pub maturity: T,
    pub kind: OptionKind,
    pub direction: Direction,
    pub weight: T,
}

impl<T: Scalar> VanillaTrade<T> {
    /// Signed quantity: `weight * i_ls`.
    #[inline]
    pub fn position(&self) -> T {
        self.weight * self.direction.sign()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetPortfolio<T> {
    trades: Vec<VanillaTrade<T>>,
}

impl<T: Scalar> TargetPortfolio<T> {
    pub fn new(trades: Vec<VanillaTrade<T>>) -> Result<Self> {
        if trades.is_empty() {
            return invalid("target portfolio needs at least one trade");
        }
        for (i, t) in trades.iter().enumerate() {
            if !(t.strike >= T::zero()) || !t.strike.is_finite() {
                return invalid(format!("trade {i}: strike must be non-negative"));
            }
            if !(t.maturity > T::zero()) {
                return invalid(format!("trade {i}: maturity must be positive"));
            }
            if !(t.weight.abs() > T::zero()) || !t.weight.is_finite() {
                return invalid(format!("trade {i}: weight must be non-zero"));
            }
        }
        Ok(Self { trades })
    }

    pub fn trades(&self) -> &[VanillaTrade<T>] {
        &self.trades
    }

    pub fn len(&self) -> usize {
        self.trades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trades.is_empty()
    }

    pub fn max_maturity(&self) -> T {
        self.trades.iter().map(|t| t.maturity).fold(T::zero(), T::max)
    }

    /// Checks every maturity lies on `grid`.
    pub fn check_grid(&self, grid: &HorizonGrid<T>) -> Result<()> {
        for (i, t) in self.trades.iter().enumerate() {
            if grid.index_of(t.maturity).is_none() {
                return invalid(format!("trade {i}: maturity {} is not on the horizon grid", t.maturity));
            }
        }
        Ok(())
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut trades = self.trades.clone();
        trades.extend_from_slice(&other.trades);
        Self { trades }
    }
}

/// Recipe for a synthetic target book.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSpec<T> {
    pub n_calls: usize,
    pub n_puts: usize,
    pub moneyness_lo: T,
    pub moneyness_hi: T,
    /// Probability of each grid horizon being drawn as a maturity.
    pub maturity_pmf: Vec<T>,
    /// Probability that a trade is long; the rest are short.
    pub long_prob: T,
    pub seed: u64,
}

impl<T: Scalar> PortfolioSpec<T> {
    pub fn validate(&self, grid: &HorizonGrid<T>) -> Result<()> {
        if self.n_calls + self.n_puts == 0 {
            return invalid("portfolio spec has no trades");
        }
        if !(self.moneyness_lo > T::zero()) || !(self.moneyness_lo < self.moneyness_hi) {
            return invalid("moneyness bounds must satisfy 0 < lo < hi");
        }
        if self.maturity_pmf.is_empty() {
            return invalid("maturity pmf over an empty grid");
        }
        if self.maturity_pmf.len() != grid.len() {
            return invalid(format!(
                "maturity pmf has {} entries for a grid of {}",
                self.maturity_pmf.len(),
                grid.len()
            ));
        }
        if self.maturity_pmf.iter().any(|&p| !(p >= T::zero())) {
            return invalid("maturity pmf has a negative entry");
        }
        let total: T = self.maturity_pmf.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-9) {
            return invalid(format!("maturity pmf sums to {total}, not 1"));
        }
        if !(self.long_prob >= T::zero() && self.long_prob <= T::one()) {
            return invalid("long probability must lie in [0, 1]");
        }
        Ok(())
    }
}

/// `n` equidistant points on `[lo, hi]`, both ends included; a single point
/// sits at the midpoint.
pub fn equidistant<T: Scalar>(n: usize, lo: T, hi: T) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![(lo + hi) * T::lit(0.5)],
        _ => {
            let step = (hi - lo) / T::from_usize_lossy(n - 1);
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        hi
                    } else {
                        lo + step * T::from_usize_lossy(i)
                    }
                })
                .collect()
        }
    }
}

fn sample_index<T: Scalar>(pmf: &[T], u: f64) -> usize {
    let mut cum = 0.0;
    for (i, p) in pmf.iter().enumerate() {
        cum += p.as_f64();
        if u < cum {
            return i;
        }
    }
    // rounding in the tail: fall back to the last bucket with mass
    pmf.iter().rposition(|p| *p > T::zero()).unwrap_or(pmf.len() - 1)
}

/// Builds calls then puts on equidistant strike grids, drawing maturities and
/// directions from `spec.seed`.
pub fn build_target_portfolio<T: Scalar>(
    spec: &PortfolioSpec<T>,
    market: &MarketConfig<T>,
    grid: &HorizonGrid<T>,
) -> Result<TargetPortfolio<T>> {
    spec.validate(grid)?;
    let lo = spec.moneyness_lo * market.spot;
    let hi = spec.moneyness_hi * market.spot;
    let horizons = grid.horizons();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let long_prob = spec.long_prob.as_f64();

    let strikes = equidistant(spec.n_calls, lo, hi)
        .into_iter()
        .map(|k| (k, OptionKind::Call))
        .chain(
            equidistant(spec.n_puts, lo, hi)
                .into_iter()
                .map(|k| (k, OptionKind::Put)),
        );
    let mut trades = Vec::with_capacity(spec.n_calls + spec.n_puts);
    for (strike, kind) in strikes {
        let mi = sample_index(&spec.maturity_pmf, rng.random::<f64>());
        let direction = if rng.random::<f64>() < long_prob {
            Direction::Long
        } else {
            Direction::Short
        };
        trades.push(VanillaTrade {
            strike,
            maturity: horizons[mi],
            kind,
            direction,
            weight: T::one(),
        });
    }
    TargetPortfolio::new(trades)
}

/// How trades maturing exactly at the valuation time are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expiring {
    /// Contribute their payoff (and expiry-limit Greeks).
    Payoff,
    /// Already settled; contribute nothing.
    Settled,
}

fn expiry_tolerance<T: Scalar>(t: T) -> T {
    T::lit(1e-12) * t.abs().max(T::one())
}

fn live_pricers<T: Scalar>(
    p: &TargetPortfolio<T>,
    t: T,
    market: &MarketConfig<T>,
    expiring: Expiring,
) -> Result<Vec<(VanillaPricer<T>, T)>> {
    market.validate()?;
    if !(t >= T::zero()) {
        return invalid(format!("valuation time must be non-negative, got {t}"));
    }
    let tol = expiry_tolerance(t);
    if t > p.max_maturity() + tol {
        return invalid(format!(
            "valuation time {t} is beyond the last maturity {}",
            p.max_maturity()
        ));
    }
    let mut out = Vec::with_capacity(p.len());
    for trade in p.trades() {
        let tau = trade.maturity - t;
        if tau < -tol {
            continue;
        }
        let at_expiry = tau.abs() <= tol;
        if at_expiry && expiring == Expiring::Settled {
            continue;
        }
        let tau = if at_expiry { T::zero() } else { tau };
        out.push((
            VanillaPricer::new(trade.strike, market.vol, market.rate, tau, trade.kind),
            trade.position(),
        ));
    }
    Ok(out)
}

fn check_spots<T: Scalar>(spots: &[T]) -> Result<()> {
    if let Some(s) = spots.iter().find(|s| !(**s > T::zero())) {
        return invalid(format!("spot levels must be positive, got {s}"));
    }
    Ok(())
}

/// Portfolio value at time `t` on each spot level. Trades that matured
/// before `t` are gone; those maturing at `t` pay their intrinsic value.
pub fn value_portfolio<T: Scalar>(
    p: &TargetPortfolio<T>,
    spots: &[T],
    t: T,
    market: &MarketConfig<T>,
) -> Result<Vec<T>> {
    value_portfolio_with(p, spots, t, market, Expiring::Payoff)
}

pub fn value_portfolio_with<T: Scalar>(
    p: &TargetPortfolio<T>,
    spots: &[T],
    t: T,
    market: &MarketConfig<T>,
    expiring: Expiring,
) -> Result<Vec<T>> {
    check_spots(spots)?;
    let pricers = live_pricers(p, t, market, expiring)?;
    Ok(spots
        .par_iter()
        .map(|&s| {
            let mut acc = CompensatedSum::new();
            for (pr, pos) in &pricers {
                acc.add(*pos * pr.price(s));
            }
            acc.value()
        })
        .collect())
}

/// Per-path portfolio sensitivities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathGreeks<T> {
    pub delta: Vec<T>,
    pub gamma: Vec<T>,
    pub vega: Vec<T>,
}

impl<T: Scalar> PathGreeks<T> {
    pub(crate) fn from_triples(g: Vec<GreeksTriple<T>>) -> Self {
        let mut out = PathGreeks {
            delta: Vec::with_capacity(g.len()),
            gamma: Vec::with_capacity(g.len()),
            vega: Vec::with_capacity(g.len()),
        };
        for x in g {
            out.delta.push(x.delta);
            out.gamma.push(x.gamma);
            out.vega.push(x.vega);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }
}

pub(crate) fn sum_greeks<T: Scalar>(pricers: &[(VanillaPricer<T>, T)], spot: T) -> GreeksTriple<T> {
    let mut d = CompensatedSum::new();
    let mut g = CompensatedSum::new();
    let mut v = CompensatedSum::new();
    for (pr, w) in pricers {
        let x = pr.greeks(spot);
        d.add(*w * x.delta);
        g.add(*w * x.gamma);
        v.add(*w * x.vega);
    }
    GreeksTriple {
        delta: d.value(),
        gamma: g.value(),
        vega: v.value(),
    }
}

/// Position-weighted sums of per-option Greeks on each spot level.
pub fn portfolio_greeks<T: Scalar>(
    p: &TargetPortfolio<T>,
    spots: &[T],
    t: T,
    market: &MarketConfig<T>,
) -> Result<PathGreeks<T>> {
    portfolio_greeks_with(p, spots, t, market, Expiring::Payoff)
}

pub fn portfolio_greeks_with<T: Scalar>(
    p: &TargetPortfolio<T>,
    spots: &[T],
    t: T,
    market: &MarketConfig<T>,
    expiring: Expiring,
) -> Result<PathGreeks<T>> {
    check_spots(spots)?;
    let pricers = live_pricers(p, t, market, expiring)?;
    let g: Vec<_> = spots.par_iter().map(|&s| sum_greeks(&pricers, s)).collect();
    Ok(PathGreeks::from_triples(g))
}

pub const TRADES_HEADER: [&str; 5] = ["strike", "maturity", "kind", "direction", "weight"];

/// Writes the trade file `strike,maturity,kind,direction,weight`.
pub fn write_trades_csv(trades: &[VanillaTrade<f64>], path: impl AsRef<Path>) -> Result<()> {
    let mut out = CsvOut::create(path, &TRADES_HEADER)?;
    for t in trades {
        out.row([
            t.strike.to_string(),
            t.maturity.to_string(),
            t.kind.as_str().to_string(),
            t.direction.as_str().to_string(),
            t.weight.to_string(),
        ])?;
    }
    out.finish()
}

pub fn read_trades_csv(path: impl AsRef<Path>) -> Result<Vec<VanillaTrade<f64>>> {
    let csv = CsvIn::open(path)?;
    csv.expect_header(&TRADES_HEADER)?;
    let mut trades = Vec::with_capacity(csv.rows.len());
    for (line, row) in &csv.rows {
        let kind = OptionKind::parse(&row[2])
            .ok_or_else(|| format_err(&csv.path, *line, format!("bad option kind `{}`", row[2])))?;
        let direction = Direction::parse(&row[3])
            .ok_or_else(|| format_err(&csv.path, *line, format!("bad direction `{}`", row[3])))?;
        trades.push(VanillaTrade {
            strike: csv.f64_at(*line, row, 0)?,
            maturity: csv.f64_at(*line, row, 1)?,
            kind,
            direction,
            weight: csv.f64_at(*line, row, 4)?,
        });
    }
    Ok(trades)
}
