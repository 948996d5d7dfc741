//! Compression of a target book into a handful of short-dated vanillas.
//!
//! One network is trained per risk horizon `t`. Its hidden nodes are the
//! compressed options (strike = bias, call/put = fixed input weight) and its
//! output weights are their position sizes, so the trained network *is* a
//! static hedge set up at `t - dt` and expiring at `t`.

mod adam;
mod network;
mod ols;
mod train;

use std::path::Path;

use rayon::prelude::*;

pub use adam::{adam_step, AdamParams, AdamState};
pub use network::{grad_strikes, init_strikes, loss, node_kinds, payoff_matrix, PayoffMatrix};
pub use ols::{fit_weights_ols, OlsFit, PRUNE_TOL};
pub use train::{train, EpochRecord, RefitScope, TrainingConfig, TrainingProblem, TrainingTrace};

use crate::error::{invalid, Error, Result};
use crate::io::{format_err, CsvIn, CsvOut};
use crate::market_sim::MarketConfig;
use crate::portfolio::{sum_greeks, Direction, PathGreeks, VanillaTrade};
use crate::pricing::{OptionKind, VanillaPricer};
use crate::scalar::{cdot, CompensatedSum, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedPortfolio<T> {
    strikes: Vec<T>,
    weights: Vec<T>,
    kinds: Vec<OptionKind>,
    horizon: T,
    tenor: T,
}

impl<T: Scalar> CompressedPortfolio<T> {
    pub fn new(strikes: Vec<T>, weights: Vec<T>, kinds: Vec<OptionKind>, horizon: T, tenor: T) -> Result<Self> {
        if strikes.is_empty() {
            return invalid("compressed portfolio has no options");
        }
        if strikes.len() != weights.len() || strikes.len() != kinds.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} strikes, {} weights, {} kinds",
                strikes.len(),
                weights.len(),
                kinds.len()
            )));
        }
        if strikes.iter().any(|k| !(*k >= T::zero())) {
            return invalid("compressed strikes must be non-negative");
        }
        if !(tenor > T::zero()) || !(horizon >= tenor) {
            return invalid(format!(
                "need 0 < tenor <= horizon, got tenor {tenor}, horizon {horizon}"
            ));
        }
        Ok(Self {
            strikes,
            weights,
            kinds,
            horizon,
            tenor,
        })
    }

    pub fn strikes(&self) -> &[T] {
        &self.strikes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn kinds(&self) -> &[OptionKind] {
        &self.kinds
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn tenor(&self) -> T {
        self.tenor
    }

    /// Inception time `horizon - tenor`.
    pub fn start(&self) -> T {
        self.horizon - self.tenor
    }

    pub fn len(&self) -> usize {
        self.strikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strikes.is_empty()
    }

    /// Value at expiry, `W . phi(spot, K)`.
    pub fn payoff(&self, spot: T) -> T {
        let row: Vec<T> = self
            .strikes
            .iter()
            .zip(&self.kinds)
            .map(|(&k, &kind)| crate::pricing::intrinsic(spot, k, kind))
            .collect();
        cdot(&self.weights, &row)
    }

    fn pricers(&self, time_now: T, market: &MarketConfig<T>) -> Result<Vec<(VanillaPricer<T>, T)>> {
        market.validate()?;
        let tol = T::lit(1e-12) * self.horizon.max(T::one());
        if time_now < self.start() - tol || time_now > self.horizon + tol {
            return invalid(format!(
                "valuation time {time_now} outside the hedge window [{}, {}]",
                self.start(),
                self.horizon
            ));
        }
        let tau = (self.horizon - time_now).max(T::zero());
        let tau = if tau <= tol { T::zero() } else { tau };
        Ok(self
            .strikes
            .iter()
            .zip(&self.kinds)
            .zip(&self.weights)
            .map(|((&k, &kind), &w)| (VanillaPricer::new(k, market.vol, market.rate, tau, kind), w))
            .collect())
    }

    /// Trade list with absolute maturity `horizon`; negative weights become
    /// short positions.
    pub fn to_trades(&self) -> Vec<VanillaTrade<T>> {
        self.strikes
            .iter()
            .zip(&self.kinds)
            .zip(&self.weights)
            .map(|((&strike, &kind), &w)| VanillaTrade {
                strike,
                maturity: self.horizon,
                kind,
                direction: if w < T::zero() {
                    Direction::Short
                } else {
                    Direction::Long
                },
                weight: w.abs(),
            })
            .collect()
    }
}

/// Black–Scholes value of the compressed book at `time_now` within its
/// hedge window. At `time_now = horizon` this is the payoff.
pub fn value_compressed<T: Scalar>(
    c: &CompressedPortfolio<T>,
    spot: T,
    time_now: T,
    market: &MarketConfig<T>,
) -> Result<T> {
    if !(spot > T::zero()) {
        return invalid(format!("spot must be positive, got {spot}"));
    }
    let pricers = c.pricers(time_now, market)?;
    let mut acc = CompensatedSum::new();
    for (p, w) in &pricers {
        acc.add(*w * p.price(spot));
    }
    Ok(acc.value())
}

/// [`value_compressed`] on many spot levels.
pub fn value_compressed_paths<T: Scalar>(
    c: &CompressedPortfolio<T>,
    spots: &[T],
    time_now: T,
    market: &MarketConfig<T>,
) -> Result<Vec<T>> {
    if let Some(s) = spots.iter().find(|s| !(**s > T::zero())) {
        return invalid(format!("spot levels must be positive, got {s}"));
    }
    let pricers = c.pricers(time_now, market)?;
    Ok(spots
        .par_iter()
        .map(|&s| {
            let mut acc = CompensatedSum::new();
            for (p, w) in &pricers {
                acc.add(*w * p.price(s));
            }
            acc.value()
        })
        .collect())
}

pub fn compressed_greeks<T: Scalar>(
    c: &CompressedPortfolio<T>,
    spots: &[T],
    time_now: T,
    market: &MarketConfig<T>,
) -> Result<PathGreeks<T>> {
    if let Some(s) = spots.iter().find(|s| !(**s > T::zero())) {
        return invalid(format!("spot levels must be positive, got {s}"));
    }
    let pricers = c.pricers(time_now, market)?;
    let g: Vec<_> = spots.par_iter().map(|&s| sum_greeks(&pricers, s)).collect();
    Ok(PathGreeks::from_triples(g))
}

pub const COMPRESSED_HEADER: [&str; 5] = ["strike", "kind", "weight", "horizon", "tenor"];

/// Writes `strike,kind,weight,horizon,tenor`.
pub fn write_compressed_csv(c: &CompressedPortfolio<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = CsvOut::create(path, &COMPRESSED_HEADER)?;
    for ((k, kind), w) in c.strikes.iter().zip(&c.kinds).zip(&c.weights) {
        out.row([
            k.to_string(),
            kind.as_str().to_string(),
            w.to_string(),
            c.horizon.to_string(),
            c.tenor.to_string(),
        ])?;
    }
    out.finish()
}

pub fn read_compressed_csv(path: impl AsRef<Path>) -> Result<CompressedPortfolio<f64>> {
    let csv = CsvIn::open(path)?;
    csv.expect_header(&COMPRESSED_HEADER)?;
    let (mut strikes, mut kinds, mut weights) = (Vec::new(), Vec::new(), Vec::new());
    let mut window: Option<(f64, f64)> = None;
    for (line, row) in &csv.rows {
        strikes.push(csv.f64_at(*line, row, 0)?);
        kinds.push(
            OptionKind::parse(&row[1])
                .ok_or_else(|| format_err(&csv.path, *line, format!("bad option kind `{}`", row[1])))?,
        );
        weights.push(csv.f64_at(*line, row, 2)?);
        let w = (csv.f64_at(*line, row, 3)?, csv.f64_at(*line, row, 4)?);
        match window {
            None => window = Some(w),
            Some(prev) if prev != w => {
                return Err(format_err(&csv.path, *line, "rows disagree on horizon/tenor"));
            }
            _ => {}
        }
    }
    let (horizon, tenor) = window.ok_or_else(|| format_err(&csv.path, 1, "no options"))?;
    CompressedPortfolio::new(strikes, weights, kinds, horizon, tenor)
}

/// Writes `epoch,mae,k_1..k_m,w_1..w_m`.
pub fn write_trace_csv(trace: &TrainingTrace<f64>, m: usize, path: impl AsRef<Path>) -> Result<()> {
    let mut header = vec!["epoch".to_string(), "mae".to_string()];
    header.extend((1..=m).map(|i| format!("k_{i}")));
    header.extend((1..=m).map(|i| format!("w_{i}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = CsvOut::create(path, &header_refs)?;
    for r in &trace.records {
        let mut row = vec![r.epoch.to_string(), r.mae.to_string()];
        row.extend(r.strikes.iter().map(f64::to_string));
        row.extend(r.weights.iter().map(f64::to_string));
        out.row(row)?;
    }
    out.finish()
}
