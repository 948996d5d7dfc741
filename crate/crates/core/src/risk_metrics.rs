//! Replication error, exposure profiles and Greeks comparison between a
//! target book and its compressed replica.
//!
//! European options carry no path dependency, so the exposure on a path is
//! simply the portfolio PV there (optionally floored at zero for mixed books).

use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::io::{CsvIn, CsvOut};
use crate::portfolio::PathGreeks;
use crate::scalar::{CompensatedSum, Scalar};

fn check_same_len<T>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} values", a.len(), b.len())));
    }
    if a.is_empty() {
        return invalid("empty value vector");
    }
    Ok(())
}

/// Mean absolute difference between target and compressed values.
pub fn model_error<T: Scalar>(target: &[T], compressed: &[T]) -> Result<T> {
    check_same_len(target, compressed)?;
    let mut acc = CompensatedSum::new();
    for (v, p) in target.iter().zip(compressed) {
        acc.add((*v - *p).abs());
    }
    Ok(acc.value() / T::from_usize_lossy(target.len()))
}

pub fn rmse<T: Scalar>(target: &[T], compressed: &[T]) -> Result<T> {
    check_same_len(target, compressed)?;
    let mut acc = CompensatedSum::new();
    for (v, p) in target.iter().zip(compressed) {
        let d = *v - *p;
        acc.add(d * d);
    }
    Ok((acc.value() / T::from_usize_lossy(target.len())).sqrt())
}

fn rms<T: Scalar>(xs: &[T]) -> T {
    let mut acc = CompensatedSum::new();
    for x in xs {
        acc.add(*x * *x);
    }
    (acc.value() / T::from_usize_lossy(xs.len().max(1))).sqrt()
}

/// Expected exposure: arithmetic mean.
pub fn ee<T: Scalar>(exposures: &[T]) -> Result<T> {
    if exposures.is_empty() {
        return invalid("expected exposure of an empty sample");
    }
    let mut acc = CompensatedSum::new();
    for x in exposures {
        acc.add(*x);
    }
    Ok(acc.value() / T::from_usize_lossy(exposures.len()))
}

/// 1-based rank `ceil(q N)` of the empirical quantile, clamped to `[1, N]`.
pub fn quantile_rank(q: f64, n: usize) -> usize {
    let x = q * n as f64;
    let r = x.round();
    // q N that is an integer up to rounding noise is not bumped up a rank
    let rank = if (x - r).abs() <= 1e-9 * (n as f64).max(1.0) {
        r
    } else {
        x.ceil()
    };
    (rank as usize).clamp(1, n)
}

/// Potential future exposure: ascending order statistic at `ceil(q N)`, no
/// interpolation.
pub fn pfe<T: Scalar>(exposures: &[T], q: f64) -> Result<T> {
    if exposures.is_empty() {
        return invalid("potential future exposure of an empty sample");
    }
    if !(q > 0.0 && q < 1.0) {
        return invalid(format!("quantile must lie in (0, 1), got {q}"));
    }
    let k = quantile_rank(q, exposures.len()) - 1;
    let mut xs = exposures.to_vec();
    let (_, kth, _) = xs.select_nth_unstable_by(k, |a, b| a.partial_cmp(b).expect("finite exposures"));
    Ok(*kth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExposureFloor {
    /// Exposure is the raw PV.
    #[default]
    None,
    /// Exposure is `max(PV, 0)`.
    Zero,
}

impl ExposureFloor {
    pub fn apply<T: Scalar>(self, pv: &[T]) -> Vec<T> {
        match self {
            ExposureFloor::None => pv.to_vec(),
            ExposureFloor::Zero => pv.iter().map(|v| v.max(T::zero())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExposureProfile<T> {
    pub label: String,
    pub measure: String,
    pub horizons: Vec<T>,
    pub ee: Vec<T>,
    pub pfe: Vec<T>,
}

pub fn exposure_profile<T: Scalar>(
    label: &str,
    measure: &str,
    horizons: &[T],
    pv: &[Vec<T>],
    q: f64,
    floor: ExposureFloor,
) -> Result<ExposureProfile<T>> {
    if pv.len() != horizons.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} PV vectors for {} horizons",
            pv.len(),
            horizons.len()
        )));
    }
    let mut ee_v = Vec::with_capacity(pv.len());
    let mut pfe_v = Vec::with_capacity(pv.len());
    for v in pv {
        let x = floor.apply(v);
        ee_v.push(ee(&x)?);
        pfe_v.push(pfe(&x, q)?);
    }
    Ok(ExposureProfile {
        label: label.to_string(),
        measure: measure.to_string(),
        horizons: horizons.to_vec(),
        ee: ee_v,
        pfe: pfe_v,
    })
}

/// Exposure comparison at one horizon. Signed errors are `target - compressed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonBenchmark<T> {
    pub t: T,
    pub mae: T,
    pub rmse: T,
    pub rmse_over_m: T,
    pub ee_target: T,
    pub ee_compressed: T,
    pub pfe_target: T,
    pub pfe_compressed: T,
    pub ee_err: T,
    pub pfe_err: T,
}

impl<T: Scalar> HorizonBenchmark<T> {
    /// `|EE error| / M`.
    pub fn scaled_ee_err(&self, m: usize) -> T {
        self.ee_err.abs() / T::from_usize_lossy(m)
    }

    /// `|PFE error| / M`.
    pub fn scaled_pfe_err(&self, m: usize) -> T {
        self.pfe_err.abs() / T::from_usize_lossy(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport<T> {
    pub measure: String,
    /// Number of target options used to scale errors.
    pub target_size: usize,
    pub horizons: Vec<HorizonBenchmark<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkOptions {
    pub quantile: f64,
    pub floor: ExposureFloor,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            quantile: 0.99,
            floor: ExposureFloor::None,
        }
    }
}

/// Per-horizon EE/PFE of both books, their signed differences and the PV
/// replication error. `target[i]` and `compressed[i]` are path-aligned PVs
/// at `horizons[i]`.
pub fn exposure_benchmark<T: Scalar>(
    measure: &str,
    horizons: &[T],
    target: &[Vec<T>],
    compressed: &[Vec<T>],
    target_size: usize,
    opts: BenchmarkOptions,
) -> Result<BenchmarkReport<T>> {
    if target.len() != horizons.len() || compressed.len() != horizons.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} target and {} compressed horizons for a grid of {}",
            target.len(),
            compressed.len(),
            horizons.len()
        )));
    }
    if target_size == 0 {
        return invalid("target size must be positive");
    }
    let m = T::from_usize_lossy(target_size);
    let mut out = Vec::with_capacity(horizons.len());
    for ((&t, v), p) in horizons.iter().zip(target).zip(compressed) {
        check_same_len(v, p)?;
        let ev = opts.floor.apply(v);
        let ep = opts.floor.apply(p);
        let (ee_t, ee_c) = (ee(&ev)?, ee(&ep)?);
        let (pfe_t, pfe_c) = (pfe(&ev, opts.quantile)?, pfe(&ep, opts.quantile)?);
        let r = rmse(v, p)?;
        out.push(HorizonBenchmark {
            t,
            mae: model_error(v, p)?,
            rmse: r,
            rmse_over_m: r / m,
            ee_target: ee_t,
            ee_compressed: ee_c,
            pfe_target: pfe_t,
            pfe_compressed: pfe_c,
            ee_err: ee_t - ee_c,
            pfe_err: pfe_t - pfe_c,
        });
    }
    Ok(BenchmarkReport {
        measure: measure.to_string(),
        target_size,
        horizons: out,
    })
}

/// Greeks comparison at one horizon. RMS values are of the target series and
/// serve as the scale for the RMSEs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreeksHorizonReport<T> {
    pub t: T,
    pub delta_rmse: T,
    pub gamma_rmse: T,
    pub vega_rmse: T,
    pub delta_rms: T,
    pub gamma_rms: T,
    pub vega_rms: T,
    pub atm_paths: usize,
    /// Fraction of at-the-money paths where compressed vega < target vega.
    pub vega_lower_atm: f64,
    /// Two-sided sign-test p-value of per-path `target - compressed` vega.
    pub vega_sign_p: f64,
}

/// Spot band `[lo, hi] * S0` counted as at the money.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmBand {
    pub lo: f64,
    pub hi: f64,
}

impl Default for AtmBand {
    fn default() -> Self {
        Self { lo: 0.9, hi: 1.1 }
    }
}

/// Two-sided exact binomial sign test for `positives` out of
/// `positives + negatives` under p = 1/2.
pub fn sign_test_p(positives: usize, negatives: usize) -> f64 {
    let n = positives + negatives;
    if n == 0 {
        return 1.0;
    }
    let k = positives.min(negatives);
    let ln_n_fact = libm::lgamma(n as f64 + 1.0);
    let ln_half_n = n as f64 * std::f64::consts::LN_2;
    let tail: f64 = (0..=k)
        .map(|i| {
            let ln_c = ln_n_fact - libm::lgamma(i as f64 + 1.0) - libm::lgamma((n - i) as f64 + 1.0);
            (ln_c - ln_half_n).exp()
        })
        .sum();
    (2.0 * tail).min(1.0)
}

pub fn greeks_benchmark<T: Scalar>(
    t: T,
    spots: &[T],
    target: &PathGreeks<T>,
    compressed: &PathGreeks<T>,
    initial_spot: T,
    band: AtmBand,
) -> Result<GreeksHorizonReport<T>> {
    check_same_len(&target.delta, &compressed.delta)?;
    check_same_len(spots, &target.delta)?;
    let lo = T::lit(band.lo) * initial_spot;
    let hi = T::lit(band.hi) * initial_spot;
    let (mut pos, mut neg) = (0usize, 0usize);
    let (mut atm, mut lower) = (0usize, 0usize);
    for ((&s, &vt), &vc) in spots.iter().zip(&target.vega).zip(&compressed.vega) {
        let d = vt - vc;
        if d > T::zero() {
            pos += 1;
        } else if d < T::zero() {
            neg += 1;
        }
        if s >= lo && s <= hi {
            atm += 1;
            if vc < vt {
                lower += 1;
            }
        }
    }
    Ok(GreeksHorizonReport {
        t,
        delta_rmse: rmse(&target.delta, &compressed.delta)?,
        gamma_rmse: rmse(&target.gamma, &compressed.gamma)?,
        vega_rmse: rmse(&target.vega, &compressed.vega)?,
        delta_rms: rms(&target.delta),
        gamma_rms: rms(&target.gamma),
        vega_rms: rms(&target.vega),
        atm_paths: atm,
        vega_lower_atm: if atm == 0 { 0.0 } else { lower as f64 / atm as f64 },
        vega_sign_p: sign_test_p(pos, neg),
    })
}

pub const PV_DIST_HEADER: [&str; 3] = ["spot", "target_pv", "compressed_pv"];
pub const EXPOSURE_HEADER: [&str; 7] = [
    "t",
    "ee_target",
    "ee_comp",
    "pfe_target",
    "pfe_comp",
    "ee_err",
    "pfe_err",
];
pub const GREEKS_HEADER: [&str; 7] = [
    "spot",
    "delta_target",
    "delta_comp",
    "gamma_target",
    "gamma_comp",
    "vega_target",
    "vega_comp",
];

pub fn write_pv_dist_csv(path: impl AsRef<Path>, spots: &[f64], target: &[f64], compressed: &[f64]) -> Result<()> {
    check_same_len(spots, target)?;
    check_same_len(spots, compressed)?;
    let mut out = CsvOut::create(path, &PV_DIST_HEADER)?;
    for ((s, v), p) in spots.iter().zip(target).zip(compressed) {
        out.row([s.to_string(), v.to_string(), p.to_string()])?;
    }
    out.finish()
}

/// Reads a `pv_dist` file back into `(spots, target_pv, compressed_pv)`.
pub fn read_pv_dist_csv(path: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let csv = CsvIn::open(path)?;
    csv.expect_header(&PV_DIST_HEADER)?;
    let mut cols = (Vec::new(), Vec::new(), Vec::new());
    for (line, row) in &csv.rows {
        cols.0.push(csv.f64_at(*line, row, 0)?);
        cols.1.push(csv.f64_at(*line, row, 1)?);
        cols.2.push(csv.f64_at(*line, row, 2)?);
    }
    Ok(cols)
}

pub fn write_exposure_csv(path: impl AsRef<Path>, report: &BenchmarkReport<f64>) -> Result<()> {
    let mut out = CsvOut::create(path, &EXPOSURE_HEADER)?;
    for h in &report.horizons {
        out.row(
            [
                h.t,
                h.ee_target,
                h.ee_compressed,
                h.pfe_target,
                h.pfe_compressed,
                h.ee_err,
                h.pfe_err,
            ]
            .map(|v| v.to_string()),
        )?;
    }
    out.finish()
}

pub fn write_greeks_csv(
    path: impl AsRef<Path>,
    spots: &[f64],
    target: &PathGreeks<f64>,
    compressed: &PathGreeks<f64>,
) -> Result<()> {
    check_same_len(spots, &target.delta)?;
    check_same_len(spots, &compressed.delta)?;
    let mut out = CsvOut::create(path, &GREEKS_HEADER)?;
    for i in 0..spots.len() {
        out.row(
            [
                spots[i],
                target.delta[i],
                compressed.delta[i],
                target.gamma[i],
                compressed.gamma[i],
                target.vega[i],
                compressed.vega[i],
            ]
            .map(|v| v.to_string()),
        )?;
    }
    out.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_error_examples() {
        assert_eq!(model_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(model_error(&[1.0, 3.0], &[0.0, 0.0]).unwrap(), 2.0);
        assert!(model_error(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn constant_and_ranked_exposures() {
        let c = vec![2.5; 17];
        assert_eq!(ee(&c).unwrap(), 2.5);
        assert_eq!(pfe(&c, 0.99).unwrap(), 2.5);
        let xs: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(pfe(&xs, 0.99).unwrap(), 99.0);
        assert_eq!(pfe(&xs, 0.995).unwrap(), 100.0);
        assert_eq!(pfe(&xs, 0.005).unwrap(), 1.0);
        assert!(pfe::<f64>(&[], 0.99).is_err());
        assert!(ee::<f64>(&[]).is_err());
        assert!(pfe(&xs, 1.0).is_err());
    }

    #[test]
    fn identical_books_have_zero_errors() {
        let v = vec![vec![1.0, 2.0, 3.0], vec![0.5, 0.25, 4.0]];
        let r = exposure_benchmark("rn", &[0.25, 0.5], &v, &v, 10, BenchmarkOptions::default()).unwrap();
        for h in &r.horizons {
            assert_eq!((h.mae, h.rmse, h.ee_err, h.pfe_err), (0.0, 0.0, 0.0, 0.0));
        }
        let g = PathGreeks {
            delta: vec![0.1, 0.2],
            gamma: vec![1.0, 2.0],
            vega: vec![0.3, 0.1],
        };
        let rep = greeks_benchmark(0.25, &[1.0, 1.05], &g, &g, 1.0, AtmBand::default()).unwrap();
        assert_eq!((rep.delta_rmse, rep.gamma_rmse, rep.vega_rmse), (0.0, 0.0, 0.0));
        assert_eq!(rep.vega_sign_p, 1.0);
    }

    #[test]
    fn sign_test_values() {
        assert_eq!(sign_test_p(0, 0), 1.0);
        // n = 10, k = 0: 2 / 1024
        assert!((sign_test_p(10, 0) - 2.0 / 1024.0).abs() < 1e-15);
        // n = 4, k = 1: 2 * 5/16
        assert!((sign_test_p(1, 3) - 0.625).abs() < 1e-14);
        assert_eq!(sign_test_p(50, 50), 1.0);
    }

    #[test]
    fn mismatched_dimensions() {
        let v = vec![vec![1.0, 2.0]];
        let p = vec![vec![1.0]];
        assert!(exposure_benchmark("rn", &[0.25], &v, &p, 1, BenchmarkOptions::default()).is_err());
        assert!(exposure_benchmark("rn", &[0.25, 0.5], &v, &v, 1, BenchmarkOptions::default()).is_err());
    }

    #[test]
    fn floor_flag() {
        let v = vec![vec![-1.0, 3.0]];
        let r = exposure_benchmark(
            "rn",
            &[1.0],
            &v,
            &v,
            1,
            BenchmarkOptions {
                floor: ExposureFloor::Zero,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.horizons[0].ee_target, 1.5);
    }
}
