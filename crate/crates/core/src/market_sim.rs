//! Seeded geometric Brownian motion on a uniform horizon grid.
//!
//! Each path owns a ChaCha stream selected by its index, so path `j` is a pure
//! function of `(seed, j)` and generation can be split across threads in any
//! order without changing a single bit of the output.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Spot, risk-free rate and volatility of the single underlying.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketConfig<T> {
    pub spot: T,
    pub rate: T,
    pub vol: T,
}

impl<T: Scalar> MarketConfig<T> {
    pub fn new(spot: T, rate: T, vol: T) -> Result<Self> {
        let m = Self { spot, rate, vol };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spot > T::zero()) || !self.spot.is_finite() {
            return invalid(format!("spot must be positive, got {}", self.spot));
        }
        if !(self.vol >= T::zero()) || !self.vol.is_finite() {
            return invalid(format!("sigma must be non-negative, got {}", self.vol));
        }
        if !self.rate.is_finite() {
            return invalid("rate must be finite");
        }
        Ok(())
    }
}

/// Real-world drift and volatility used only to generate paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig<T> {
    pub label: String,
    pub mu: T,
    pub sigma_real: T,
}

impl<T: Scalar> ScenarioConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_real >= T::zero()) || !self.sigma_real.is_finite() {
            return invalid(format!(
                "scenario `{}`: sigma_real must be non-negative, got {}",
                self.label, self.sigma_real
            ));
        }
        if !self.mu.is_finite() {
            return invalid(format!("scenario `{}`: mu must be finite", self.label));
        }
        Ok(())
    }
}

/// Risk horizons `dt, 2 dt, ..., steps * dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonGrid<T> {
    dt: T,
    steps: usize,
}

impl<T: Scalar> HorizonGrid<T> {
    pub fn new(dt: T, steps: usize) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return invalid(format!("grid spacing must be positive, got {dt}"));
        }
        if steps == 0 {
            return invalid("horizon grid is empty");
        }
        Ok(Self { dt, steps })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps == 0
    }

    /// Horizon `t_{i+1}` for zero-based `i`.
    pub fn horizon(&self, i: usize) -> T {
        self.dt * T::from_usize_lossy(i + 1)
    }

    pub fn horizons(&self) -> Vec<T> {
        (0..self.steps).map(|i| self.horizon(i)).collect()
    }

    pub fn last(&self) -> T {
        self.horizon(self.steps - 1)
    }

    /// Zero-based index of `t`, if it lies on the grid.
    pub fn index_of(&self, t: T) -> Option<usize> {
        let k = (t / self.dt).round();
        if k < T::one() {
            return None;
        }
        let i = k.to_usize()? - 1;
        if i >= self.steps {
            return None;
        }
        let tol = T::lit(1e-9) * self.dt.max(T::one());
        ((self.horizon(i) - t).abs() <= tol).then_some(i)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Measure {
    RiskNeutral,
    RealWorld(String),
}

impl std::fmt::Display for Measure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Measure::RiskNeutral => f.write_str("risk-neutral"),
            Measure::RealWorld(label) => write!(f, "real-world:{label}"),
        }
    }
}

/// Simulated spot levels, `n_paths x grid.len()`, stored path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix<T> {
    values: Vec<T>,
    n_paths: usize,
    grid: HorizonGrid<T>,
    seed: u64,
    measure: Measure,
}

impl<T: Scalar> PathMatrix<T> {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn grid(&self) -> &HorizonGrid<T> {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn get(&self, path: usize, horizon: usize) -> T {
        self.values[path * self.grid.len() + horizon]
    }

    pub fn path(&self, path: usize) -> &[T] {
        let n = self.grid.len();
        &self.values[path * n..(path + 1) * n]
    }

    /// Spot levels of every path at horizon index `i`.
    pub fn column(&self, i: usize) -> Vec<T> {
        (0..self.n_paths).map(|j| self.get(j, i)).collect()
    }

    /// Writes `path_id,t,spot`, one row per path and horizon.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "path_id,t,spot")?;
        let ts = self.grid.horizons();
        for j in 0..self.n_paths {
            for (i, t) in ts.iter().enumerate() {
                writeln!(out, "{j},{t},{}", self.get(j, i))?;
            }
        }
        Ok(())
    }
}

/// GBM level `s0 * exp((drift - vol^2/2) t + vol * w)` for Brownian value `w`.
#[inline]
pub fn gbm_level<T: Scalar>(s0: T, drift: T, vol: T, t: T, w: T) -> T {
    s0 * ((drift - T::lit(0.5) * vol * vol) * t + vol * w).exp()
}

/// Standard normal increments for one path, drawn from its own stream.
fn path_normals(seed: u64, path: usize, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    for z in out.iter_mut() {
        *z = rng.sample(StandardNormal);
    }
}

/// Simulates `n_paths` GBM paths on `grid`.
///
/// Drift and volatility are `(r, sigma)` from `market`, or `(mu, sigma_real)`
/// when a real-world scenario is supplied. Brownian increments are cumulated
/// along each path so horizons are mutually consistent.
pub fn simulate_paths<T: Scalar>(
    market: &MarketConfig<T>,
    grid: &HorizonGrid<T>,
    n_paths: usize,
    seed: u64,
    scenario: Option<&ScenarioConfig<T>>,
) -> Result<PathMatrix<T>> {
    market.validate()?;
    if n_paths == 0 {
        return invalid("n_paths must be at least 1");
    }
    let (drift, vol, measure) = match scenario {
        Some(s) => {
            s.validate()?;
            (s.mu, s.sigma_real, Measure::RealWorld(s.label.clone()))
        }
        None => (market.rate, market.vol, Measure::RiskNeutral),
    };
    let steps = grid.len();
    let sqrt_dt = grid.dt().sqrt();
    let times = grid.horizons();
    let mut values = vec![T::zero(); n_paths * steps];
    values.par_chunks_mut(steps).enumerate().for_each(|(j, row)| {
        let mut z = vec![0.0_f64; steps];
        path_normals(seed, j, &mut z);
        let mut w = T::zero();
        for i in 0..steps {
            w = w + sqrt_dt * T::lit(z[i]);
            row[i] = gbm_level(market.spot, drift, vol, times[i], w);
        }
    });
    Ok(PathMatrix {
        values,
        n_paths,
        grid: *grid,
        seed,
        measure,
    })
}
