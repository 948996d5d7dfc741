//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::f64::consts::PI;

use portfolio_compression::config::ExperimentConfig;

/// `erf` from its Maclaurin series; accurate to rounding for |x| <= 3.
pub fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let x2 = x * x;
    for n in 1..200 {
        term *= -x2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    2.0 / PI.sqrt() * sum
}

pub fn phi_series(x: f64) -> f64 {
    0.5 * (1.0 + erf_series(x / 2f64.sqrt()))
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Discounted expected payoff under the lognormal terminal law, integrated
/// over the standard normal driver. The payoff kink is used as a split
/// point so each piece is smooth.
pub fn quad_price(spot: f64, strike: f64, vol: f64, rate: f64, tau: f64, call: bool) -> f64 {
    quad_price_n(spot, strike, vol, rate, tau, call, 20_000)
}

pub fn quad_price_n(spot: f64, strike: f64, vol: f64, rate: f64, tau: f64, call: bool, panels: usize) -> f64 {
    let sd = vol * tau.sqrt();
    let drift = (rate - 0.5 * vol * vol) * tau;
    let st = |z: f64| spot * (drift + sd * z).exp();
    let dens = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    let kink = ((strike / spot).ln() - drift) / sd;
    let f = |z: f64| {
        let s = st(z);
        let p = if call { s - strike } else { strike - s };
        p.max(0.0) * dens(z)
    };
    let (lo, hi) = (-12.0, 12.0);
    let k = kink.clamp(lo, hi);
    let v = simpson(f, lo, k, panels) + simpson(f, k, hi, panels);
    (-rate * tau).exp() * v
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn workspace_path(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// A pipeline config small enough for debug-speed integration tests.
pub fn small_config_text() -> String {
    "market.spot = 1\nmarket.rate = 0.05\nmarket.sigma = 0.3\n\
     grid.dt = 0.25\ngrid.steps = 4\n\
     paths.count = 400\npaths.validation_count = 300\n\
     seed.train = 5\nseed.validation = 6\nseed.portfolio = 7\n\
     portfolio.calls = 60\nportfolio.puts = 40\nportfolio.moneyness_lo = 0.8\nportfolio.moneyness_hi = 1.2\n\
     portfolio.maturity_pmf = 0.25,0.25,0.25,0.25\nportfolio.long_prob = 0.8\n\
     compressor.calls = 4\ncompressor.puts = 4\ncompressor.alt_calls = 2\ncompressor.alt_puts = 2\n\
     train.epochs = 3\ntrain.batch_size = 100\n\
     scenario.1.label = calm\nscenario.1.mu = 0.07\nscenario.1.sigma_real = 0.1\n"
        .to_string()
}

pub fn small_config() -> ExperimentConfig {
    ExperimentConfig::parse(&small_config_text()).expect("small config parses")
}
