//! Flat `key = value` experiment configuration with dotted key paths.
//!
//! Blank lines and `#` comments are ignored. Unknown or repeated keys are
//! rejected, and every error names the offending key. Scenarios are listed
//! as `scenario.<n>.label`, `scenario.<n>.mu`, `scenario.<n>.sigma_real`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::compressor::{AdamParams, RefitScope};
use crate::error::{Error, Result};
use crate::risk_metrics::{AtmBand, BenchmarkOptions, ExposureFloor};
use crate::{HorizonGrid, MarketConfig, PortfolioSpec, SaccrParams, ScenarioConfig, TrainingConfig};

/// Number of call and put nodes in a compressed book.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeCounts {
    pub calls: usize,
    pub puts: usize,
}

impl NodeCounts {
    pub fn total(&self) -> usize {
        self.calls + self.puts
    }

    /// Directory tag such as `m16`.
    pub fn tag(&self) -> String {
        format!("m{}", self.total())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub train: u64,
    pub validation: u64,
    pub portfolio: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub market: MarketConfig,
    pub grid: HorizonGrid,
    pub n_paths: usize,
    pub n_validation_paths: usize,
    pub seeds: Seeds,
    pub portfolio: PortfolioSpec,
    pub compressor: NodeCounts,
    /// Optional second compressed size, e.g. the four-option study.
    pub compressor_alt: Option<NodeCounts>,
    pub training: TrainingConfig,
    pub scenarios: Vec<ScenarioConfig>,
    pub saccr: SaccrParams,
    pub bench: BenchmarkOptions,
    pub atm_band: AtmBand,
    pub output_dir: PathBuf,
}

struct Entries {
    map: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", n + 1), "expected `key = value`"))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::config(format!("line {}", n + 1), "empty key"));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::config(k, "key given more than once"));
            }
        }
        Ok(Self {
            map,
            used: BTreeSet::new(),
        })
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::config(key, format!("cannot parse `{v}`"))),
        }
    }

    fn req<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::config(key, "required key is missing"))
    }

    fn or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn check_unknown(&self) -> Result<()> {
        for k in self.map.keys() {
            if !self.used.contains(k) {
                return Err(Error::config(k, "unknown key"));
            }
        }
        Ok(())
    }
}

fn check(key: &str, ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(key, msg))
    }
}

/// Re-labels a nested validation error with a config section.
fn within<T>(key: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidArgument(msg) => Error::config(key, msg),
        other => other,
    })
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut e = Entries::parse(text)?;

        let spot: f64 = e.req("market.spot")?;
        check("market.spot", spot > 0.0 && spot.is_finite(), "must be positive")?;
        let rate: f64 = e.req("market.rate")?;
        check("market.rate", rate.is_finite(), "must be finite")?;
        let sigma: f64 = e.req("market.sigma")?;
        check(
            "market.sigma",
            sigma >= 0.0 && sigma.is_finite(),
            "must be non-negative",
        )?;
        let market = within("market", MarketConfig::new(spot, rate, sigma))?;

        let dt: f64 = e.req("grid.dt")?;
        check("grid.dt", dt > 0.0 && dt.is_finite(), "must be positive")?;
        let steps: usize = e.req("grid.steps")?;
        check("grid.steps", steps >= 1, "must be at least 1")?;
        let grid = within("grid", HorizonGrid::new(dt, steps))?;

        let n_paths: usize = e.req("paths.count")?;
        check("paths.count", n_paths >= 1, "must be at least 1")?;
        let n_validation_paths: usize = e.or("paths.validation_count", n_paths)?;
        check("paths.validation_count", n_validation_paths >= 1, "must be at least 1")?;

        let seeds = Seeds {
            train: e.req("seed.train")?,
            validation: e.req("seed.validation")?,
            portfolio: e.req("seed.portfolio")?,
        };
        check(
            "seed.validation",
            seeds.train != seeds.validation,
            "must differ from seed.train",
        )?;

        let pmf_text: String = e.req("portfolio.maturity_pmf")?;
        let maturity_pmf = pmf_text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::config("portfolio.maturity_pmf", format!("cannot parse `{pmf_text}`")))?;
        check(
            "portfolio.maturity_pmf",
            maturity_pmf.len() == steps,
            "needs one probability per grid horizon",
        )?;
        let portfolio = PortfolioSpec {
            n_calls: e.req("portfolio.calls")?,
            n_puts: e.req("portfolio.puts")?,
            moneyness_lo: e.req("portfolio.moneyness_lo")?,
            moneyness_hi: e.req("portfolio.moneyness_hi")?,
            maturity_pmf,
            long_prob: e.or("portfolio.long_prob", 1.0)?,
            seed: seeds.portfolio,
        };
        within("portfolio", portfolio.validate(&grid))?;

        let compressor = NodeCounts {
            calls: e.req("compressor.calls")?,
            puts: e.req("compressor.puts")?,
        };
        check("compressor", compressor.total() >= 1, "needs at least one node")?;
        let alt_calls: Option<usize> = e.get("compressor.alt_calls")?;
        let alt_puts: Option<usize> = e.get("compressor.alt_puts")?;
        let compressor_alt = match (alt_calls, alt_puts) {
            (None, None) => None,
            (Some(calls), Some(puts)) => {
                let n = NodeCounts { calls, puts };
                check("compressor.alt_calls", n.total() >= 1, "needs at least one node")?;
                check(
                    "compressor.alt_calls",
                    n.total() != compressor.total(),
                    "must differ in size from the primary compressor",
                )?;
                Some(n)
            }
            _ => {
                return Err(Error::config(
                    "compressor.alt_calls",
                    "alt_calls and alt_puts go together",
                ))
            }
        };

        let defaults = TrainingConfig::default();
        let refit = match e.or("train.refit", "batch".to_string())?.as_str() {
            "batch" => RefitScope::Batch,
            "full" => RefitScope::Full,
            other => {
                return Err(Error::config(
                    "train.refit",
                    format!("expected `batch` or `full`, got `{other}`"),
                ))
            }
        };
        let training = TrainingConfig {
            epochs: e.req("train.epochs")?,
            batch_size: e.or("train.batch_size", defaults.batch_size)?,
            adam: AdamParams {
                learning_rate: e.or("train.learning_rate", defaults.adam.learning_rate)?,
                beta1: e.or("train.beta1", defaults.adam.beta1)?,
                beta2: e.or("train.beta2", defaults.adam.beta2)?,
                epsilon: e.or("train.epsilon", defaults.adam.epsilon)?,
            },
            stop_tol: e.or("train.stop_tol", defaults.stop_tol)?,
            stop_patience: e.or("train.stop_patience", defaults.stop_patience)?,
            early_stop: e.or("train.early_stop", defaults.early_stop)?,
            refit,
            seed: seeds.train,
        };
        within("train", training.validate())?;
        check(
            "train.batch_size",
            training.batch_size <= n_paths,
            "must not exceed paths.count",
        )?;
        check(
            "compressor",
            n_paths >= compressor.total().max(compressor_alt.map_or(0, |c| c.total())),
            "more nodes than training paths",
        )?;

        let mut scenario_ids: BTreeSet<u32> = BTreeSet::new();
        for k in e.map.keys() {
            if let Some(rest) = k.strip_prefix("scenario.") {
                let (id, field) = rest
                    .split_once('.')
                    .ok_or_else(|| Error::config(k, "expected scenario.<n>.<field>"))?;
                let id: u32 = id
                    .parse()
                    .map_err(|_| Error::config(k, "scenario index must be an integer"))?;
                if !matches!(field, "label" | "mu" | "sigma_real") {
                    return Err(Error::config(k, "unknown key"));
                }
                scenario_ids.insert(id);
            }
        }
        let mut scenarios = Vec::new();
        for id in scenario_ids {
            let p = format!("scenario.{id}");
            let s = ScenarioConfig {
                label: e.or(&format!("{p}.label"), format!("scenario{id}"))?,
                mu: e.req(&format!("{p}.mu"))?,
                sigma_real: e.req(&format!("{p}.sigma_real"))?,
            };
            check(&format!("{p}.sigma_real"), s.sigma_real >= 0.0, "must be non-negative")?;
            check(
                &format!("{p}.label"),
                !s.label.is_empty()
                    && s.label
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'),
                "labels are used as directory names: use [A-Za-z0-9_-]",
            )?;
            scenarios.push(s);
        }

        let sd = SaccrParams::default();
        let saccr = SaccrParams {
            alpha: e.or("saccr.alpha", sd.alpha)?,
            sigma_sup: e.or("saccr.sigma_sup", sd.sigma_sup)?,
            supervisory_factor: e.or("saccr.sf", sd.supervisory_factor)?,
            collateral: e.or("saccr.collateral", sd.collateral)?,
            entity_rho: vec![e.or("saccr.rho", sd.entity_rho[0])?],
        };
        within("saccr", saccr.validate())?;

        let bench = BenchmarkOptions {
            quantile: e.or("bench.quantile", 0.99)?,
            floor: if e.or("bench.floor", false)? {
                ExposureFloor::Zero
            } else {
                ExposureFloor::None
            },
        };
        check(
            "bench.quantile",
            bench.quantile > 0.0 && bench.quantile < 1.0,
            "must lie in (0, 1)",
        )?;
        let atm_band = AtmBand {
            lo: e.or("bench.atm_lo", 0.9)?,
            hi: e.or("bench.atm_hi", 1.1)?,
        };
        check("bench.atm_lo", atm_band.lo < atm_band.hi, "must be below bench.atm_hi")?;

        let output_dir = PathBuf::from(e.or("output.dir", "artifacts".to_string())?);

        e.check_unknown()?;

        Ok(Self {
            market,
            grid,
            n_paths,
            n_validation_paths,
            seeds,
            portfolio,
            compressor,
            compressor_alt,
            training,
            scenarios,
            saccr,
            bench,
            atm_band,
            output_dir,
        })
    }

    /// Canonical text form with every key spelled out.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("market.spot", self.market.spot.to_string());
        kv("market.rate", self.market.rate.to_string());
        kv("market.sigma", self.market.vol.to_string());
        kv("grid.dt", self.grid.dt().to_string());
        kv("grid.steps", self.grid.len().to_string());
        kv("paths.count", self.n_paths.to_string());
        kv("paths.validation_count", self.n_validation_paths.to_string());
        kv("seed.train", self.seeds.train.to_string());
        kv("seed.validation", self.seeds.validation.to_string());
        kv("seed.portfolio", self.seeds.portfolio.to_string());
        kv("portfolio.calls", self.portfolio.n_calls.to_string());
        kv("portfolio.puts", self.portfolio.n_puts.to_string());
        kv("portfolio.moneyness_lo", self.portfolio.moneyness_lo.to_string());
        kv("portfolio.moneyness_hi", self.portfolio.moneyness_hi.to_string());
        kv(
            "portfolio.maturity_pmf",
            self.portfolio
                .maturity_pmf
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("portfolio.long_prob", self.portfolio.long_prob.to_string());
        kv("compressor.calls", self.compressor.calls.to_string());
        kv("compressor.puts", self.compressor.puts.to_string());
        if let Some(alt) = self.compressor_alt {
            kv("compressor.alt_calls", alt.calls.to_string());
            kv("compressor.alt_puts", alt.puts.to_string());
        }
        let t = &self.training;
        kv("train.epochs", t.epochs.to_string());
        kv("train.batch_size", t.batch_size.to_string());
        kv("train.learning_rate", t.adam.learning_rate.to_string());
        kv("train.beta1", t.adam.beta1.to_string());
        kv("train.beta2", t.adam.beta2.to_string());
        kv("train.epsilon", t.adam.epsilon.to_string());
        kv("train.stop_tol", t.stop_tol.to_string());
        kv("train.stop_patience", t.stop_patience.to_string());
        kv("train.early_stop", t.early_stop.to_string());
        kv(
            "train.refit",
            match t.refit {
                RefitScope::Batch => "batch",
                RefitScope::Full => "full",
            }
            .to_string(),
        );
        for (i, sc) in self.scenarios.iter().enumerate() {
            kv(&format!("scenario.{}.label", i + 1), sc.label.clone());
            kv(&format!("scenario.{}.mu", i + 1), sc.mu.to_string());
            kv(&format!("scenario.{}.sigma_real", i + 1), sc.sigma_real.to_string());
        }
        kv("saccr.alpha", self.saccr.alpha.to_string());
        kv("saccr.sigma_sup", self.saccr.sigma_sup.to_string());
        kv("saccr.sf", self.saccr.supervisory_factor.to_string());
        kv("saccr.collateral", self.saccr.collateral.to_string());
        kv("saccr.rho", self.saccr.entity_rho[0].to_string());
        kv("bench.quantile", self.bench.quantile.to_string());
        kv("bench.floor", (self.bench.floor == ExposureFloor::Zero).to_string());
        kv("bench.atm_lo", self.atm_band.lo.to_string());
        kv("bench.atm_hi", self.atm_band.hi.to_string());
        kv("output.dir", self.output_dir.display().to_string());
        s
    }

    /// SHA-256 of the canonical text form.
    pub fn hash(&self) -> String {
        hex_digest(self.to_config_string().as_bytes())
    }

    /// Every compressed size to train: the primary one, then the optional
    /// alternative.
    pub fn compressor_sizes(&self) -> Vec<NodeCounts> {
        std::iter::once(self.compressor).chain(self.compressor_alt).collect()
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
