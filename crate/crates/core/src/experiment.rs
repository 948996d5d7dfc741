//! End-to-end driver: simulate, value, compress, benchmark, compute capital
//! and write every artifact plus a manifest.
//!
//! Layout of an artifact directory:
//!
//! ```text
//! config.cfg                     canonical config
//! manifest.txt
//! target_portfolio.csv
//! target/capital_report.csv
//! m16/compressed_<t>.csv, trace_<t>.csv, pv_dist_<t>.csv
//! m16/exposure_profiles.csv, benchmark_summary.csv
//! m16/greeks_<t>.csv, greeks_summary.csv      (all horizons but the last)
//! m16/scenarios/<label>/pv_dist_<t>.csv, exposure_profiles.csv
//! m16/compressed_trades.csv, capital_report.csv, capital_comparison.csv
//! ```
//!
//! Real-world scenarios reuse the risk-neutral compressors and share the
//! validation seed, so they differ from the risk-neutral run only through
//! drift and volatility.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::compressor::{
    compressed_greeks, train, value_compressed, value_compressed_paths, write_compressed_csv, write_trace_csv,
    TrainingProblem,
};
use crate::config::{ExperimentConfig, NodeCounts};
use crate::error::{invalid, Error, Result, StageExt};
use crate::io::{horizon_tag, write_text, CsvOut};
use crate::manifest::{self, Manifest};
use crate::market_sim::simulate_paths;
use crate::portfolio::{
    build_target_portfolio, portfolio_greeks_with, read_trades_csv, value_portfolio, write_trades_csv, Expiring,
    PathGreeks,
};
use crate::risk_metrics::{
    exposure_benchmark, greeks_benchmark, read_pv_dist_csv, write_exposure_csv, write_greeks_csv, write_pv_dist_csv,
    GreeksHorizonReport,
};
use crate::saccr::{compare_capital, compute_ead, single_entity, write_capital_csv};
use crate::{
    BenchmarkReport, CapitalReport, CompressedPortfolio, OptionKind, PathMatrix, ScenarioConfig, TargetPortfolio,
    TrainingTrace, VanillaTrade,
};

pub const RISK_NEUTRAL: &str = "risk_neutral";
pub const BENCH_SUMMARY_HEADER: [&str; 7] = [
    "measure",
    "t",
    "mae",
    "rmse",
    "rmse_over_m",
    "ee_err_over_m",
    "pfe_err_over_m",
];
pub const GREEKS_SUMMARY_HEADER: [&str; 10] = [
    "t",
    "delta_rmse",
    "delta_rms",
    "gamma_rmse",
    "gamma_rms",
    "vega_rmse",
    "vega_rms",
    "atm_paths",
    "vega_lower_atm",
    "vega_sign_p",
];

/// Results for one compressed size.
#[derive(Debug, Clone)]
pub struct SizeOutcome {
    pub nodes: NodeCounts,
    /// One compressor per horizon.
    pub compressed: Vec<CompressedPortfolio>,
    pub traces: Vec<TrainingTrace>,
    pub risk_neutral: BenchmarkReport,
    pub scenarios: Vec<BenchmarkReport>,
    pub greeks: Vec<GreeksHorizonReport<f64>>,
    pub capital: CapitalReport,
    pub ead_reduction: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub dir: PathBuf,
    pub target: TargetPortfolio,
    pub target_capital: CapitalReport,
    pub sizes: Vec<SizeOutcome>,
}

/// Splitmix64 finaliser over `base` mixed with two small indices.
fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Target PV at every grid horizon on the matching path column. Trades
/// maturing at a horizon pay their payoff there; after the last maturity
/// the book is worth zero.
pub fn target_values(target: &TargetPortfolio, paths: &PathMatrix, cfg: &ExperimentConfig) -> Result<Vec<Vec<f64>>> {
    (0..paths.grid().len())
        .map(|i| {
            let t = paths.grid().horizon(i);
            if t > target.max_maturity() + 1e-12 {
                return Ok(vec![0.0; paths.n_paths()]);
            }
            value_portfolio(target, &paths.column(i), t, &cfg.market)
        })
        .collect()
}

/// Compressed payoff at each horizon, one compressor per horizon.
pub fn compressed_values(
    compressed: &[CompressedPortfolio],
    paths: &PathMatrix,
    cfg: &ExperimentConfig,
) -> Result<Vec<Vec<f64>>> {
    compressed
        .iter()
        .enumerate()
        .map(|(i, c)| value_compressed_paths(c, &paths.column(i), c.horizon(), &cfg.market))
        .collect()
}

/// Trains one compressor per horizon. Horizons run in parallel; each has
/// its own batch-sampling seed, so results do not depend on scheduling.
pub fn train_horizons(
    cfg: &ExperimentConfig,
    nodes: NodeCounts,
    train_paths: &PathMatrix,
    train_values: &[Vec<f64>],
    validation: Option<(&PathMatrix, &[Vec<f64>])>,
    horizons: &[usize],
) -> Result<Vec<(CompressedPortfolio, TrainingTrace)>> {
    let grid = train_paths.grid();
    horizons
        .par_iter()
        .map(|&i| {
            let spots = train_paths.column(i);
            let vspots = validation.map(|(p, _)| p.column(i));
            let problem = TrainingProblem {
                spots: &spots,
                targets: &train_values[i],
                validation: vspots.as_deref().zip(validation.map(|(_, v)| v[i].as_slice())),
                n_calls: nodes.calls,
                n_puts: nodes.puts,
                initial_spot: cfg.market.spot,
                horizon: grid.horizon(i),
                tenor: grid.dt(),
            };
            let mut tc = cfg.training.clone();
            tc.seed = derive_seed(cfg.seeds.train, i as u64, nodes.total() as u64);
            train(&problem, &tc)
        })
        .collect()
}

/// SA-CCR report for a trade list; `Q` is its Black–Scholes value today.
pub fn capital_for_trades(trades: &[VanillaTrade], cfg: &ExperimentConfig) -> Result<CapitalReport> {
    let book = TargetPortfolio::new(trades.to_vec())?;
    let q = value_portfolio(&book, &[cfg.market.spot], 0.0, &cfg.market)?[0];
    compute_ead(q, &single_entity(trades), cfg.market.spot, &cfg.saccr)
}

/// Capital from a serialized trade file only.
pub fn capital_from_file(trades_csv: impl AsRef<Path>, cfg: &ExperimentConfig) -> Result<CapitalReport> {
    let trades = read_trades_csv(trades_csv).stage("read-trades")?;
    capital_for_trades(&trades, cfg).stage("capital")
}

/// Trade list of a compressor without pruned (zero-weight) nodes and
/// zero-strike puts, which are worthless.
pub fn compressed_trades(c: &CompressedPortfolio) -> Result<Vec<VanillaTrade>> {
    let trades: Vec<_> = c
        .to_trades()
        .into_iter()
        .filter(|t| t.weight != 0.0 && !(t.kind == OptionKind::Put && t.strike == 0.0))
        .collect();
    if trades.is_empty() {
        return invalid("compressed portfolio has no live options");
    }
    Ok(trades)
}

#[derive(Debug, Clone)]
pub struct CapitalStudy {
    pub target: CapitalReport,
    pub compressed: CapitalReport,
    pub reduction: f64,
    pub compressor: CompressedPortfolio,
}

/// Target and first-horizon compressed capital without benchmarking or
/// file output.
pub fn capital_study(cfg: &ExperimentConfig) -> Result<CapitalStudy> {
    let target = build_target_portfolio(&cfg.portfolio, &cfg.market, &cfg.grid).stage("portfolio")?;
    let paths = simulate_paths(&cfg.market, &cfg.grid, cfg.n_paths, cfg.seeds.train, None).stage("simulate")?;
    let values = vec![value_portfolio(&target, &paths.column(0), cfg.grid.horizon(0), &cfg.market).stage("valuation")?];
    let (compressor, _) = train_horizons(cfg, cfg.compressor, &paths, &values, None, &[0])
        .stage("training")?
        .remove(0);
    let t_cap = capital_for_trades(target.trades(), cfg).stage("capital")?;
    let c_cap = capital_for_trades(&compressed_trades(&compressor)?, cfg).stage("capital")?;
    let reduction = compare_capital(&t_cap, &c_cap).stage("capital")?;
    debug_assert!((value_compressed(&compressor, cfg.market.spot, 0.0, &cfg.market)? - c_cap.q).abs() < 1e-9);
    Ok(CapitalStudy {
        target: t_cap,
        compressed: c_cap,
        reduction,
        compressor,
    })
}

fn prepare_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        let mut rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        if rd.next().is_some() {
            return invalid(format!("output directory {} is not empty", dir.display()));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn summary_csv(reports: &[&BenchmarkReport]) -> String {
    let mut s = BENCH_SUMMARY_HEADER.join(",");
    s.push('\n');
    for r in reports {
        for h in &r.horizons {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.measure,
                h.t,
                h.mae,
                h.rmse,
                h.rmse_over_m,
                h.scaled_ee_err(r.target_size),
                h.scaled_pfe_err(r.target_size)
            );
        }
    }
    s
}

fn write_greeks_summary(path: &Path, reports: &[GreeksHorizonReport<f64>]) -> Result<()> {
    let mut out = CsvOut::create(path, &GREEKS_SUMMARY_HEADER)?;
    for g in reports {
        out.row([
            g.t.to_string(),
            g.delta_rmse.to_string(),
            g.delta_rms.to_string(),
            g.gamma_rmse.to_string(),
            g.gamma_rms.to_string(),
            g.vega_rmse.to_string(),
            g.vega_rms.to_string(),
            g.atm_paths.to_string(),
            g.vega_lower_atm.to_string(),
            g.vega_sign_p.to_string(),
        ])?;
    }
    out.finish()
}

struct ScenarioData {
    scenario: ScenarioConfig,
    paths: PathMatrix,
    target: Vec<Vec<f64>>,
}

/// Runs the whole pipeline into `out_dir`, which must be empty or absent.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<ExperimentOutcome> {
    let dir = out_dir.as_ref().to_path_buf();
    prepare_dir(&dir).stage("setup")?;
    write_text(dir.join("config.cfg"), &cfg.to_config_string()).stage("setup")?;
    let grid = &cfg.grid;
    let horizons = grid.horizons();
    let all: Vec<usize> = (0..grid.len()).collect();

    let train_paths = simulate_paths(&cfg.market, grid, cfg.n_paths, cfg.seeds.train, None).stage("simulate")?;
    let valid_paths =
        simulate_paths(&cfg.market, grid, cfg.n_validation_paths, cfg.seeds.validation, None).stage("simulate")?;

    let target = build_target_portfolio(&cfg.portfolio, &cfg.market, grid).stage("portfolio")?;
    let target_csv = dir.join("target_portfolio.csv");
    write_trades_csv(target.trades(), &target_csv).stage("write")?;

    let train_values = target_values(&target, &train_paths, cfg).stage("valuation")?;
    let valid_values = target_values(&target, &valid_paths, cfg).stage("valuation")?;
    let scenarios: Vec<ScenarioData> = cfg
        .scenarios
        .par_iter()
        .map(|s| {
            let paths = simulate_paths(&cfg.market, grid, cfg.n_validation_paths, cfg.seeds.validation, Some(s))?;
            let target = target_values(&target, &paths, cfg)?;
            Ok(ScenarioData {
                scenario: s.clone(),
                paths,
                target,
            })
        })
        .collect::<Result<_>>()
        .stage("scenario-valuation")?;

    // Greeks: the target just after settling trades that mature at t, against
    // the compressor hedging (t, t + dt] valued at its inception t.
    let greek_idx: Vec<usize> = (0..grid.len().saturating_sub(1)).collect();
    let target_greeks: Vec<PathGreeks<f64>> = greek_idx
        .iter()
        .map(|&i| {
            let t = horizons[i];
            let spots = valid_paths.column(i);
            if t > target.max_maturity() + 1e-12 {
                let z = vec![0.0; spots.len()];
                return Ok(PathGreeks {
                    delta: z.clone(),
                    gamma: z.clone(),
                    vega: z,
                });
            }
            portfolio_greeks_with(&target, &spots, t, &cfg.market, Expiring::Settled)
        })
        .collect::<Result<_>>()
        .stage("greeks")?;

    let target_capital = capital_from_file(&target_csv, cfg).stage("capital")?;
    write_capital_csv(dir.join("target").join("capital_report.csv"), &target_capital).stage("write")?;

    let mut sizes = Vec::new();
    for nodes in cfg.compressor_sizes() {
        let sdir = dir.join(nodes.tag());
        let trained = train_horizons(
            cfg,
            nodes,
            &train_paths,
            &train_values,
            Some((&valid_paths, &valid_values)),
            &all,
        )
        .stage("training")?;
        let (compressed, traces): (Vec<_>, Vec<_>) = trained.into_iter().unzip();
        for (c, tr) in compressed.iter().zip(&traces) {
            let tag = horizon_tag(c.horizon());
            write_compressed_csv(c, sdir.join(format!("compressed_{tag}.csv"))).stage("write")?;
            write_trace_csv(tr, nodes.total(), sdir.join(format!("trace_{tag}.csv"))).stage("write")?;
        }

        let comp_valid = compressed_values(&compressed, &valid_paths, cfg).stage("valuation")?;
        for (i, &t) in horizons.iter().enumerate() {
            write_pv_dist_csv(
                sdir.join(format!("pv_dist_{}.csv", horizon_tag(t))),
                &valid_paths.column(i),
                &valid_values[i],
                &comp_valid[i],
            )
            .stage("write")?;
        }
        let risk_neutral = exposure_benchmark(
            RISK_NEUTRAL,
            &horizons,
            &valid_values,
            &comp_valid,
            target.len(),
            cfg.bench,
        )
        .stage("benchmark")?;
        write_exposure_csv(sdir.join("exposure_profiles.csv"), &risk_neutral).stage("write")?;

        let scenario_runs: Vec<(Vec<Vec<f64>>, BenchmarkReport)> = scenarios
            .par_iter()
            .map(|sd| {
                let comp = compressed_values(&compressed, &sd.paths, cfg)?;
                let rep = exposure_benchmark(
                    &sd.scenario.label,
                    &horizons,
                    &sd.target,
                    &comp,
                    target.len(),
                    cfg.bench,
                )?;
                Ok((comp, rep))
            })
            .collect::<Result<_>>()
            .stage("scenario-benchmark")?;
        for (sd, (comp, rep)) in scenarios.iter().zip(&scenario_runs) {
            let scdir = sdir.join("scenarios").join(&sd.scenario.label);
            for (i, &t) in horizons.iter().enumerate() {
                write_pv_dist_csv(
                    scdir.join(format!("pv_dist_{}.csv", horizon_tag(t))),
                    &sd.paths.column(i),
                    &sd.target[i],
                    &comp[i],
                )
                .stage("write")?;
            }
            write_exposure_csv(scdir.join("exposure_profiles.csv"), rep).stage("write")?;
        }
        let scenario_reports: Vec<BenchmarkReport> = scenario_runs.into_iter().map(|(_, r)| r).collect();
        let mut all_reports = vec![&risk_neutral];
        all_reports.extend(scenario_reports.iter());
        write_text(sdir.join("benchmark_summary.csv"), &summary_csv(&all_reports)).stage("write")?;

        let mut greeks = Vec::new();
        for (&i, tg) in greek_idx.iter().zip(&target_greeks) {
            let t = horizons[i];
            let spots = valid_paths.column(i);
            let cg = compressed_greeks(&compressed[i + 1], &spots, t, &cfg.market).stage("greeks")?;
            write_greeks_csv(sdir.join(format!("greeks_{}.csv", horizon_tag(t))), &spots, tg, &cg).stage("write")?;
            greeks.push(greeks_benchmark(t, &spots, tg, &cg, cfg.market.spot, cfg.atm_band).stage("greeks")?);
        }
        if !greeks.is_empty() {
            write_greeks_summary(&sdir.join("greeks_summary.csv"), &greeks).stage("write")?;
        }

        let trades_csv = sdir.join("compressed_trades.csv");
        write_trades_csv(&compressed_trades(&compressed[0]).stage("capital")?, &trades_csv).stage("write")?;
        let capital = capital_from_file(&trades_csv, cfg).stage("capital")?;
        write_capital_csv(sdir.join("capital_report.csv"), &capital).stage("write")?;
        let ead_reduction = compare_capital(&target_capital, &capital).stage("capital")?;
        let mut out = CsvOut::create(
            sdir.join("capital_comparison.csv"),
            &["ead_target", "ead_compressed", "reduction_pct"],
        )
        .stage("write")?;
        out.row([target_capital.ead, capital.ead, ead_reduction].map(|v| v.to_string()))
            .stage("write")?;
        out.finish().stage("write")?;

        sizes.push(SizeOutcome {
            nodes,
            compressed,
            traces,
            risk_neutral,
            scenarios: scenario_reports,
            greeks,
            capital,
            ead_reduction,
        });
    }

    Manifest::build(&dir, cfg)
        .and_then(|m| m.write(&dir))
        .stage("manifest")?;

    Ok(ExperimentOutcome {
        dir,
        target,
        target_capital,
        sizes,
    })
}

/// Benchmark statistics recomputed from the stored `pv_dist` files.
#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub config: ExperimentConfig,
    /// `(size tag, reports)`; risk-neutral first, then scenarios in config order.
    pub sizes: Vec<(String, Vec<BenchmarkReport>)>,
}

fn bench_measure(
    dir: &Path,
    measure: &str,
    horizons: &[f64],
    cfg: &ExperimentConfig,
    target_size: usize,
) -> Result<BenchmarkReport> {
    let mut target = Vec::new();
    let mut comp = Vec::new();
    for &t in horizons {
        let (_, v, p) = read_pv_dist_csv(dir.join(format!("pv_dist_{}.csv", horizon_tag(t))))?;
        target.push(v);
        comp.push(p);
    }
    exposure_benchmark(measure, horizons, &target, &comp, target_size, cfg.bench)
}

/// Recomputes the benchmark tables of an artifact directory. Fails in stage
/// `manifest` if any file differs from its recorded hash.
pub fn bench(artifacts: impl AsRef<Path>) -> Result<BenchOutcome> {
    let dir = artifacts.as_ref();
    let v = manifest::verify(dir).stage("manifest")?;
    if !v.is_ok() {
        return Err(Error::InvalidArgument(format!(
            "manifest mismatch: changed {:?}, missing {:?}, unlisted {:?}",
            v.mismatched, v.missing, v.unlisted
        )))
        .stage("manifest");
    }
    let config = ExperimentConfig::from_file(dir.join("config.cfg")).stage("config")?;
    let target_size = read_trades_csv(dir.join("target_portfolio.csv"))
        .stage("read-trades")?
        .len();
    let horizons = config.grid.horizons();
    let mut sizes = Vec::new();
    for nodes in config.compressor_sizes() {
        let sdir = dir.join(nodes.tag());
        let mut reports = vec![bench_measure(&sdir, RISK_NEUTRAL, &horizons, &config, target_size).stage("benchmark")?];
        for s in &config.scenarios {
            let scdir = sdir.join("scenarios").join(&s.label);
            reports.push(bench_measure(&scdir, &s.label, &horizons, &config, target_size).stage("benchmark")?);
        }
        sizes.push((nodes.tag(), reports));
    }
    Ok(BenchOutcome { config, sizes })
}
