//! End-to-end acceptance checks. Runs the full study once (plus a second
//! copy for the determinism check) and the capital presets, then prints one
//! PASS/FAIL line per criterion. Exits non-zero if any criterion fails.

mod common;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use common::{rel_err, workspace_path};
use portfolio_compression::compressor::{
    adam_step, fit_weights_ols, grad_strikes, loss, payoff_matrix, AdamParams, AdamState,
};
use portfolio_compression::config::ExperimentConfig;
use portfolio_compression::experiment::{capital_study, run_experiment, ExperimentOutcome, SizeOutcome};
use portfolio_compression::manifest::list_files;
use portfolio_compression::market_sim::simulate_paths;
use portfolio_compression::pricing::{bs_greeks, bs_price};
use portfolio_compression::risk_metrics::pfe;
use portfolio_compression::saccr::{addon_aggregate, pfe_multiplier, single_entity};
use portfolio_compression::{
    BenchmarkReport, Direction, HorizonGrid, MarketConfig, OptionKind, SaccrParams, VanillaTrade,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Verdict {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_file(workspace_path(&format!("configs/{name}"))).expect("shipped config parses")
}

fn size(out: &ExperimentOutcome, m: usize) -> &SizeOutcome {
    out.sizes
        .iter()
        .find(|s| s.nodes.total() == m)
        .expect("size present in study")
}

fn convergence(out: &ExperimentOutcome) -> Verdict {
    let s = size(out, 16);
    let mut pass = true;
    let mut detail = String::new();
    for tr in &s.traces {
        let at = |e: usize| tr.records.iter().find(|r| r.epoch == e).map(|r| r.mae);
        let (Some(m10), Some(m100)) = (at(10), at(100)) else {
            pass = false;
            detail.push_str("trace shorter than 100 epochs; ");
            continue;
        };
        let gap = (m10 - m100).abs() / m100;
        pass &= gap <= 0.10;
        let _ = write!(detail, "MAE(10)={m10:.4} MAE(100)={m100:.4} gap={:.1}%; ", 100.0 * gap);
    }
    Verdict {
        id: 1,
        title: "convergence within 10 epochs (gap <= 10%)",
        pass,
        detail,
    }
}

fn replication(out: &ExperimentOutcome) -> Verdict {
    let mut pass = true;
    let mut detail = String::new();
    for (m, tol) in [(16, 5e-3), (4, 5e-2)] {
        let worst = size(out, m)
            .risk_neutral
            .horizons
            .iter()
            .map(|h| h.rmse_over_m)
            .fold(0.0, f64::max);
        pass &= worst <= tol;
        let _ = write!(detail, "m={m}: max RMSE/M {worst:.3e} (tol {tol:e}); ");
    }
    Verdict {
        id: 2,
        title: "replication accuracy",
        pass,
        detail,
    }
}

fn worst_exposure(report: &BenchmarkReport) -> (f64, f64) {
    let m = report.target_size;
    report.horizons.iter().fold((0.0f64, 0.0f64), |(e, p), h| {
        (e.max(h.scaled_ee_err(m).abs()), p.max(h.scaled_pfe_err(m).abs()))
    })
}

fn exposure(out: &ExperimentOutcome) -> Verdict {
    let mut pass = true;
    let mut detail = String::new();
    for (m, pfe_tol, ee_tol) in [(16, 1e-3, 1e-6), (4, 1e-2, 1e-3)] {
        let s = size(out, m);
        let (ee, pf) = worst_exposure(&s.risk_neutral);
        pass &= ee <= ee_tol && pf <= pfe_tol;
        let _ = write!(
            detail,
            "m={m}: max |EE err|/M {ee:.2e} (tol {ee_tol:e}), max |PFE err|/M {pf:.2e} (tol {pfe_tol:e}); "
        );
    }
    Verdict {
        id: 3,
        title: "exposure-profile alignment",
        pass,
        detail,
    }
}

fn scenarios(out: &ExperimentOutcome) -> Verdict {
    let s = size(out, 16);
    let mut pass = s.scenarios.len() == 4;
    let mut detail = String::new();
    for r in &s.scenarios {
        let (ee, pf) = worst_exposure(r);
        pass &= ee <= 1e-4 && pf <= 5e-3;
        let _ = write!(detail, "{}: EE {ee:.2e} PFE {pf:.2e}; ", r.measure);
    }
    Verdict {
        id: 4,
        title: "real-world scenarios (EE <= 1e-4, PFE <= 5e-3)",
        pass,
        detail,
    }
}

fn greeks(out: &ExperimentOutcome) -> Verdict {
    let s = size(out, 16);
    let mut pass = true;
    let mut detail = String::new();
    for g in &s.greeks {
        let d = g.delta_rmse / g.delta_rms;
        let gm = g.gamma_rmse / g.gamma_rms;
        pass &= d <= 0.01 && gm <= 0.01;
        let _ = write!(detail, "t={}: delta {d:.1e} gamma {gm:.1e}", g.t);
        if (g.t - 0.75).abs() < 1e-12 {
            pass &= g.vega_sign_p > 0.01;
            let _ = write!(detail, " vega sign-test p={:.2e}", g.vega_sign_p);
        } else {
            pass &= g.vega_lower_atm > 0.9;
            let _ = write!(detail, " vega lower on {:.1}% of ATM paths", 100.0 * g.vega_lower_atm);
        }
        detail.push_str("; ");
    }
    pass &= s.greeks.len() == 3;
    Verdict {
        id: 5,
        title: "Greeks",
        pass,
        detail,
    }
}

const PRESETS: [&str; 4] = ["mixed", "calls", "puts", "longshort"];

fn capital_table1() -> Verdict {
    let rc_ref = [1022.0, 1181.0, 872.0, 523.0];
    let red_ref = [16.9, 24.1, 12.0, 19.7];
    let studies: Vec<_> = PRESETS
        .par_iter()
        .map(|p| capital_study(&load(&format!("capital_{p}.cfg"))).expect("capital study runs"))
        .collect();
    let mut pass = true;
    let mut detail = String::new();
    for (i, st) in studies.iter().enumerate() {
        let rc_ok = rel_err(st.target.rc, rc_ref[i]) <= 0.02;
        let red_ok = (st.reduction - red_ref[i]).abs() <= 3.0;
        pass &= rc_ok && red_ok;
        let _ = write!(
            detail,
            "{}: RC {:.0} [{}] vs {}, EAD {:.0} -> {:.0}, reduction {:.1}% [{}] vs {}; ",
            PRESETS[i],
            st.target.rc,
            if rc_ok { "ok" } else { "off" },
            rc_ref[i],
            st.target.ead,
            st.compressed.ead,
            st.reduction,
            if red_ok { "ok" } else { "off" },
            red_ref[i]
        );
    }
    Verdict {
        id: 6,
        title: "capital with staggered maturities",
        pass,
        detail,
    }
}

fn capital_table2() -> Verdict {
    let studies: Vec<_> = PRESETS
        .par_iter()
        .map(|p| capital_study(&load(&format!("capital_{p}_3m.cfg"))).expect("capital study runs"))
        .collect();
    let mut pass = true;
    let mut detail = String::new();
    for (p, st) in PRESETS.iter().zip(&studies) {
        let diff = rel_err(st.compressed.ead, st.target.ead);
        pass &= diff <= 0.005;
        let _ = write!(
            detail,
            "{p}: EAD {:.1} vs {:.1} ({:.2}%); ",
            st.target.ead,
            st.compressed.ead,
            100.0 * diff
        );
    }
    Verdict {
        id: 7,
        title: "capital with matched maturities (EAD diff <= 0.5%)",
        pass,
        detail,
    }
}

fn property_suites() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    let mut failures: Vec<String> = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };

    let mut parity = 0.0f64;
    for _ in 0..2000 {
        let (s, k, v, r, t) = (u(0.2, 3.0), u(0.0, 3.0), u(0.0, 1.0), u(-0.02, 0.1), u(0.0, 2.0));
        let c: f64 = bs_price(s, k, v, r, t, OptionKind::Call).unwrap();
        let p: f64 = bs_price(s, k, v, r, t, OptionKind::Put).unwrap();
        parity = parity.max((c - p - (s - k * (-r * t).exp())).abs());
    }
    check("put-call parity", parity <= 1e-12);

    let mut fd_worst = 0.0f64;
    for _ in 0..200 {
        let (k, v, t) = (u(0.9, 1.1), u(0.15, 0.5), u(0.1, 1.0));
        let kind = if u(0.0, 1.0) < 0.5 {
            OptionKind::Call
        } else {
            OptionKind::Put
        };
        let pr = |s: f64, vol: f64| -> f64 { bs_price(s, k, vol, 0.05, t, kind).unwrap() };
        let h = 1e-5;
        let g = bs_greeks(1.0f64, k, v, 0.05, t, kind).unwrap();
        let d = (pr(1.0 + h, v) - pr(1.0 - h, v)) / (2.0 * h);
        let gm = (pr(1.0 + h, v) - 2.0 * pr(1.0, v) + pr(1.0 - h, v)) / (h * h);
        let vg = (pr(1.0, v + h) - pr(1.0, v - h)) / (2.0 * h);
        fd_worst = fd_worst
            .max(rel_err(g.delta, d))
            .max(rel_err(g.gamma, gm))
            .max(rel_err(g.vega, vg));
    }
    check("Greeks vs finite differences", fd_worst <= 1e-5);

    let mut grad_worst = 0.0f64;
    let mut orth_worst = 0.0f64;
    for _ in 0..20 {
        let kinds = [OptionKind::Call, OptionKind::Call, OptionKind::Put, OptionKind::Put];
        let strikes: Vec<f64> = (0..4).map(|_| u(0.6, 1.4)).collect();
        let w: Vec<f64> = (0..4).map(|_| u(-3.0, 3.0)).collect();
        let spots: Vec<f64> = (0..80)
            .map(|_| u(0.4, 1.6))
            .filter(|s| strikes.iter().all(|k| (s - k).abs() > 1e-3))
            .collect();
        let y: Vec<f64> = spots.iter().map(|_| u(0.0, 0.8)).collect();
        let g = grad_strikes(&y, &spots, &strikes, &w, &kinds).unwrap();
        let l = |k: &[f64]| loss(&y, &payoff_matrix(&spots, k, &kinds).unwrap(), &w).unwrap();
        for i in 0..4 {
            let (mut a, mut b) = (strikes.clone(), strikes.clone());
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let fd = (l(&a) - l(&b)) / 2e-6;
            let scale = fd.abs().max(g[i].abs());
            if scale > 0.0 {
                grad_worst = grad_worst.max((g[i] - fd).abs() / scale);
            }
        }
        let x = payoff_matrix(&spots, &strikes, &kinds).unwrap();
        let fit = fit_weights_ols(&x, &y).unwrap();
        let r: Vec<f64> = y.iter().zip(x.mul_vec(&fit.weights)).map(|(a, b)| a - b).collect();
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (c, pruned) in x.tr_mul_vec(&r).iter().zip(&fit.pruned) {
            if !pruned {
                orth_worst = orth_worst.max(c.abs() / ynorm);
            }
        }
    }
    check("grad_strikes vs finite differences", grad_worst <= 1e-4);
    check("OLS residual orthogonality", orth_worst <= 1e-8);

    let xs: Vec<f64> = (0..5000).map(|_| u(-3.0, 7.0)).collect();
    let mut sorted = xs.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ranks_ok = [0.5, 0.9, 0.95, 0.99, 0.999]
        .iter()
        .all(|&q| pfe(&xs, q).unwrap() == sorted[(q * 5000.0f64).round() as usize - 1]);
    let hundred: Vec<f64> = (1..=100).map(f64::from).collect();
    check(
        "percentile order statistic",
        ranks_ok && pfe(&hundred, 0.99).unwrap() == 99.0,
    );

    let p = AdamParams::<f64>::default();
    let g = [0.7, -1.3, 4e-3];
    let k = [1.0, 0.8, 1.2];
    let (k1, _) = adam_step(&AdamState::new(3), &g, &p, &k);
    let adam_ok = (0..3).all(|i| (k1[i] - (k[i] - p.learning_rate * g[i] / (g[i].abs() + p.epsilon))).abs() <= 1e-12);
    check("Adam first step", adam_ok);

    let mk = MarketConfig::new(1.0, 0.05, 0.3).unwrap();
    let grid = HorizonGrid::new(0.25, 4).unwrap();
    let paths = simulate_paths(&mk, &grid, 20_000, 99, None).unwrap();
    let gbm_ok = (0..4).all(|i| {
        let t = grid.horizon(i);
        let d: Vec<f64> = paths.column(i).iter().map(|s| (-0.05 * t).exp() * s).collect();
        let n = d.len() as f64;
        let m = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m - 1.0).abs() <= 3.0 * (var / n).sqrt()
    });
    check("GBM discounted mean", gbm_ok);

    let mult_ok =
        pfe_multiplier(5.0f64, 0.0, 1.0).0 == 1.0 && (pfe_multiplier(-1e9f64, 0.0, 1.0).0 - 0.05).abs() < 1e-15;
    check("multiplier cap and floor", mult_ok);

    let trades: Vec<VanillaTrade> = (0..50)
        .map(|i| VanillaTrade {
            strike: 0.8 + 0.008 * i as f64,
            maturity: 0.25 * (1 + i % 4) as f64,
            kind: if i % 2 == 0 { OptionKind::Call } else { OptionKind::Put },
            direction: if i % 3 == 0 { Direction::Short } else { Direction::Long },
            weight: 1.0,
        })
        .collect();
    let aggs: Vec<f64> = [0.0, 0.5, 1.0]
        .iter()
        .map(|&rho| {
            let params = SaccrParams {
                entity_rho: vec![rho],
                ..Default::default()
            };
            addon_aggregate(&single_entity(&trades), 1.0, &params).unwrap().1
        })
        .collect();
    check(
        "single-entity rho independence",
        aggs[0] == aggs[1] && aggs[1] == aggs[2],
    );

    let detail = format!(
        "parity {parity:.1e}, Greeks FD {fd_worst:.1e}, gradient FD {grad_worst:.1e}, OLS orthogonality {orth_worst:.1e}{}",
        if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(", ")) }
    );
    Verdict {
        id: 8,
        title: "property suites",
        pass: failures.is_empty(),
        detail,
    }
}

fn snapshot(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = list_files(root).unwrap();
    files.push("manifest.txt".into());
    files
        .into_iter()
        .map(|rel| {
            let b = fs::read(root.join(&rel)).unwrap();
            (rel, b)
        })
        .collect()
}

fn determinism(cfg: &ExperimentConfig, first: &Path, scratch: &Path) -> Verdict {
    let second = scratch.join("second");
    run_experiment(cfg, &second).expect("second run succeeds");
    let (a, b) = (snapshot(first), snapshot(&second));
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let pass = a.len() == b.len() && differing.is_empty();
    Verdict {
        id: 9,
        title: "determinism (byte-identical reruns)",
        pass,
        detail: format!("{} files compared, {} differ {:?}", a.len(), differing.len(), differing),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let scratch = tempfile::tempdir().expect("temp dir");
    let cfg = load("paper.cfg");
    let first = scratch.path().join("first");
    let study = run_experiment(&cfg, &first).expect("study runs");
    println!("acceptance: study finished in {:.1}s", start.elapsed().as_secs_f64());

    let verdicts = vec![
        convergence(&study),
        replication(&study),
        exposure(&study),
        scenarios(&study),
        greeks(&study),
        capital_table1(),
        capital_table2(),
        property_suites(),
        determinism(&cfg, &first, scratch.path()),
    ];
    let mut failed = 0;
    for v in &verdicts {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {}: {} -- {}", v.id, v.title, v.detail);
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {} of {} criteria passed ({:.1}s)",
        verdicts.len() - failed,
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
