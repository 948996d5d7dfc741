use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "market.spot = 1
market.rate = 0.05
market.sigma = 0.3
grid.dt = 0.25
grid.steps = 2
paths.count = 300
seed.train = 1
seed.validation = 2
seed.portfolio = 3
portfolio.calls = 30
portfolio.puts = 30
portfolio.moneyness_lo = 0.8
portfolio.moneyness_hi = 1.2
portfolio.maturity_pmf = 0.5,0.5
compressor.calls = 2
compressor.puts = 2
train.epochs = 2
train.batch_size = 100
";

fn pcompress(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcompress"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn setup(dir: &Path) -> String {
    let cfg = dir.join("small.cfg");
    fs::write(&cfg, SMALL).unwrap();
    cfg.to_str().unwrap().to_string()
}

#[test]
fn run_bench_and_capital() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path());
    let out = tmp.path().join("art");
    let o = pcompress(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("m4:"));

    let o = pcompress(&["bench", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let stored = fs::read_to_string(out.join("m4/benchmark_summary.csv")).unwrap();
    assert_eq!(text(&o.stdout), format!("# m4\n{stored}"));

    let trades = out.join("target_portfolio.csv");
    let o = pcompress(&["capital", trades.to_str().unwrap(), &cfg]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let stdout = text(&o.stdout);
    let ead = stdout.lines().find_map(|l| l.strip_prefix("ead,")).unwrap();
    let stored = fs::read_to_string(out.join("target/capital_report.csv")).unwrap();
    assert!(stored.lines().any(|l| l == format!("ead,{ead}")), "{stored}");

    let report = tmp.path().join("cap.csv");
    let o = pcompress(&[
        "capital",
        out.join("m4/compressed_trades.csv").to_str().unwrap(),
        &cfg,
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(
        fs::read(&report).unwrap(),
        fs::read(out.join("m4/capital_report.csv")).unwrap()
    );

    // a second run into the same directory is refused
    let o = pcompress(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("error in stage `setup`"));

    // an edited artifact fails verification
    fs::write(out.join("m4/pv_dist_0.5.csv"), "spot,target_pv,compressed_pv\n").unwrap();
    let o = pcompress(&["bench", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = text(&o.stderr);
    assert!(
        err.contains("error in stage `manifest`") && err.contains("m4/pv_dist_0.5.csv"),
        "{err}"
    );
}

#[test]
fn config_errors_name_stage_and_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, SMALL.replace("market.sigma = 0.3", "market.sigma = -1")).unwrap();
    let o = pcompress(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = text(&o.stderr);
    assert!(
        err.contains("error in stage `config`") && err.contains("market.sigma"),
        "{err}"
    );
    assert!(!tmp.path().join("x").exists());

    let o = pcompress(&["run", tmp.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("error in stage `config`"));
}

#[test]
fn capital_rejects_malformed_trades() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path());
    let trades = tmp.path().join("t.csv");
    fs::write(&trades, "strike,maturity,kind,direction,weight\n1.0,0.25,swap,long,1\n").unwrap();
    let o = pcompress(&["capital", trades.to_str().unwrap(), &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        text(&o.stderr).contains("error in stage `read-trades`"),
        "{}",
        text(&o.stderr)
    );
}

#[test]
fn usage_errors() {
    assert!(!pcompress(&[]).status.success());
    assert!(!pcompress(&["frobnicate"]).status.success());
    let o = pcompress(&["--help"]);
    assert!(o.status.success());
    for cmd in ["run", "capital", "bench"] {
        assert!(text(&o.stdout).contains(cmd));
    }
}
