use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use portfolio_compression::config::ExperimentConfig;
use portfolio_compression::experiment::{bench, capital_from_file, run_experiment, summary_csv};
use portfolio_compression::saccr::write_capital_csv;
use portfolio_compression::Error;

#[derive(Parser)]
#[command(
    name = "pcompress",
    version,
    about = "Neural-network compression of European option books"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write an artifact directory.
    Run {
        config: PathBuf,
        /// Output directory; defaults to `output.dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SA-CCR capital for a trade file.
    Capital {
        trades: PathBuf,
        config: PathBuf,
        /// Write the full capital report here instead of printing the summary.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute benchmark statistics from stored valuations.
    Bench { artifacts: PathBuf },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::from_file(path).map_err(|e| Error::Stage {
        stage: "config",
        source: Box::new(e),
    })
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let outcome = run_experiment(&cfg, &dir)?;
            println!("artifacts: {}", outcome.dir.display());
            println!(
                "target EAD {} (RC {})",
                outcome.target_capital.ead, outcome.target_capital.rc
            );
            for s in &outcome.sizes {
                let worst = s
                    .risk_neutral
                    .horizons
                    .iter()
                    .map(|h| h.rmse_over_m)
                    .fold(0.0_f64, f64::max);
                println!(
                    "{}: max RMSE/M {worst:e}, EAD {} (RC {}), reduction {:.2}%",
                    s.nodes.tag(),
                    s.capital.ead,
                    s.capital.rc,
                    s.ead_reduction
                );
            }
        }
        Command::Capital { trades, config, out } => {
            let cfg = load(&config)?;
            let report = capital_from_file(&trades, &cfg)?;
            match out {
                Some(path) => write_capital_csv(&path, &report).map_err(|e| Error::Stage {
                    stage: "write",
                    source: Box::new(e),
                })?,
                None => {
                    println!("q,{}", report.q);
                    println!("rc,{}", report.rc);
                    println!("multiplier,{}", report.multiplier);
                    println!("addon_aggregate,{}", report.addon_aggregate);
                    println!("pfe,{}", report.pfe_addon);
                    println!("ead,{}", report.ead);
                }
            }
        }
        Command::Bench { artifacts } => {
            let outcome = bench(&artifacts)?;
            for (tag, reports) in &outcome.sizes {
                println!("# {tag}");
                print!("{}", summary_csv(&reports.iter().collect::<Vec<_>>()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let stage = e.stage().unwrap_or("unknown");
            eprintln!("error in stage `{stage}`: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(2)
        }
    }
}
