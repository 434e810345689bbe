use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use iclv_cli::{run_estimate, run_simulate, run_validate, run_weights, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "iclv", version, about = "Interdependent ICLV estimation and adoption simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Halton draws for the likelihood.
    #[arg(long, global = true)]
    draws: Option<usize>,
    /// Tie metric: gower or spatial.
    #[arg(long, global = true)]
    metric: Option<String>,
    /// Number of ties per individual.
    #[arg(long, global = true)]
    ties: Option<usize>,
    /// Add the independent-model (no spatial dependence) counterpart of every scenario.
    #[arg(long, global = true)]
    independent: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Estimate the model by composite marginal likelihood.
    Estimate,
    /// Forecast adoption over a scenario grid.
    Simulate,
    /// Build and write the social tie matrix.
    Weights,
    /// Check parameter, sample, population and scenario inputs.
    Validate,
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out,
        draws: cli.draws,
        metric: cli.metric,
        ties: cli.ties,
        independent: cli.independent,
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Estimate => {
            let run = run_estimate(&cfg)?;
            let r = &run.result;
            println!(
                "{} after {} iterations; CML log-likelihood {:.4}; CLIC {}",
                r.convergence,
                r.iterations,
                r.cml_loglik,
                r.clic().map_or("n/a".into(), |c| format!("{c:.4}"))
            );
            list(&run.files);
        }
        Command::Simulate => {
            let run = run_simulate(&cfg)?;
            for r in &run.results {
                let last = r.mean_city_share.last().copied().unwrap_or(0.0);
                let y50 = r.years_to(0.5).map_or("not reached".into(), |y| format!("{y:.2}"));
                println!("{}: final share {last:.4}, years to 50% {y50}", r.config.name);
            }
            list(&run.files);
        }
        Command::Weights => {
            let (w, files) = run_weights(&cfg)?;
            println!("{} individuals, {} ties", w.q(), w.nnz());
            list(&files);
        }
        Command::Validate => {
            let problems = run_validate(&cfg);
            if problems.is_empty() {
                println!("all inputs valid");
            } else {
                for p in &problems {
                    eprintln!("invalid {p}");
                }
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn list(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
