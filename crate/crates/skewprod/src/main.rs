//! `skewprod` — simulate and analyze random compositions of two interval
//! maps. Each subcommand mirrors one experiment; all take a config file and
//! write a `report.json` manifest plus CSV tables into the out directory.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use skewprod::cli_io::{self, ConfigError};

#[derive(Parser)]
#[command(
    name = "skewprod",
    version,
    about = "Random compositions of interval diffeomorphisms: orbits, measures, regimes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory from the config.
    #[arg(long)]
    outdir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Boundary exponents and regime classification.
    Classify(RunArgs),
    /// Sufficient-condition test for minimality of the function system.
    Minimality(RunArgs),
    /// Krylov-Bogolyubov averaging toward a stationary measure.
    Stationary(RunArgs),
    /// Per-cell basin fractions over cylinder x subinterval cells.
    #[command(name = "basin-scan")]
    BasinScan(RunArgs),
    /// Basin-separating graph estimates with equivariance residuals.
    Graph(RunArgs),
    /// Fiber distance decay between two initial points.
    Sync(RunArgs),
    /// Occupation fraction of the neutral-boundary neighborhood.
    Onoff(RunArgs),
    /// Laminar/burst run-length statistics at a logit threshold.
    Excursions(RunArgs),
    /// Scaled-tail distribution against the half-normal law.
    Clt(RunArgs),
    /// Pullback versus forward convergence contrast.
    Pullback(RunArgs),
    /// Fraction of orbits reaching the attracting boundary.
    Drift(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Classify(_) => "classify",
            Command::Minimality(_) => "minimality",
            Command::Stationary(_) => "stationary",
            Command::BasinScan(_) => "basin-scan",
            Command::Graph(_) => "graph",
            Command::Sync(_) => "sync",
            Command::Onoff(_) => "onoff",
            Command::Excursions(_) => "excursions",
            Command::Clt(_) => "clt",
            Command::Pullback(_) => "pullback",
            Command::Drift(_) => "drift",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Classify(a)
            | Command::Minimality(a)
            | Command::Stationary(a)
            | Command::BasinScan(a)
            | Command::Graph(a)
            | Command::Sync(a)
            | Command::Onoff(a)
            | Command::Excursions(a)
            | Command::Clt(a)
            | Command::Pullback(a)
            | Command::Drift(a) => a,
        }
    }
}

fn execute(command: &Command) -> Result<(), ConfigError> {
    // Worker-count hint; results are identical for any value.
    if let Ok(workers) = std::env::var("SKEWPROD_WORKERS") {
        if let Ok(n) = workers.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let args = command.args();
    let text = std::fs::read_to_string(&args.config)?;
    let mut config = cli_io::parse_config(&text)?;
    if config.experiment.name() != command.name() {
        return Err(ConfigError::ExperimentMismatch {
            config: config.experiment.name().to_string(),
            requested: command.name().to_string(),
        });
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(outdir) = &args.outdir {
        config.outdir = outdir.clone();
    }
    let out = cli_io::run(&config)?;
    println!(
        "regime {} (L0 = {:.6}, L1 = {:.6})",
        out.regime.regime.label(),
        out.regime.l0,
        out.regime.l1
    );
    println!("wrote {}", out.report_path.display());
    for path in &out.csv_paths {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = match &err {
                ConfigError::Parse { .. } => "parse",
                ConfigError::MissingKey { .. } => "missing_key",
                ConfigError::Validation(_) => "validation",
                ConfigError::RegimeMismatch { .. } => "regime_mismatch",
                ConfigError::ExperimentMismatch { .. } => "experiment_mismatch",
                ConfigError::Io(_) => "io",
            };
            let record = serde_json::json!({ "error": kind, "message": err.to_string() });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
