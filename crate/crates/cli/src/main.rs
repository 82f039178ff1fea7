mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Law;
use output::{Failure, Outcome, BUILD_ID};

/// Random walks and geodesic flow on Z^d-covers of hyperbolic surfaces.
#[derive(Parser)]
#[command(name = "covwalk", version = BUILD_ID)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit a lattice: presentation, fundamental domain, cusps, covers.
    Lattice {
        #[command(subcommand)]
        action: LatticeAction,
    },
    /// Random walk experiments.
    Walk {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Geodesic flow experiments.
    Geodesic {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Estimate the top Lyapunov exponent of the measure.
    Lyapunov {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        trajectories: Option<usize>,
        /// Run even if the measure looks degenerate.
        #[arg(long)]
        force: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a law to samples from a record CSV or a one-column file.
    Fit {
        law: Law,
        #[arg(long = "in")]
        input: PathBuf,
        /// Column to fit (default: drift1 for record files).
        #[arg(long)]
        column: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Return statistics for the walk described by a config.
    Recurrence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Collect every *.summary.json in a directory into report.txt and report.dat.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum LatticeAction {
    /// Check a preset (gamma2, punctured_square_torus) or a lattice file.
    Check {
        target: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum RunAction {
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn thread_pool() -> Outcome<()> {
    let Ok(raw) = std::env::var("COVWALK_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Failure::Input(format!("COVWALK_THREADS must be an integer >= 1, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn dispatch(cli: Cli) -> Outcome<()> {
    thread_pool()?;
    match cli.command {
        Command::Lattice { action: LatticeAction::Check { target, json } } => commands::lattice_check(&target, json),
        Command::Walk { action: RunAction::Run { config, out } } => commands::walk_run(&config, &out),
        Command::Geodesic { action: RunAction::Run { config, out } } => commands::geodesic_run(&config, &out),
        Command::Lyapunov { config, steps, trajectories, force, out } => {
            commands::lyapunov(&config, steps, trajectories, force, out.as_deref())
        }
        Command::Fit { law, input, column, out } => commands::fit(law, &input, column.as_deref(), out.as_deref()),
        Command::Recurrence { config, out } => commands::recurrence(&config, &out),
        Command::Report { dir } => commands::report(&dir),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
