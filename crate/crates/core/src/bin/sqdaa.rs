use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use sqdaa_core::experiment::{run_experiment, ExperimentConfig, Mode};

#[derive(Parser)]
#[command(name = "sqdaa", version, about = "SQD and SQD-AA simulations, model curves and T-count reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plain SQD restarts.
    RunSqd(Common),
    /// SQD-AA restarts.
    RunSqdaa(Common),
    /// Analytic query-complexity curves.
    ModelDist(Common),
    /// T-count reports for SQD, SQD-AA and both iQPE variants.
    Resources(Common),
    /// Adiabatic state preparation sweep.
    AspPrepare(Common),
    /// SQD against SQD-AA over seeded restarts.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Seed base; restart i uses seed + i.
    #[arg(short, long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(short, long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (mode, args) = match cli.command {
        Command::RunSqd(a) => (Mode::RunSqd, a),
        Command::RunSqdaa(a) => (Mode::RunSqdaa, a),
        Command::ModelDist(a) => (Mode::ModelDist, a),
        Command::Resources(a) => (Mode::Resources, a),
        Command::AspPrepare(a) => (Mode::AspPrepare, a),
        Command::Compare(a) => (Mode::Compare, a),
    };
    let mut cfg = ExperimentConfig::load(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    cfg.mode = mode;
    if let Some(s) = args.seed {
        cfg.seed_base = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(o) = args.output {
        cfg.output = o;
    }
    for p in run_experiment(&cfg)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<sqdaa_core::Error>().map_or(1, |e| e.exit_code());
            ExitCode::from(code as u8)
        }
    }
}
