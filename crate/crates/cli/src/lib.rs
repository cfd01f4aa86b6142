//! File-based front end: simulate scenarios, train the three networks, run
//! the six algorithms and evaluate them.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod records;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use climbloc::Algorithm;

use config::AppConfig;
use error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "climbloc",
    version,
    about = "Climbing-robot localization: simulate, train, run, evaluate"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario into a directory of JSONL streams.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override `sim.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the uwb, baro or fusion network.
    Train {
        #[arg(long)]
        model: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Directory holding uwb.json and baro.json (fusion only; defaults to the output's directory).
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run one algorithm over a scenario and write its trajectory.
    Run {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        algo: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Metrics, CDF and boxplot CSVs for trajectories against truth.
    Eval {
        #[arg(long = "est", required = true, num_args = 1..)]
        est: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Like `eval`, plus the hardware reference row and a printed table.
    Report {
        #[arg(long = "est", required = true, num_args = 1..)]
        est: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Simulate, train, run all six algorithms and report in one go.
    Pipeline {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn execute(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Simulate { config, out, seed } => {
            let cfg = AppConfig::load(config.as_deref())?;
            commands::cmd_simulate(&cfg, seed, &out)?;
            println!("wrote scenario to {}", out.display());
        }
        Command::Train {
            model,
            data,
            out,
            seed,
            epochs,
            models,
            config,
        } => {
            let cfg = AppConfig::load(config.as_deref())?;
            let kind = model.parse()?;
            commands::cmd_train(&cfg, kind, &data, &out, models.as_deref(), seed, epochs)?;
            println!(
                "wrote {} and {}",
                out.display(),
                commands::loss_path(&out).display()
            );
        }
        Command::Run {
            data,
            models,
            algo,
            out,
            config,
        } => {
            let cfg = AppConfig::load(config.as_deref())?;
            let algo: Algorithm = algo.parse()?;
            let n = commands::cmd_run(&cfg, &data, &models, algo, &out)?;
            println!("wrote {n} epochs of {algo} to {}", out.display());
        }
        Command::Eval {
            est,
            truth,
            out,
            config,
        } => {
            let cfg = AppConfig::load(config.as_deref())?;
            commands::cmd_eval(&cfg, &est, &truth, &out, false)?;
            println!("wrote metrics to {}", out.display());
        }
        Command::Report {
            est,
            truth,
            out,
            config,
        } => {
            let cfg = AppConfig::load(config.as_deref())?;
            let e = commands::cmd_eval(&cfg, &est, &truth, &out, true)?;
            print!("{}", commands::comparison_table(&e.rows));
        }
        Command::Pipeline { config, out } => {
            let cfg = AppConfig::load(config.as_deref())?;
            let (_, e) = commands::cmd_pipeline(&cfg, &out)?;
            print!("{}", commands::comparison_table(&e.rows));
            println!("manifest: {}", out.join("manifest.json").display());
        }
    }
    Ok(())
}
