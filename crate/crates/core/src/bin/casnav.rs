use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use casnav::eval::{self, ExperimentConfig, Target};
use casnav::{Error, Result};

/// Multi-rate inertial pose estimation with cascade LSTM networks.
///
/// Exit codes: 0 success, 1 input or configuration error, 2 numerical
/// failure (non-finite loss or gradient).
#[derive(Debug, Parser)]
#[command(name = "casnav", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checkpoint file for `train`; checkpoint directory for `serve`,
    /// `replay` and `compare-baseline`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TargetArg {
    Orientation,
    Position,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic dataset, event streams and manifest.
    Simulate(#[command(flatten)] Common),
    /// Train one network and write its checkpoint and report.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        target: TargetArg,
    },
    /// Orientation MAE per rate ratio on the test split.
    EvalTable1(#[command(flatten)] Common),
    /// Position MAE per cascade unit for each initialization mode.
    EvalFig5(#[command(flatten)] Common),
    /// Position error over time: dead reckoning against the fusion loop.
    /// Trains both networks unless checkpoints are given.
    CompareBaseline(#[command(flatten)] Common),
    /// Stream NDJSON events from stdin (or TCP) to NDJSON poses on stdout.
    Serve {
        #[command(flatten)]
        common: Common,
        /// Accept TCP connections on this address instead of stdin.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Replay an NDJSON event file into <out>/poses.ndjson.
    Replay {
        #[command(flatten)]
        common: Common,
        /// Event file.
        #[arg(long)]
        input: PathBuf,
        /// Fine-rate truth CSV for error statistics.
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            let out = eval::cmd_simulate(&load_config(&c)?)?;
            for f in out.files {
                println!("{}", f.display());
            }
        }
        Command::Train { common, target } => {
            let cfg = load_config(&common)?;
            let target = match target {
                TargetArg::Orientation => Target::Orientation,
                TargetArg::Position => Target::Position,
            };
            let s = eval::cmd_train(&cfg, target, common.checkpoint.as_deref())?;
            println!("{}", s.checkpoint.display());
        }
        Command::EvalTable1(c) => print!("{}", eval::cmd_eval_table1(&load_config(&c)?)?.to_csv()),
        Command::EvalFig5(c) => print!("{}", eval::cmd_eval_fig5(&load_config(&c)?)?.to_csv()),
        Command::CompareBaseline(c) => {
            let cfg = load_config(&c)?;
            let have = c.checkpoint.is_some()
                || (cfg.models.orientation_checkpoint.is_some() && cfg.models.position_checkpoint.is_some());
            let models = if have {
                eval::load_models(&cfg, c.checkpoint.as_deref())?
            } else {
                let data = eval::simulate_data(&cfg, cfg.rates.orientation)?;
                let (o, _) = eval::fit_orientation(&cfg, &data)?;
                let (p, _) = eval::fit_position(&cfg, &data, cfg.position.gamma)?;
                casnav::fusion::FusionModels::new(o, p)
            };
            let cmp = eval::cmd_compare_baseline(&cfg, &models)?;
            if let Some(t) = cmp.terminal() {
                print_json(t)?;
            }
        }
        Command::Serve { common, listen } => {
            let cfg = load_config(&common)?;
            let models = eval::load_models(&cfg, common.checkpoint.as_deref())?;
            eval::cmd_serve(&cfg, &models, listen.as_deref())?;
        }
        Command::Replay { common, input, sidecar } => {
            let cfg = load_config(&common)?;
            let models = eval::load_models(&cfg, common.checkpoint.as_deref())?;
            print_json(&eval::cmd_replay(&cfg, &models, &input, sidecar.as_deref())?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
