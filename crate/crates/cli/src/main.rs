use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mplite_core::ehr::Task;
use mplite_core::fusion::Mode;
use mplite_core::pipeline::{
    cmd_eval, cmd_ingest, cmd_pretrain, cmd_report, cmd_synth, cmd_train, CliOverrides,
    ExperimentConfig,
};
use mplite_core::{log, Error};

/// Lab-result pretraining pipeline: generate or ingest an EHR dataset,
/// pretrain the lab module, train baseline and fused predictors, evaluate
/// and compare them.
///
/// Set MPLITE_LOG=error|info|debug to control stderr verbosity.
#[derive(Parser)]
#[command(name = "mplite", version, about, max_term_width = 100)]
struct Cli {
    /// Path to the experiment config JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override every seed in the config (synth, split, pretrain, runs).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the prediction task.
    #[arg(long, global = true, value_enum)]
    task: Option<TaskArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Dg,
    Hf,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Dg => Task::Dg,
            TaskArg::Hf => Task::Hf,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Baseline,
    Mplite,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Baseline => Mode::Baseline,
            ModeArg::Mplite => Mode::Mplite,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset declared in the config.
    Synth,
    /// Load the dataset CSVs, build cohorts and splits, write the manifest.
    Ingest,
    /// Train the lab module on the pretraining cohort and freeze it.
    Pretrain,
    /// Train downstream models, one per run seed.
    Train {
        /// Which model to train.
        #[arg(long, value_enum)]
        mode: ModeArg,
    },
    /// Evaluate saved checkpoints on the test split.
    Eval {
        /// Evaluate one mode only; both when omitted.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Print the paired baseline vs +MPLite comparison table.
    Report,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply_overrides(&CliOverrides {
        seed: cli.seed,
        out: cli.out.clone(),
        task: cli.task.map(Task::from),
    });
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Synth => {
            cmd_synth(&cfg)?;
        }
        Command::Ingest => {
            cmd_ingest(&cfg)?;
        }
        Command::Pretrain => {
            cmd_pretrain(&cfg)?;
        }
        Command::Train { mode } => {
            cmd_train(&cfg, (*mode).into())?;
        }
        Command::Eval { mode } => {
            cmd_eval(&cfg, mode.map(Mode::from))?;
        }
        Command::Report => {
            cmd_report(&cfg)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            log::error(err.to_string());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
