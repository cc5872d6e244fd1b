use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gazelt::gaze::Split;
use gazelt::pipeline::{
    cmd_ablate_kd, cmd_evaluate, cmd_gradcheck, cmd_hva_gen, cmd_ingest, cmd_sweep_windows,
    cmd_synth, cmd_train_student, cmd_train_teacher, PipelineError, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "gazelt",
    version,
    about = "Gaze-guided distillation for long-tailed classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; absent fields take the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct WithData {
    #[command(flatten)]
    common: Common,
    /// Dataset directory holding manifest.json.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic long-tailed dataset with simulated gaze.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Use the small-model preset instead of the published defaults.
        #[arg(long)]
        desk: bool,
    },
    /// Validate a dataset and write the clamped fixation log.
    Ingest(WithData),
    /// Render time-windowed HVA maps for every gazed image.
    HvaGen(WithData),
    TrainTeacher {
        #[command(flatten)]
        data: WithData,
        /// Directory of stored HVA maps; built from gaze when absent.
        #[arg(long)]
        hva: Option<PathBuf>,
    },
    TrainStudent {
        #[command(flatten)]
        data: WithData,
        #[arg(long)]
        teacher: Option<PathBuf>,
    },
    Evaluate {
        #[command(flatten)]
        data: WithData,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "balanced_test")]
        split: Split,
    },
    /// Full pipeline for every window count of the sweep.
    SweepWindows(WithData),
    /// Distillation ablation across seeds with a Welch test on tail accuracy.
    AblateKd {
        #[command(flatten)]
        data: WithData,
        #[arg(long)]
        teacher: Option<PathBuf>,
    },
    /// Finite-difference checks of every loss.
    Gradcheck {
        #[command(flatten)]
        common: Common,
    },
}

fn config(common: &Common, fallback: RunConfig) -> Result<RunConfig, PipelineError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => fallback,
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<String, PipelineError> {
    let with = |d: &WithData| -> Result<(RunConfig, PathBuf, PathBuf), PipelineError> {
        Ok((
            config(&d.common, RunConfig::default())?,
            d.data.clone(),
            d.common.out.clone(),
        ))
    };
    match cli.command {
        Command::Synth { common, desk } => {
            let mut cfg = config(
                &common,
                if desk {
                    RunConfig::desk()
                } else {
                    RunConfig::default()
                },
            )?;
            if let Some(seed) = common.seed {
                cfg.synth.seed = seed;
            }
            cmd_synth(&cfg, &common.out)
        }
        Command::Ingest(d) => cmd_ingest(&d.data, &d.common.out),
        Command::HvaGen(d) => {
            let (cfg, data, out) = with(&d)?;
            cmd_hva_gen(&cfg, &data, &out)
        }
        Command::TrainTeacher { data, hva } => {
            let (cfg, dir, out) = with(&data)?;
            cmd_train_teacher(&cfg, &dir, hva.as_deref(), &out)
        }
        Command::TrainStudent { data, teacher } => {
            let (cfg, dir, out) = with(&data)?;
            cmd_train_student(&cfg, &dir, teacher.as_deref(), &out)
        }
        Command::Evaluate {
            data,
            checkpoint,
            split,
        } => {
            let (cfg, dir, out) = with(&data)?;
            cmd_evaluate(&cfg, &dir, &checkpoint, split, &out)
        }
        Command::SweepWindows(d) => {
            let (cfg, dir, out) = with(&d)?;
            cmd_sweep_windows(&cfg, &dir, &out)
        }
        Command::AblateKd { data, teacher } => {
            let (cfg, dir, out) = with(&data)?;
            cmd_ablate_kd(&cfg, &dir, teacher.as_deref(), &out)
        }
        Command::Gradcheck { common } => cmd_gradcheck(config(&common, RunConfig::default())?.seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
