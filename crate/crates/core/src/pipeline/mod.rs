//! Run configuration, persistence and the end-to-end experiment drivers.

mod checkpoint;
mod commands;
mod config;
mod data;
mod experiment;
mod gradchecks;

use std::path::{Path, PathBuf};

pub use checkpoint::{
    Checkpoint, CheckpointError, CheckpointMeta, Stage, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use commands::*;
pub use config::{fnv1a64, RunConfig};
pub use data::{
    image_tensor, read_hva_dir, read_manifest, write_gaze, write_hva_dir, write_synth, Dataset,
    FIXATION_FILE, HVA_DIR, MANIFEST_FILE,
};
pub use experiment::{
    ablate_kd, evaluate_student, run_student, run_teacher, student_scores, sweep_table,
    sweep_windows, training_targets, AblationArm, AblationReport, SweepRow,
};
pub use gradchecks::{run_gradchecks, GradCheckEntry, GRADCHECK_TOLERANCE};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(std::io::Error),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Gaze(#[from] crate::gaze::GazeError),
    #[error(transparent)]
    Hva(#[from] crate::hva::HvaError),
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error(transparent)]
    Teacher(#[from] crate::teacher::TeacherError),
    #[error(transparent)]
    Distill(#[from] crate::distill::DistillError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Failed(String),
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::File {
            path: path.to_path_buf(),
            source,
        }
    }
}
