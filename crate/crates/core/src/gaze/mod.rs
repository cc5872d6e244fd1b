//! Fixation logs, dataset manifests, class grouping, and the synthetic
//! long-tailed generator.

mod fixation;
mod manifest;
pub mod synth;

pub use fixation::{
    parse_fixation_csv, validate_sequence, write_fixation_csv, ClampReport, FixationPoint,
    GazeSequence, FIXATION_HEADER,
};
pub use manifest::{
    group_classes, ClassGrouping, DatasetManifest, Group, ImageRecord, Split, HEAD_MIN_EXCLUSIVE,
    TAIL_MAX_EXCLUSIVE,
};
pub use synth::{synth_dataset, SynthConfig, SynthDataset};

#[derive(Debug, thiserror::Error)]
pub enum GazeError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error("expected header `image_id,x_px,y_px,onset_ms,duration_ms`, found `{0}`")]
    BadHeader(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("synthetic config: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
