//! Time-windowed human visual attention (HVA) maps from gaze fixations.

mod cluster;
mod filter;
mod format;
mod map;
mod partition;

pub use cluster::{cluster_integration, single_linkage};
pub use filter::{gaussian_filter, gaussian_kernel, resize_bilinear};
pub use format::{read_hva, write_hva, HVA_MAGIC, HVA_VERSION};
pub use map::{
    generate_hva, render_map, resize_map, AttentionMap, HvaSet, IntegrationParams, Variant,
};
pub use partition::{partition_fixations, window_of, TimeWindowPartition};

#[derive(Debug, thiserror::Error)]
pub enum HvaError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid HVA data: {0}")]
    Invalid(String),
    #[error("bad magic {found:?} at offset {offset}")]
    BadMagic { offset: usize, found: Vec<u8> },
    #[error("unsupported version {found} at offset {offset}")]
    Version { offset: usize, found: u32 },
    #[error("unknown variant code {found} at offset {offset}")]
    BadVariant { offset: usize, found: u8 },
    #[error("truncated payload at offset {offset}: need {needed} bytes, {available} left")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("{extra} trailing bytes at offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
