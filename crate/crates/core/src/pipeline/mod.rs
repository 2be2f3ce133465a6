//! End-to-end annotation: config, sampling, parallel rendering, encoding and
//! the dataset manifest.

mod config;
mod encode;
mod manifest;
mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{load_config, parse_cue_list, PipelineConfig, RefocusConfig, RenderConfig, TrajectoryConfig};
pub use encode::{
    decode_cue_image, encode_cue_image, read_float_dump, write_cue_image, write_float_dump, CueEncoding, Encoding,
};
pub use manifest::{CueFile, Manifest, PoseRecord, ViewRecord, MANIFEST_FILE, TOOL_VERSION};
pub use run::{annotate_mesh, cue_path, resume, run_annotation, view_seed, PARTIAL_LOG};

use crate::accel::AccelError;
use crate::mesh::MeshError;
use crate::render::{CueKind, RenderError};
use crate::sampling::SamplingError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Accel(#[from] AccelError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cue '{cue}' has a non-finite value at pixel ({x}, {y})")]
    NonFinite { cue: CueKind, x: u32, y: u32 },
    #[error("png encoding failed: {0}")]
    Encode(String),
    #[error("bad manifest: {0}")]
    Manifest(String),
    #[error(
        "output directory was produced by a different config (hash {found}, expected {expected}); \
         use a fresh output directory or rerun without --resume"
    )]
    HashMismatch { expected: String, found: String },
}

impl PipelineError {
    /// Process exit status: 1 for problems with the request, 2 for failures
    /// while carrying it out.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::HashMismatch { .. } => 1,
            _ => 2,
        }
    }
}
