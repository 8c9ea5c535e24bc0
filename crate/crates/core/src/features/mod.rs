//! Per-epoch feature extraction and feature selection.
//!
//! Feature vectors are assembled from declarative specs: each spec names a
//! stream and a feature family (band powers, spectral entropy, time-domain
//! statistics, Hjorth parameters, PERCLOS, raw samples), and the assembler
//! walks specs in order x channels in order so the resulting layout is
//! deterministic and named. Selection (correlation pruning, PCA) operates
//! on the assembled matrix and records exactly what it kept so the same
//! transform can be replayed at inference time.

pub mod assemble;
pub mod psd;
pub mod select;
pub mod stats;

pub use assemble::{
    assemble_features, BandDef, FeatureMatrix, FeatureSpec, PsdConfig, StatKind, StreamWindow,
    CANONICAL_BANDS,
};
pub use psd::{band_power, spectral_entropy, welch_psd, Psd};
pub use select::{correlation_prune, pca_fit, pca_transform, PcaModel};
pub use stats::{hjorth, perclos, time_stats, Hjorth, TimeStats};

/// Errors raised by feature extraction and selection.
#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("{op}: input must be non-empty")]
    EmptyInput { op: &'static str },
    #[error("welch segment must be at least 8 samples, got {got}")]
    SegmentTooShort { got: usize },
    #[error("welch overlap must lie in [0, 1), got {got}")]
    BadOverlap { got: f64 },
    #[error("band ({low}, {high}) Hz outside the PSD grid 0..={top} Hz")]
    BandOutOfRange { low: f64, high: f64, top: f64 },
    #[error("band ({low}, {high}) Hz invalid: need 0 <= low < high")]
    BadBand { low: f64, high: f64 },
    #[error("feature spec references unknown stream `{name}`")]
    UnknownStream { name: String },
    #[error("duplicate feature name `{name}` (specs must not collide)")]
    NameCollision { name: String },
    #[error("PERCLOS threshold must lie in [0, 1], got {got}")]
    BadThreshold { got: f64 },
    #[error("feature matrix rows have inconsistent lengths ({a} vs {b})")]
    RaggedRows { a: usize, b: usize },
    #[error("retained variance must lie in (0, 1], got {got}")]
    BadRetainedVariance { got: f64 },
    #[error("correlation threshold must lie in (0, 1], got {got}")]
    BadCorrThreshold { got: f64 },
}
