//! Core library for `neuropipe`: a modular pipeline for acquiring,
//! cleaning, and classifying multi-rate physiological streams (EEG, EOG,
//! eye tracking, vehicle telemetry) in both offline and soft-real-time
//! settings.
//!
//! The crate is organized to mirror the data path:
//!
//! * [`scenario`] — declarative scenario documents: which streams exist,
//!   how they are filtered and epoched, which features feed which detector,
//!   and what actions fire on detections.
//! * [`acquire`] — stream acquisition: sample containers, the NBS1 wire
//!   protocol, session recording/replay on disk, and multi-rate
//!   synchronization into fused frames.
//! * [`synth`] — seeded synthetic session generation with ground-truth
//!   event logs, used for validation and benchmarks.
//! * [`dsp`] — filtering (notch / Butterworth band-pass), rational
//!   resampling, FastICA artifact removal, and epoching.
//! * [`features`] — per-epoch feature extraction (Welch PSD band powers,
//!   spectral entropy, time statistics, Hjorth parameters, PERCLOS) and
//!   feature selection (correlation pruning, PCA).
//! * [`detect`] — from-scratch classifiers and regressors with a shared
//!   train/predict interface, dataset splitting, metrics, online inference,
//!   and action mapping.
//! * [`pipeline`] — executors that wire the above together, offline (whole
//!   sessions) and online (chunk-at-a-time with bounded latency).
//!
//! Everything that consumes randomness derives its RNG from one master seed
//! via [`seed`], so any artifact the library produces is bit-reproducible.

pub mod acquire;
pub mod detect;
pub mod dsp;
pub mod features;
pub mod pipeline;
pub mod scenario;
pub mod seed;
pub mod synth;
mod linalg;

/// Error raised when a pipeline stage fails, naming the module and
/// operation that produced it so CLI output can point at the faulty stage.
#[derive(Debug, thiserror::Error)]
#[error("{module}.{op}: {source}")]
pub struct StageError {
    pub module: &'static str,
    pub op: &'static str,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

impl StageError {
    pub fn new(
        module: &'static str,
        op: &'static str,
        source: impl std::error::Error + Send + Sync + 'static,
    ) -> Self {
        Self { module, op, source: Box::new(source) }
    }
}

/// Shorthand used by the executors: attach module/op context to an error.
pub trait StageContext<T> {
    fn stage(self, module: &'static str, op: &'static str) -> Result<T, StageError>;
}

impl<T, E: std::error::Error + Send + Sync + 'static> StageContext<T> for Result<T, E> {
    fn stage(self, module: &'static str, op: &'static str) -> Result<T, StageError> {
        self.map_err(|e| StageError::new(module, op, e))
    }
}
