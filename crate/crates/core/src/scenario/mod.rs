//! Scenario configuration: the single document that tells every other
//! module which streams to open, which processing stages to run, which
//! features to extract, and which model to train.
//!
//! Scenarios are YAML documents (extension `.scenario.yaml`). Parsing is
//! strict: unknown keys are rejected with the offending path, because a
//! silently ignored typo in a processing parameter is worse than friction.
//! `render` produces a document that parses back to an equal config, so
//! configurations can be persisted alongside run artifacts.

mod check;
mod parse;
mod render;

pub use check::{
    resolve_pipeline, validate_scenario, Finding, PipelinePlan, PlannedEpoch, PlannedStage,
    Severity, ValidationReport, CLASSIFIERS, REGRESSORS,
};
pub use parse::parse_scenario;
pub use render::render_scenario;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::acquire::StreamKind;
use crate::features::FeatureSpec;

/// Supported config schema version.
pub const SCHEMA_VERSION: u64 = 1;

/// Errors raised while parsing or resolving a scenario document.
#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("{path}: unknown key `{key}`")]
    UnknownKey { path: String, key: String },
    #[error("{path}: missing required key `{key}`")]
    MissingKey { path: String, key: String },
    #[error("{path}: expected {expected}")]
    WrongType { path: String, expected: &'static str },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("no streams declared")]
    NoStreams,
    #[error("unsupported config version {got} (supported: {SCHEMA_VERSION})")]
    BadVersion { got: u64 },
    #[error("scenario has validation errors:\n{0}")]
    FailedValidation(String),
}

/// Where a stream's samples come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    /// Live NBS1 frames over a socket; address supplied at run time.
    Socket,
    /// Replay of a recorded session directory.
    CsvReplay,
    /// Generated in-process from a session script.
    Synthetic,
}

impl SourceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceKind::Socket => "socket",
            SourceKind::CsvReplay => "csv_replay",
            SourceKind::Synthetic => "synthetic",
        }
    }
}

impl std::str::FromStr for SourceKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "socket" => Ok(SourceKind::Socket),
            "csv_replay" => Ok(SourceKind::CsvReplay),
            "synthetic" => Ok(SourceKind::Synthetic),
            other => Err(format!("unknown source `{other}`")),
        }
    }
}

/// One declared input stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamDescriptor {
    pub name: String,
    pub kind: StreamKind,
    pub channels: Vec<String>,
    pub srate: f64,
    pub units: String,
    pub source: SourceKind,
    /// Whether this source can deliver event frames (stimulus markers,
    /// block boundaries). Synthetic and replay sources always can; socket
    /// sources must declare it.
    pub emits_events: bool,
}

impl StreamDescriptor {
    pub fn event_capable(&self) -> bool {
        match self.source {
            SourceKind::Synthetic | SourceKind::CsvReplay => true,
            SourceKind::Socket => self.emits_events,
        }
    }
}

/// Cross-stream alignment policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncPolicy {
    /// Max |sample time - frame time| for a fresh contribution, seconds.
    /// `None` means 0.5 / (slowest declared rate).
    pub tolerance: Option<f64>,
    /// Master-stream inter-sample gap, seconds, beyond which a gap event
    /// is recorded.
    pub max_gap: f64,
}

impl Default for SyncPolicy {
    fn default() -> Self {
        Self { tolerance: None, max_gap: 0.5 }
    }
}

impl SyncPolicy {
    pub fn resolved_tolerance(&self, srate_slowest: f64) -> f64 {
        self.tolerance.unwrap_or(0.5 / srate_slowest)
    }
}

/// One processing stage as declared (stream references unresolved).
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessingStageSpec {
    Notch { stream: Option<String>, freq: f64, q: f64 },
    Bandpass { stream: Option<String>, low: f64, high: f64, order: usize },
    Resample { stream: Option<String>, target: f64 },
    Ica {
        stream: Option<String>,
        components: Option<usize>,
        /// Seconds of signal the model is fitted on (offline batch fit).
        fit_seconds: f64,
        /// EOG stream used for automatic artifact rejection; `None`
        /// disables rejection (the stage fits and reconstructs only).
        eog_stream: Option<String>,
        reject_threshold: f64,
    },
    EpochFixed { duration: f64 },
    EpochEvent {
        pre: f64,
        post: f64,
        /// Event tags that trigger an epoch.
        tags: Vec<String>,
        /// Event payload key holding the epoch label.
        label_key: String,
        /// Pinned sample count, overriding round((pre+post) * srate).
        samples_override: Option<usize>,
    },
}

impl ProcessingStageSpec {
    pub fn stage_name(&self) -> &'static str {
        match self {
            ProcessingStageSpec::Notch { .. } => "notch",
            ProcessingStageSpec::Bandpass { .. } => "bandpass",
            ProcessingStageSpec::Resample { .. } => "resample",
            ProcessingStageSpec::Ica { .. } => "ica",
            ProcessingStageSpec::EpochFixed { .. } => "epoch_fixed",
            ProcessingStageSpec::EpochEvent { .. } => "epoch_event",
        }
    }

    pub fn is_epoch(&self) -> bool {
        matches!(self, ProcessingStageSpec::EpochFixed { .. } | ProcessingStageSpec::EpochEvent { .. })
    }

    pub fn stream(&self) -> Option<&str> {
        match self {
            ProcessingStageSpec::Notch { stream, .. }
            | ProcessingStageSpec::Bandpass { stream, .. }
            | ProcessingStageSpec::Resample { stream, .. }
            | ProcessingStageSpec::Ica { stream, .. } => stream.as_deref(),
            _ => None,
        }
    }
}

/// Feature-space reduction applied between extraction and the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSpec {
    pub standardize: bool,
    /// Drop features correlating above this with an already-kept one.
    pub correlation_threshold: Option<f64>,
    /// Keep the smallest PCA basis reaching this explained variance.
    pub pca_variance: Option<f64>,
}

impl Default for SelectionSpec {
    fn default() -> Self {
        Self { standardize: true, correlation_threshold: None, pca_variance: None }
    }
}

/// Prediction task kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification,
    Regression,
}

impl TaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Classification => "classification",
            TaskKind::Regression => "regression",
        }
    }
}

/// Where each epoch's ground-truth label comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelSource {
    /// Condition blocks recorded in the event log (label at epoch midpoint).
    Blocks,
    /// The recording session's subject id (authentication tasks).
    Subject,
    /// PERCLOS of the named eye stream over the epoch, optionally
    /// discretized (classification) at the drowsy threshold.
    Perclos { stream: String, drowsy_threshold: f64 },
}

/// Train/test split policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitSpec {
    Holdout { test_fraction: f64 },
    KFold { folds: usize },
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Holdout { test_fraction: 0.2 }
    }
}

/// Model hyperparameters with pinned defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub knn_k: usize,
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self { knn_k: 5, trees: 100, max_depth: 16, min_leaf: 2 }
    }
}

/// The model to train and how to label/split the data.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSpec {
    pub task: TaskKind,
    pub algorithm: String,
    pub label_source: LabelSource,
    /// Keep only epochs whose raw label equals this value (applied before
    /// mapping); e.g. keep only stimulus epochs marked `target`.
    pub epoch_filter: Option<String>,
    /// Raw label -> class renaming (e.g. collapse distraction kinds into
    /// one `distracted` class).
    pub label_map: BTreeMap<String, String>,
    /// Explicit class set: filters epochs to these classes and fixes the
    /// class-id order. Empty = all observed labels, sorted.
    pub classes: Vec<String>,
    pub positive_class: Option<String>,
    /// Train one binary model per subject (that subject vs the rest).
    pub one_vs_rest: bool,
    pub split: SplitSpec,
    pub hyper: HyperParams,
}

/// Maps a prediction to an actuator command.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRule {
    /// Label to match; `*` matches any label.
    pub when_label: String,
    pub min_confidence: f64,
    pub action: String,
    /// Seconds during which repeats of this rule are suppressed.
    pub debounce: f64,
}

/// A fully parsed scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub version: u64,
    pub scenario_id: String,
    pub seed: u64,
    pub streams: Vec<StreamDescriptor>,
    pub sync: SyncPolicy,
    pub processing: Vec<ProcessingStageSpec>,
    pub features: Vec<FeatureSpec>,
    pub selection: SelectionSpec,
    pub detection: DetectionSpec,
    pub actions: Vec<ActionRule>,
}

impl ScenarioConfig {
    pub fn stream(&self, name: &str) -> Option<&StreamDescriptor> {
        self.streams.iter().find(|s| s.name == name)
    }

    /// The stream the processing chain runs on: an explicit `stream:` on
    /// any processing stage wins, otherwise the first EEG stream,
    /// otherwise the first stream.
    pub fn master_stream(&self) -> &str {
        for st in &self.processing {
            if let Some(s) = st.stream() {
                return s;
            }
        }
        self.streams
            .iter()
            .find(|s| s.kind == StreamKind::Eeg)
            .or(self.streams.first())
            .map(|s| s.name.as_str())
            .expect("parse guarantees at least one stream")
    }

    pub fn slowest_srate(&self) -> f64 {
        self.streams.iter().map(|s| s.srate).fold(f64::INFINITY, f64::min)
    }
}
