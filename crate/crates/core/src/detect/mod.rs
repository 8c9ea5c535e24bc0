//! Model training, prediction, evaluation, and action mapping.
//!
//! Everything downstream of feature extraction lives here: the labeled
//! dataset container, deterministic train/test splits, eight built-in
//! learners behind one [`TrainedModel`] type (with the standardize ->
//! prune -> project lineage baked in), evaluation metrics, and the rule
//! engine that turns predictions into actuator commands.

mod action;
mod data;
mod knn;
mod linear;
mod metrics;
mod model;
mod split;
mod tree;

pub use action::{ActionCommand, ActionEmitter, ActionMapper, DetectionEvent};
pub use data::{class_target, discretize_perclos, Dataset, Target};
pub use knn::KnnModel;
pub use linear::{LdaModel, LinregModel, LogisticModel, QdaModel};
pub use metrics::{accuracy, confusion, f1_binary, f1_macro, rmse};
pub use model::{
    config_hash, Algorithm, Lineage, ModelConfig, Prediction, TrainedModel, MODEL_FORMAT_VERSION,
};
pub use split::{holdout, kfold, stratified_holdout, stratified_kfold};
pub use tree::{ForestModel, ForestRegModel, TreeModel};

/// Errors raised while building datasets, training, predicting, or
/// emitting actions.
#[derive(Debug, thiserror::Error)]
pub enum DetectError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{message}")]
    Shape { message: String },
    #[error("class `{class}` has {count} epochs; a stratified split needs at least 2")]
    ClassTooSmall { class: String, count: usize },
    #[error("unknown algorithm `{name}`")]
    UnknownAlgorithm { name: String },
    #[error("algorithm `{algorithm}` does not support {task} tasks")]
    TaskMismatch { algorithm: String, task: &'static str },
    #[error("{message}")]
    FeatureMismatch { message: String },
    #[error("{context}: covariance is not positive definite even after ridge escalation")]
    SingularModel { context: String },
    #[error("{message}")]
    BadSplit { message: String },
    #[error("model file {path}: {message}")]
    BadModelFile { path: String, message: String },
    #[error("feature selection failed: {0}")]
    Feature(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("model serialization failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("action emit failed after {attempts} attempts: {last}")]
    EmitFailed { attempts: usize, last: String },
}

pub(crate) fn shape_err(message: impl Into<String>) -> DetectError {
    DetectError::Shape { message: message.into() }
}
