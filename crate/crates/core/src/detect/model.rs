//! One trained-model type over all eight learners, with the feature
//! lineage (standardize -> prune -> project) and versioned persistence.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::data::{Dataset, Target};
use super::knn::KnnModel;
use super::linear::{check_xy, LdaModel, LinregModel, LogisticModel, QdaModel};
use super::tree::{ForestModel, ForestRegModel, TreeModel};
use super::{shape_err, DetectError};
use crate::features::{correlation_prune, pca_fit, pca_transform, PcaModel};
use crate::scenario::{HyperParams, SelectionSpec, TaskKind, CLASSIFIERS, REGRESSORS};

/// Bumped whenever the persisted layout changes incompatibly.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Everything that determines what gets trained. Hashing this pins a
/// model file to its scenario configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub task: TaskKind,
    pub algorithm: String,
    pub selection: SelectionSpec,
    pub hyper: HyperParams,
    /// Class-id order (empty for regression). Fixed at training time.
    pub classes: Vec<String>,
    pub seed: u64,
}

/// SHA-256 (hex) of the canonical JSON rendering of a config.
pub fn config_hash(config: &ModelConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// The deterministic feature path from raw epoch features to model input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lineage {
    /// Exact input feature names (and order) expected at predict time.
    pub feature_names: Vec<String>,
    /// Per-input-column standardization; identity when disabled.
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Surviving column indices after correlation pruning.
    pub kept: Vec<usize>,
    pub pca: Option<PcaModel>,
    pub config_hash: String,
}

impl Lineage {
    /// Apply the recorded transform to a raw feature matrix.
    pub fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut pruned = Array2::zeros((x.nrows(), self.kept.len()));
        for (out_c, &in_c) in self.kept.iter().enumerate() {
            for r in 0..x.nrows() {
                pruned[(r, out_c)] = (x[(r, in_c)] - self.mean[in_c]) / self.scale[in_c];
            }
        }
        match &self.pca {
            Some(model) => pca_transform(model, &pruned),
            None => pruned,
        }
    }
}

/// Trained parameters of one learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Algorithm {
    Knn(KnnModel),
    Logistic(LogisticModel),
    Lda(LdaModel),
    Qda(QdaModel),
    Tree(TreeModel),
    Forest(ForestModel),
    Linreg(LinregModel),
    ForestReg(ForestRegModel),
}

/// Model output: class picks with confidences, or real values.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Classes { ids: Vec<usize>, labels: Vec<String>, confidence: Vec<f64> },
    Values(Vec<f64>),
}

impl Prediction {
    pub fn len(&self) -> usize {
        match self {
            Prediction::Classes { ids, .. } => ids.len(),
            Prediction::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_ids(&self) -> Result<&[usize], DetectError> {
        match self {
            Prediction::Classes { ids, .. } => Ok(ids),
            Prediction::Values(_) => {
                Err(shape_err("expected class predictions, got values".to_string()))
            }
        }
    }

    pub fn values(&self) -> Result<&[f64], DetectError> {
        match self {
            Prediction::Values(v) => Ok(v),
            Prediction::Classes { .. } => {
                Err(shape_err("expected value predictions, got classes".to_string()))
            }
        }
    }
}

/// A trained model: config, lineage, and learner parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub config: ModelConfig,
    pub lineage: Lineage,
    pub algorithm: Algorithm,
}

impl TrainedModel {
    /// Validate the algorithm / task pairing against the registry.
    fn check_algorithm(config: &ModelConfig) -> Result<(), DetectError> {
        let name = config.algorithm.as_str();
        let classifier = CLASSIFIERS.contains(&name);
        let regressor = REGRESSORS.contains(&name);
        if !classifier && !regressor {
            return Err(DetectError::UnknownAlgorithm { name: name.to_string() });
        }
        match config.task {
            TaskKind::Classification if !classifier => Err(DetectError::TaskMismatch {
                algorithm: name.to_string(),
                task: "classification",
            }),
            TaskKind::Regression if !regressor => Err(DetectError::TaskMismatch {
                algorithm: name.to_string(),
                task: "regression",
            }),
            _ => Ok(()),
        }
    }

    /// Train on a dataset. For classification the config's class list is
    /// replaced by the dataset's, so the persisted hash covers the real
    /// class-id order.
    pub fn train(mut config: ModelConfig, data: &Dataset) -> Result<Self, DetectError> {
        Self::check_algorithm(&config)?;
        match (&config.task, &data.y) {
            (TaskKind::Classification, Target::Values(_)) => {
                return Err(shape_err(
                    "classification task on a dataset with value targets".to_string(),
                ))
            }
            (TaskKind::Regression, Target::Classes { .. }) => {
                return Err(shape_err(
                    "regression task on a dataset with class labels".to_string(),
                ))
            }
            _ => {}
        }
        if let Target::Classes { classes, .. } = &data.y {
            config.classes = classes.clone();
        } else {
            config.classes.clear();
        }
        let n = data.n_rows();
        let f = data.n_features();
        if n < 2 {
            return Err(DetectError::BadSplit {
                message: format!("cannot train on {n} rows"),
            });
        }

        // Standardize (constant columns keep scale 1 so they pass through
        // as zeros and fall to the pruner).
        let (mean, scale) = if config.selection.standardize {
            let mut mean = vec![0.0; f];
            let mut scale = vec![1.0; f];
            for c in 0..f {
                let col = data.x.column(c);
                let m = col.sum() / n as f64;
                let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
                mean[c] = m;
                let sd = var.sqrt();
                scale[c] = if sd > 0.0 { sd } else { 1.0 };
            }
            (mean, scale)
        } else {
            (vec![0.0; f], vec![1.0; f])
        };
        let mut z = data.x.clone();
        for c in 0..f {
            for r in 0..n {
                z[(r, c)] = (z[(r, c)] - mean[c]) / scale[c];
            }
        }

        let kept = match config.selection.correlation_threshold {
            Some(th) => correlation_prune(&z, th)?,
            None => (0..f).collect(),
        };
        if kept.is_empty() {
            return Err(shape_err("correlation pruning removed every feature".to_string()));
        }
        let mut zk = Array2::zeros((n, kept.len()));
        for (out_c, &in_c) in kept.iter().enumerate() {
            zk.column_mut(out_c).assign(&z.column(in_c));
        }

        let pca = match config.selection.pca_variance {
            Some(v) => Some(pca_fit(&zk, v)?),
            None => None,
        };
        let xt = match &pca {
            Some(model) => pca_transform(model, &zk),
            None => zk,
        };

        let algorithm = match config.task {
            TaskKind::Classification => {
                let (labels, classes) = data.class_labels()?;
                check_xy(&xt, labels.len())?;
                let k = classes.len();
                match config.algorithm.as_str() {
                    "knn" => Algorithm::Knn(KnnModel::fit(&xt, labels, k, config.hyper.knn_k)),
                    "logistic" => Algorithm::Logistic(LogisticModel::fit(&xt, labels, k)),
                    "lda" => Algorithm::Lda(LdaModel::fit(&xt, labels, k)?),
                    "qda" => Algorithm::Qda(QdaModel::fit(&xt, labels, k)?),
                    "dtree" => Algorithm::Tree(TreeModel::fit(&xt, labels, k, &config.hyper)),
                    "rforest" => Algorithm::Forest(ForestModel::fit(
                        &xt,
                        labels,
                        k,
                        &config.hyper,
                        config.seed,
                    )),
                    other => return Err(DetectError::UnknownAlgorithm { name: other.into() }),
                }
            }
            TaskKind::Regression => {
                let y = data.value_targets()?;
                check_xy(&xt, y.len())?;
                match config.algorithm.as_str() {
                    "linreg" => Algorithm::Linreg(LinregModel::fit(&xt, y)?),
                    "rforest_reg" => {
                        Algorithm::ForestReg(ForestRegModel::fit(&xt, y, &config.hyper, config.seed))
                    }
                    other => return Err(DetectError::UnknownAlgorithm { name: other.into() }),
                }
            }
        };

        let hash = config_hash(&config);
        Ok(TrainedModel {
            format_version: MODEL_FORMAT_VERSION,
            config,
            lineage: Lineage {
                feature_names: data.feature_names.clone(),
                mean,
                scale,
                kept,
                pca,
                config_hash: hash,
            },
            algorithm,
        })
    }

    /// Predict raw feature rows. `feature_names` must match the training
    /// layout exactly; mismatches are reported by name.
    pub fn predict(
        &self,
        x: &Array2<f64>,
        feature_names: &[String],
    ) -> Result<Prediction, DetectError> {
        if feature_names != self.lineage.feature_names.as_slice() {
            let missing: Vec<&String> = self
                .lineage
                .feature_names
                .iter()
                .filter(|n| !feature_names.contains(n))
                .collect();
            let extra: Vec<&String> = feature_names
                .iter()
                .filter(|n| !self.lineage.feature_names.contains(n))
                .collect();
            let detail = if missing.is_empty() && extra.is_empty() {
                "same features in a different order".to_string()
            } else {
                format!("missing {missing:?}, unexpected {extra:?}")
            };
            return Err(DetectError::FeatureMismatch {
                message: format!(
                    "prediction features do not match the trained lineage: {detail}"
                ),
            });
        }
        if x.ncols() != self.lineage.feature_names.len() {
            return Err(DetectError::FeatureMismatch {
                message: format!(
                    "{} feature columns, lineage expects {}",
                    x.ncols(),
                    self.lineage.feature_names.len()
                ),
            });
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(shape_err(format!("non-finite feature value {v}")));
        }

        let xt = self.lineage.transform(x);
        let out = match &self.algorithm {
            Algorithm::Knn(m) => m.predict(&xt),
            Algorithm::Logistic(m) => m.predict(&xt),
            Algorithm::Lda(m) => m.predict(&xt),
            Algorithm::Qda(m) => m.predict(&xt),
            Algorithm::Tree(m) => m.predict(&xt),
            Algorithm::Forest(m) => m.predict(&xt),
            Algorithm::Linreg(m) => return Ok(Prediction::Values(m.predict(&xt))),
            Algorithm::ForestReg(m) => return Ok(Prediction::Values(m.predict(&xt))),
        };
        let (ids, confidence) = out;
        let labels = ids.iter().map(|&k| self.config.classes[k].clone()).collect();
        Ok(Prediction::Classes { ids, labels, confidence })
    }

    /// Persist as pretty JSON (stable field order, versioned).
    pub fn save(&self, path: &Path) -> Result<(), DetectError> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DetectError> {
        let text = std::fs::read_to_string(path)?;
        let model: TrainedModel = serde_json::from_str(&text).map_err(|e| {
            DetectError::BadModelFile { path: path.display().to_string(), message: e.to_string() }
        })?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(DetectError::BadModelFile {
                path: path.display().to_string(),
                message: format!(
                    "format version {} unsupported (expected {MODEL_FORMAT_VERSION})",
                    model.format_version
                ),
            });
        }
        Ok(model)
    }
}
