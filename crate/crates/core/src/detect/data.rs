//! The labeled dataset container shared by every learner.

use ndarray::Array2;

use super::{shape_err, DetectError};

/// Ground truth for a dataset: class ids or real-valued targets.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// `labels[i]` indexes into `classes`; the class list fixes the id
    /// order everywhere (training, confusion matrices, persistence).
    Classes { labels: Vec<usize>, classes: Vec<String> },
    Values(Vec<f64>),
}

impl Target {
    pub fn len(&self) -> usize {
        match self {
            Target::Classes { labels, .. } => labels.len(),
            Target::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Feature matrix plus ground truth, rows = epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub x: Array2<f64>,
    pub y: Target,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, x: Array2<f64>, y: Target) -> Result<Self, DetectError> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(DetectError::EmptyDataset);
        }
        if feature_names.len() != x.ncols() {
            return Err(shape_err(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                x.ncols()
            )));
        }
        if y.len() != x.nrows() {
            return Err(shape_err(format!(
                "{} target values for {} rows",
                y.len(),
                x.nrows()
            )));
        }
        if let Target::Classes { labels, classes } = &y {
            if let Some(bad) = labels.iter().find(|&&l| l >= classes.len()) {
                return Err(shape_err(format!(
                    "label id {bad} outside the {}-class list",
                    classes.len()
                )));
            }
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(shape_err(format!("non-finite feature value {v}")));
        }
        Ok(Dataset { feature_names, x, y })
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Subset by row indices (split construction).
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        let x = Array2::from_shape_fn((idx.len(), self.x.ncols()), |(r, c)| {
            self.x[(idx[r], c)]
        });
        let y = match &self.y {
            Target::Classes { labels, classes } => Target::Classes {
                labels: idx.iter().map(|&i| labels[i]).collect(),
                classes: classes.clone(),
            },
            Target::Values(v) => Target::Values(idx.iter().map(|&i| v[i]).collect()),
        };
        Dataset { feature_names: self.feature_names.clone(), x, y }
    }

    /// Class ids, or an error for regression datasets.
    pub fn class_labels(&self) -> Result<(&[usize], &[String]), DetectError> {
        match &self.y {
            Target::Classes { labels, classes } => Ok((labels, classes)),
            Target::Values(_) => Err(shape_err(
                "expected a classification dataset, found regression targets".to_string(),
            )),
        }
    }

    /// Real targets, or an error for classification datasets.
    pub fn value_targets(&self) -> Result<&[f64], DetectError> {
        match &self.y {
            Target::Values(v) => Ok(v),
            Target::Classes { .. } => Err(shape_err(
                "expected a regression dataset, found class labels".to_string(),
            )),
        }
    }
}

/// Turn raw string labels into a class-id target.
///
/// With an empty `fixed_order` the class list is the sorted set of
/// observed labels; otherwise the given order is kept verbatim and any
/// label outside it is an error (callers filter first).
pub fn class_target(raw: &[String], fixed_order: &[String]) -> Result<Target, DetectError> {
    let classes: Vec<String> = if fixed_order.is_empty() {
        let mut seen: Vec<String> = raw.to_vec();
        seen.sort();
        seen.dedup();
        seen
    } else {
        fixed_order.to_vec()
    };
    let labels = raw
        .iter()
        .map(|l| {
            classes.iter().position(|c| c == l).ok_or_else(|| {
                shape_err(format!("label `{l}` is not in the class list {classes:?}"))
            })
        })
        .collect::<Result<Vec<usize>, DetectError>>()?;
    Ok(Target::Classes { labels, classes })
}

/// Map a closed-eye fraction to a discrete drowsiness label.
pub fn discretize_perclos(p: f64, drowsy_threshold: f64) -> &'static str {
    if p >= drowsy_threshold {
        "drowsy"
    } else {
        "alert"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dataset_validates_shapes_and_label_range() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let names = vec!["a".to_string(), "b".to_string()];
        let ok = Dataset::new(
            names.clone(),
            x.clone(),
            Target::Values(vec![0.0, 1.0]),
        );
        assert!(ok.is_ok());

        let short = Dataset::new(names.clone(), x.clone(), Target::Values(vec![0.0]));
        assert!(short.is_err());

        let bad_label = Dataset::new(
            names,
            x,
            Target::Classes { labels: vec![0, 2], classes: vec!["p".into(), "q".into()] },
        );
        assert!(bad_label.is_err());
    }

    #[test]
    fn class_target_sorts_observed_labels_and_respects_fixed_order() {
        let raw: Vec<String> =
            ["dog", "cat", "dog", "bird"].iter().map(|s| s.to_string()).collect();
        let t = class_target(&raw, &[]).unwrap();
        match &t {
            Target::Classes { labels, classes } => {
                assert_eq!(classes, &["bird", "cat", "dog"]);
                assert_eq!(labels, &[2, 1, 2, 0]);
            }
            _ => panic!("expected classes"),
        }

        let fixed: Vec<String> = ["dog", "cat"].iter().map(|s| s.to_string()).collect();
        assert!(class_target(&raw, &fixed).is_err(), "bird is outside the fixed order");
    }

    #[test]
    fn select_rows_keeps_alignment() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let d = Dataset::new(
            vec!["f".into()],
            x,
            Target::Values(vec![10.0, 11.0, 12.0, 13.0]),
        )
        .unwrap();
        let s = d.select_rows(&[3, 1]);
        assert_eq!(s.x, array![[3.0], [1.0]]);
        assert_eq!(s.value_targets().unwrap(), &[13.0, 11.0]);
    }

    #[test]
    fn perclos_discretization_uses_an_inclusive_threshold() {
        assert_eq!(discretize_perclos(0.15, 0.15), "drowsy");
        assert_eq!(discretize_perclos(0.149, 0.15), "alert");
        assert_eq!(discretize_perclos(0.9, 0.15), "drowsy");
    }
}
