//! Turning processed sessions into a labeled training dataset.
//!
//! Each epoch becomes one candidate row. The detection spec decides which
//! rows survive (epoch filter, class list) and what the ground truth is:
//! the epoch's own condition label, the recording's subject id, or the
//! measured eye-closure fraction — discretized for classification, kept
//! numeric for regression.

use ndarray::Array2;

use super::{offline::ProcessedSession, PipelineError};
use crate::detect::{class_target, discretize_perclos, Dataset, Target};
use crate::scenario::{DetectionSpec, LabelSource, TaskKind};

/// Where a dataset row came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RowRef {
    pub session: String,
    /// Epoch index within that session.
    pub epoch: usize,
    /// Epoch start time in session seconds.
    pub t0: f64,
}

/// Row accounting for one dataset build.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetReport {
    pub kept: usize,
    /// Rows whose raw epoch label failed the epoch filter.
    pub dropped_by_filter: usize,
    /// Rows with no usable label (unlabeled epoch under block labeling).
    pub dropped_unlabeled: usize,
    /// Rows whose mapped label is outside the declared class list.
    pub dropped_by_class_list: usize,
}

/// Assemble one dataset from any number of processed sessions.
///
/// Feature layouts must agree across sessions (same names, same order);
/// they do whenever the sessions went through the same plan.
pub fn build_dataset(
    sessions: &[ProcessedSession],
    spec: &DetectionSpec,
) -> Result<(Dataset, Vec<RowRef>, DatasetReport), PipelineError> {
    let first = sessions
        .first()
        .ok_or(PipelineError::Label { context: "dataset", message: "no sessions".into() })?;
    let names = first.features.names.clone();

    let mut rows: Vec<f64> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut refs: Vec<RowRef> = Vec::new();
    let mut report = DatasetReport::default();

    for s in sessions {
        if s.features.names != names {
            return Err(PipelineError::Label {
                context: "dataset",
                message: format!(
                    "session `{}` produced a different feature layout ({} vs {} columns)",
                    s.record.session,
                    s.features.names.len(),
                    names.len()
                ),
            });
        }
        if matches!(spec.label_source, LabelSource::Perclos { .. })
            && s.truth_values.len() != s.features.n_epochs()
        {
            return Err(PipelineError::Label {
                context: "dataset",
                message: format!(
                    "session `{}` has {} perclos values for {} epochs",
                    s.record.session,
                    s.truth_values.len(),
                    s.features.n_epochs()
                ),
            });
        }

        for i in 0..s.features.n_epochs() {
            let epoch_label = s.features.labels[i].as_deref();
            if let Some(filter) = &spec.epoch_filter {
                if epoch_label != Some(filter.as_str()) {
                    report.dropped_by_filter += 1;
                    continue;
                }
            }

            let raw = match (&spec.task, &spec.label_source) {
                (TaskKind::Regression, _) => None,
                (_, LabelSource::Blocks) => match epoch_label {
                    Some(l) => Some(l.to_string()),
                    None => {
                        report.dropped_unlabeled += 1;
                        continue;
                    }
                },
                (_, LabelSource::Subject) => Some(s.record.subject.clone()),
                (_, LabelSource::Perclos { drowsy_threshold, .. }) => {
                    Some(discretize_perclos(s.truth_values[i], *drowsy_threshold).to_string())
                }
            };

            let mapped = raw.map(|r| spec.label_map.get(&r).cloned().unwrap_or(r));
            if let Some(label) = &mapped {
                if !spec.classes.is_empty() && !spec.classes.contains(label) {
                    report.dropped_by_class_list += 1;
                    continue;
                }
            }

            rows.extend(s.features.values.row(i).iter().copied());
            if let Some(label) = mapped {
                raw_labels.push(label);
            } else {
                values.push(s.truth_values[i]);
            }
            refs.push(RowRef { session: s.record.session.clone(), epoch: i, t0: s.epochs[i].t0 });
            report.kept += 1;
        }
    }

    let x = Array2::from_shape_vec((refs.len(), names.len()), rows)
        .expect("row-major collection matches the column count");
    let y = match spec.task {
        TaskKind::Classification => class_target(&raw_labels, &spec.classes)?,
        TaskKind::Regression => Target::Values(values),
    };
    let dataset = Dataset::new(names, x, y)?;
    Ok((dataset, refs, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquire::session::SessionRecord;
    use crate::dsp::epoch::Epoch;
    use crate::features::FeatureMatrix;
    use crate::scenario::{HyperParams, SplitSpec};
    use std::collections::BTreeMap;

    fn spec(label_source: LabelSource) -> DetectionSpec {
        DetectionSpec {
            task: TaskKind::Classification,
            algorithm: "knn".into(),
            label_source,
            epoch_filter: None,
            label_map: BTreeMap::new(),
            classes: Vec::new(),
            positive_class: None,
            one_vs_rest: false,
            split: SplitSpec::Holdout { test_fraction: 0.2 },
            hyper: HyperParams::default(),
        }
    }

    fn session(
        name: &str,
        subject: &str,
        labels: &[Option<&str>],
        truth: &[f64],
    ) -> ProcessedSession {
        let n = labels.len();
        let mut features = FeatureMatrix::new(vec!["f.a".into(), "f.b".into()]);
        let mut epochs = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            let t0 = i as f64;
            features
                .push_row(vec![i as f64, 10.0 + i as f64], l.map(|s| s.to_string()), t0)
                .unwrap();
            epochs.push(Epoch {
                index: i,
                t0,
                srate: 1.0,
                data: Array2::zeros((1, 1)),
                label: l.map(|s| s.to_string()),
            });
        }
        let record = SessionRecord {
            session: name.into(),
            subject: subject.into(),
            scenario: "t".into(),
            seed: 0,
            start: 0.0,
            end: n as f64,
            streams: Vec::new(),
            annotations: serde_json::Map::new(),
        };
        ProcessedSession {
            record,
            master_stream: "eeg".into(),
            t0: 0.0,
            processed_rate: 1.0,
            epochs,
            features,
            truth_values: truth.to_vec(),
            gaps: Vec::new(),
            ica: None,
            epoch_report: None,
        }
    }

    #[test]
    fn block_labels_feed_classes_and_unlabeled_rows_drop() {
        let s = session("a", "s01", &[Some("calm"), None, Some("tense"), Some("calm")], &[]);
        let (ds, refs, report) = build_dataset(&[s], &spec(LabelSource::Blocks)).unwrap();
        assert_eq!(ds.n_rows(), 3);
        let (ids, classes) = ds.class_labels().unwrap();
        assert_eq!(classes, &["calm".to_string(), "tense".to_string()]);
        assert_eq!(ids, &[0, 1, 0]);
        assert_eq!(report.kept, 3);
        assert_eq!(report.dropped_unlabeled, 1);
        // Row provenance points back at the surviving epochs.
        assert_eq!(refs.iter().map(|r| r.epoch).collect::<Vec<_>>(), vec![0, 2, 3]);
        assert_eq!(ds.x[[1, 0]], 2.0, "row 1 is epoch 2's features");
    }

    #[test]
    fn label_map_and_class_list_rewrite_and_filter() {
        let s = session(
            "a",
            "s01",
            &[Some("visual"), Some("math"), Some("none"), Some("brake")],
            &[],
        );
        let mut sp = spec(LabelSource::Blocks);
        sp.label_map =
            BTreeMap::from([("visual".into(), "distracted".into()), ("math".into(), "distracted".into())]);
        sp.classes = vec!["focused".into(), "distracted".into()];
        sp.label_map.insert("none".into(), "focused".into());
        let (ds, _, report) = build_dataset(&[s], &sp).unwrap();
        let (ids, classes) = ds.class_labels().unwrap();
        // Declared order wins over alphabetical.
        assert_eq!(classes, &["focused".to_string(), "distracted".to_string()]);
        assert_eq!(ids, &[1, 1, 0]);
        assert_eq!(report.dropped_by_class_list, 1, "brake is outside the class list");
    }

    #[test]
    fn subject_labels_span_sessions_and_filters_apply_first() {
        let a = session("a", "alice", &[Some("true"), Some("false"), Some("true")], &[]);
        let b = session("b", "bob", &[Some("true"), Some("false")], &[]);
        let mut sp = spec(LabelSource::Subject);
        sp.epoch_filter = Some("true".into());
        let (ds, refs, report) = build_dataset(&[a, b], &sp).unwrap();
        let (ids, classes) = ds.class_labels().unwrap();
        assert_eq!(classes, &["alice".to_string(), "bob".to_string()]);
        assert_eq!(ids, &[0, 0, 1]);
        assert_eq!(report.dropped_by_filter, 2);
        assert_eq!(refs[2].session, "b");
    }

    #[test]
    fn perclos_source_discretizes_or_stays_numeric() {
        let s = session("a", "s01", &[Some("x"), Some("x"), Some("x")], &[0.05, 0.4, 0.2]);
        let mut sp = spec(LabelSource::Perclos {
            stream: "eye".into(),
            drowsy_threshold: 0.25,
        });
        let (ds, _, _) = build_dataset(&[s.clone()], &sp).unwrap();
        let (ids, classes) = ds.class_labels().unwrap();
        assert_eq!(classes, &["alert".to_string(), "drowsy".to_string()]);
        assert_eq!(ids, &[0, 1, 0]);

        sp.task = TaskKind::Regression;
        let (ds, _, _) = build_dataset(&[s], &sp).unwrap();
        assert_eq!(ds.value_targets().unwrap(), &[0.05, 0.4, 0.2]);
    }

    #[test]
    fn mismatched_layouts_and_empty_results_are_errors() {
        let a = session("a", "s01", &[Some("x")], &[]);
        let mut b = session("b", "s01", &[Some("x")], &[]);
        b.features.names[1] = "f.c".into();
        let err = build_dataset(&[a.clone(), b], &spec(LabelSource::Blocks)).unwrap_err();
        assert!(err.to_string().contains("feature layout"), "{err}");

        let mut sp = spec(LabelSource::Blocks);
        sp.epoch_filter = Some("never".into());
        let err = build_dataset(&[a], &sp).unwrap_err();
        assert!(matches!(err, PipelineError::Detect(_)), "empty dataset bubbles up: {err}");
    }
}
