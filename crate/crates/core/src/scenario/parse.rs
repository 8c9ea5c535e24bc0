//! Strict YAML parsing for scenario documents.
//!
//! Built on a hand-rolled mapping walker instead of serde derives so that
//! (a) unknown keys are rejected with their full path, including inside
//! tag-dispatched entries like processing stages, and (b) defaults are
//! applied exactly where a key is omitted.

use std::collections::BTreeMap;

use serde_yaml::{Mapping, Value};

use super::*;
use crate::features::{BandDef, FeatureSpec, StatKind, CANONICAL_BANDS};

type PResult<T> = Result<T, ScenarioError>;

/// Parse a scenario document. Strict: every key must be understood.
pub fn parse_scenario(text: &str) -> PResult<ScenarioConfig> {
    let value: Value =
        serde_yaml::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
    let mut root = MapWalker::new("$", &value)?;

    let version = root.require("version")?.as_u64()?;
    if version != SCHEMA_VERSION {
        return Err(ScenarioError::BadVersion { got: version });
    }
    let scenario_id = root.require("scenario")?.as_str()?.to_string();
    let seed = root.require("seed")?.as_u64()?;

    let streams_node = root.require("streams")?;
    let streams: Vec<StreamDescriptor> =
        streams_node.as_seq()?.iter().map(parse_stream).collect::<PResult<_>>()?;
    if streams.is_empty() {
        return Err(ScenarioError::NoStreams);
    }

    let sync = match root.take("sync") {
        Some(node) => parse_sync(&node)?,
        None => SyncPolicy::default(),
    };

    let processing = match root.take("processing") {
        Some(node) => node.as_seq()?.iter().map(parse_stage).collect::<PResult<_>>()?,
        None => Vec::new(),
    };

    let features = match root.take("features") {
        Some(node) => node.as_seq()?.iter().map(parse_feature).collect::<PResult<_>>()?,
        None => Vec::new(),
    };

    let selection = match root.take("selection") {
        Some(node) => parse_selection(&node)?,
        None => SelectionSpec::default(),
    };

    let detection = parse_detection(&root.require("detection")?)?;

    let actions = match root.take("actions") {
        Some(node) => node.as_seq()?.iter().map(parse_action).collect::<PResult<_>>()?,
        None => Vec::new(),
    };

    root.finish()?;
    Ok(ScenarioConfig {
        version,
        scenario_id,
        seed,
        streams,
        sync,
        processing,
        features,
        selection,
        detection,
        actions,
    })
}

fn parse_stream(node: &Node) -> PResult<StreamDescriptor> {
    let mut m = node.as_map()?;
    let name = m.require("name")?.as_str()?.to_string();
    let kind: StreamKind = {
        let n = m.require("kind")?;
        n.as_str()?.parse().map_err(|e: String| n.invalid(e))?
    };
    let channels_node = m.require("channels")?;
    let channels: Vec<String> = channels_node
        .as_seq()?
        .iter()
        .map(|c| c.as_str().map(str::to_string))
        .collect::<PResult<_>>()?;
    if channels.is_empty() {
        return Err(channels_node.invalid("stream must declare at least one channel".into()));
    }
    let srate_node = m.require("srate")?;
    let srate = srate_node.as_f64()?;
    if !(srate > 0.0) {
        return Err(srate_node.invalid(format!("srate must be > 0, got {srate}")));
    }
    let units = match m.take("units") {
        Some(n) => n.as_str()?.to_string(),
        None => String::new(),
    };
    let source = match m.take("source") {
        Some(n) => n.as_str()?.parse().map_err(|e: String| n.invalid(e))?,
        None => SourceKind::Synthetic,
    };
    let emits_events = match m.take("emits_events") {
        Some(n) => n.as_bool()?,
        None => false,
    };
    m.finish()?;
    Ok(StreamDescriptor { name, kind, channels, srate, units, source, emits_events })
}

fn parse_sync(node: &Node) -> PResult<SyncPolicy> {
    let mut m = node.as_map()?;
    let tolerance = match m.take("tolerance") {
        Some(n) if n.is_null() => None,
        Some(n) => Some(n.as_f64()?),
        None => None,
    };
    let max_gap = match m.take("max_gap") {
        Some(n) => n.as_f64()?,
        None => SyncPolicy::default().max_gap,
    };
    m.finish()?;
    Ok(SyncPolicy { tolerance, max_gap })
}

fn parse_stage(node: &Node) -> PResult<ProcessingStageSpec> {
    let mut m = node.as_map()?;
    let stage_node = m.require("stage")?;
    let stage = stage_node.as_str()?.to_string();
    let spec = match stage.as_str() {
        "notch" => ProcessingStageSpec::Notch {
            stream: m.take_opt_str("stream")?,
            freq: m.require("freq")?.as_f64()?,
            q: m.take_f64_or("q", 30.0)?,
        },
        "bandpass" => {
            let stream = m.take_opt_str("stream")?;
            let low_node = m.require("low")?;
            let low = low_node.as_f64()?;
            let high = m.require("high")?.as_f64()?;
            if !(low >= 0.0 && low < high) {
                return Err(low_node
                    .invalid(format!("invalid band edges (low={low}, high={high}): need 0 <= low < high")));
            }
            ProcessingStageSpec::Bandpass { stream, low, high, order: m.take_usize_or("order", 4)? }
        }
        "resample" => ProcessingStageSpec::Resample {
            stream: m.take_opt_str("stream")?,
            target: m.require("target")?.as_f64()?,
        },
        "ica" => ProcessingStageSpec::Ica {
            stream: m.take_opt_str("stream")?,
            components: match m.take("components") {
                Some(n) if n.is_null() => None,
                Some(n) => Some(n.as_usize()?),
                None => None,
            },
            fit_seconds: m.take_f64_or("fit_seconds", 120.0)?,
            eog_stream: m.take_opt_str("eog_stream")?,
            reject_threshold: m.take_f64_or("reject_threshold", 0.7)?,
        },
        "epoch_fixed" => {
            ProcessingStageSpec::EpochFixed { duration: m.require("duration")?.as_f64()? }
        }
        "epoch_event" => ProcessingStageSpec::EpochEvent {
            pre: m.require("pre")?.as_f64()?,
            post: m.require("post")?.as_f64()?,
            tags: match m.take("tags") {
                Some(n) => n.as_seq()?.iter().map(|t| t.as_str().map(str::to_string)).collect::<PResult<_>>()?,
                None => vec!["stimulus".to_string()],
            },
            label_key: match m.take("label_key") {
                Some(n) => n.as_str()?.to_string(),
                None => "label".to_string(),
            },
            samples_override: match m.take("samples_override") {
                Some(n) if n.is_null() => None,
                Some(n) => Some(n.as_usize()?),
                None => None,
            },
        },
        other => return Err(stage_node.invalid(format!("unknown stage `{other}`"))),
    };
    m.finish()?;
    Ok(spec)
}

fn parse_feature(node: &Node) -> PResult<FeatureSpec> {
    let mut m = node.as_map()?;
    let kind_node = m.require("feature")?;
    let kind = kind_node.as_str()?.to_string();
    let spec = match kind.as_str() {
        "band_power" => FeatureSpec::BandPower {
            stream: m.require("stream")?.as_str()?.to_string(),
            bands: parse_bands(&m.require("bands")?)?,
        },
        "band_stats" => FeatureSpec::BandStats {
            stream: m.require("stream")?.as_str()?.to_string(),
            bands: parse_bands(&m.require("bands")?)?,
            stats: match m.take("stats") {
                Some(n) => parse_stats(&n)?,
                None => vec![StatKind::Mean, StatKind::Std],
            },
        },
        "spectral_entropy" => {
            FeatureSpec::SpectralEntropy { stream: m.require("stream")?.as_str()?.to_string() }
        }
        "time_stats" => FeatureSpec::TimeStats {
            stream: m.require("stream")?.as_str()?.to_string(),
            stats: match m.take("stats") {
                Some(n) => parse_stats(&n)?,
                None => StatKind::ALL.to_vec(),
            },
        },
        "hjorth" => FeatureSpec::Hjorth { stream: m.require("stream")?.as_str()?.to_string() },
        "perclos" => FeatureSpec::Perclos {
            stream: m.require("stream")?.as_str()?.to_string(),
            closed_threshold: m.take_f64_or("closed_threshold", 0.2)?,
        },
        "raw" => FeatureSpec::Raw { stream: m.require("stream")?.as_str()?.to_string() },
        other => return Err(kind_node.invalid(format!("unknown feature `{other}`"))),
    };
    m.finish()?;
    Ok(spec)
}

fn parse_bands(node: &Node) -> PResult<Vec<BandDef>> {
    node.as_seq()?
        .iter()
        .map(|b| {
            if let Ok(name) = b.as_str() {
                CANONICAL_BANDS
                    .iter()
                    .find(|(n, _, _)| *n == name)
                    .map(|&(n, low, high)| BandDef { name: n.to_string(), low, high })
                    .ok_or_else(|| {
                        b.invalid(format!(
                            "unknown band `{name}` (known: delta, theta, alpha, beta, gamma, or a {{name, low, high}} map)"
                        ))
                    })
            } else {
                let mut m = b.as_map()?;
                let band = BandDef {
                    name: m.require("name")?.as_str()?.to_string(),
                    low: m.require("low")?.as_f64()?,
                    high: m.require("high")?.as_f64()?,
                };
                m.finish()?;
                if !(band.low >= 0.0 && band.low < band.high) {
                    return Err(b.invalid(format!(
                        "invalid band edges ({}, {}): need 0 <= low < high",
                        band.low, band.high
                    )));
                }
                Ok(band)
            }
        })
        .collect()
}

fn parse_stats(node: &Node) -> PResult<Vec<StatKind>> {
    node.as_seq()?
        .iter()
        .map(|s| {
            let name = s.as_str()?;
            name.parse().map_err(|e: String| s.invalid(e))
        })
        .collect()
}

fn parse_selection(node: &Node) -> PResult<SelectionSpec> {
    let mut m = node.as_map()?;
    let standardize = match m.take("standardize") {
        Some(n) => n.as_bool()?,
        None => true,
    };
    // `correlation: ~` selects the default threshold; an absent key
    // disables pruning entirely. Same convention for `pca`.
    let correlation_threshold = match m.take("correlation") {
        Some(n) if n.is_null() => Some(0.9),
        Some(n) => Some(n.as_f64()?),
        None => None,
    };
    let pca_variance = match m.take("pca") {
        Some(n) if n.is_null() => Some(0.95),
        Some(n) => Some(n.as_f64()?),
        None => None,
    };
    m.finish()?;
    Ok(SelectionSpec { standardize, correlation_threshold, pca_variance })
}

fn parse_detection(node: &Node) -> PResult<DetectionSpec> {
    let mut m = node.as_map()?;
    let task_node = m.require("task")?;
    let task = match task_node.as_str()? {
        "classification" => TaskKind::Classification,
        "regression" => TaskKind::Regression,
        other => return Err(task_node.invalid(format!("unknown task `{other}`"))),
    };
    let algorithm = match m.take("algorithm") {
        Some(n) => {
            let name = n.as_str()?.to_string();
            let known = crate::scenario::CLASSIFIERS
                .iter()
                .chain(crate::scenario::REGRESSORS.iter());
            if !known.clone().any(|k| *k == name) {
                let valid = known.copied().collect::<Vec<_>>().join(", ");
                return Err(n.invalid(format!("unknown model `{name}` (valid: {valid})")));
            }
            name
        }
        None => match task {
            TaskKind::Classification => "rforest".to_string(),
            TaskKind::Regression => "rforest_reg".to_string(),
        },
    };
    let labels_node = m.require("labels")?;
    let label_source = {
        let mut lm = labels_node.as_map()?;
        let from_node = lm.require("from")?;
        let source = match from_node.as_str()? {
            "blocks" => LabelSource::Blocks,
            "subject" => LabelSource::Subject,
            "perclos" => LabelSource::Perclos {
                stream: lm.require("stream")?.as_str()?.to_string(),
                drowsy_threshold: lm.take_f64_or("drowsy_threshold", 0.15)?,
            },
            other => return Err(from_node.invalid(format!("unknown label source `{other}`"))),
        };
        lm.finish()?;
        source
    };
    let epoch_filter = m.take_opt_str("epoch_filter")?;
    let label_map: BTreeMap<String, String> = match m.take("label_map") {
        Some(n) => {
            let mm = n.as_map()?;
            let mut out = BTreeMap::new();
            for key in mm.keys() {
                let v = mm.get(&key).expect("key from keys()");
                out.insert(key, v.as_str()?.to_string());
            }
            out
        }
        None => BTreeMap::new(),
    };
    let classes: Vec<String> = match m.take("classes") {
        Some(n) => n.as_seq()?.iter().map(|c| c.as_str().map(str::to_string)).collect::<PResult<_>>()?,
        None => Vec::new(),
    };
    let positive_class = m.take_opt_str("positive")?;
    let one_vs_rest = match m.take("one_vs_rest") {
        Some(n) => n.as_bool()?,
        None => false,
    };
    let split = match m.take("split") {
        Some(n) => {
            let mut sm = n.as_map()?;
            let split = match (sm.take("holdout"), sm.take("folds")) {
                (Some(h), None) => SplitSpec::Holdout { test_fraction: h.as_f64()? },
                (None, Some(f)) => SplitSpec::KFold { folds: f.as_usize()? },
                (None, None) => {
                    return Err(n.invalid("split needs `holdout: <fraction>` or `folds: <k>`".into()))
                }
                (Some(_), Some(_)) => {
                    return Err(n.invalid("split takes `holdout` or `folds`, not both".into()))
                }
            };
            sm.finish()?;
            split
        }
        None => SplitSpec::default(),
    };
    let hyper = match m.take("hyper") {
        Some(n) => {
            let mut hm = n.as_map()?;
            let d = HyperParams::default();
            let hyper = HyperParams {
                knn_k: hm.take_usize_or("knn_k", d.knn_k)?,
                trees: hm.take_usize_or("trees", d.trees)?,
                max_depth: hm.take_usize_or("max_depth", d.max_depth)?,
                min_leaf: hm.take_usize_or("min_leaf", d.min_leaf)?,
            };
            hm.finish()?;
            hyper
        }
        None => HyperParams::default(),
    };
    m.finish()?;
    Ok(DetectionSpec {
        task,
        algorithm,
        label_source,
        epoch_filter,
        label_map,
        classes,
        positive_class,
        one_vs_rest,
        split,
        hyper,
    })
}

fn parse_action(node: &Node) -> PResult<ActionRule> {
    let mut m = node.as_map()?;
    let rule = ActionRule {
        when_label: m.require("when")?.as_str()?.to_string(),
        min_confidence: m.take_f64_or("min_confidence", 0.0)?,
        action: m.require("action")?.as_str()?.to_string(),
        debounce: m.take_f64_or("debounce", 0.0)?,
    };
    m.finish()?;
    Ok(rule)
}

// ---------------------------------------------------------------------------
// Walker machinery
// ---------------------------------------------------------------------------

/// A value paired with its document path, for error reporting.
pub(super) struct Node<'a> {
    path: String,
    value: &'a Value,
}

impl<'a> Node<'a> {
    fn invalid(&self, message: String) -> ScenarioError {
        ScenarioError::Invalid { path: self.path.clone(), message }
    }

    fn wrong(&self, expected: &'static str) -> ScenarioError {
        ScenarioError::WrongType { path: self.path.clone(), expected }
    }

    fn is_null(&self) -> bool {
        self.value.is_null()
    }

    fn as_str(&self) -> PResult<&'a str> {
        self.value.as_str().ok_or_else(|| self.wrong("a string"))
    }

    fn as_bool(&self) -> PResult<bool> {
        self.value.as_bool().ok_or_else(|| self.wrong("a boolean"))
    }

    fn as_f64(&self) -> PResult<f64> {
        self.value.as_f64().ok_or_else(|| self.wrong("a number"))
    }

    fn as_u64(&self) -> PResult<u64> {
        self.value.as_u64().ok_or_else(|| self.wrong("a non-negative integer"))
    }

    fn as_usize(&self) -> PResult<usize> {
        Ok(self.as_u64()? as usize)
    }

    fn as_seq(&self) -> PResult<Vec<Node<'a>>> {
        let seq = self.value.as_sequence().ok_or_else(|| self.wrong("a list"))?;
        Ok(seq
            .iter()
            .enumerate()
            .map(|(i, v)| Node { path: format!("{}[{}]", self.path, i), value: v })
            .collect())
    }

    fn as_map(&self) -> PResult<MapWalker<'a>> {
        MapWalker::new(&self.path, self.value)
    }
}

/// Tracks which keys of a mapping were consumed; leftovers are errors.
pub(super) struct MapWalker<'a> {
    path: String,
    map: &'a Mapping,
    taken: Vec<String>,
}

impl<'a> MapWalker<'a> {
    fn new(path: &str, value: &'a Value) -> PResult<Self> {
        let map = value
            .as_mapping()
            .ok_or_else(|| ScenarioError::WrongType { path: path.to_string(), expected: "a mapping" })?;
        Ok(Self { path: path.to_string(), map, taken: Vec::new() })
    }

    fn keys(&self) -> Vec<String> {
        self.map
            .keys()
            .filter_map(|k| k.as_str().map(str::to_string))
            .collect()
    }

    fn get(&self, key: &str) -> Option<Node<'a>> {
        self.map
            .get(Value::String(key.to_string()))
            .map(|v| Node { path: format!("{}.{}", self.path, key), value: v })
    }

    fn take(&mut self, key: &str) -> Option<Node<'a>> {
        let node = self.get(key)?;
        self.taken.push(key.to_string());
        Some(node)
    }

    fn require(&mut self, key: &str) -> PResult<Node<'a>> {
        self.take(key).ok_or_else(|| ScenarioError::MissingKey {
            path: self.path.clone(),
            key: key.to_string(),
        })
    }

    fn take_opt_str(&mut self, key: &str) -> PResult<Option<String>> {
        match self.take(key) {
            Some(n) if n.is_null() => Ok(None),
            Some(n) => Ok(Some(n.as_str()?.to_string())),
            None => Ok(None),
        }
    }

    fn take_f64_or(&mut self, key: &str, default: f64) -> PResult<f64> {
        match self.take(key) {
            Some(n) => n.as_f64(),
            None => Ok(default),
        }
    }

    fn take_usize_or(&mut self, key: &str, default: usize) -> PResult<usize> {
        match self.take(key) {
            Some(n) => n.as_usize(),
            None => Ok(default),
        }
    }

    fn finish(self) -> PResult<()> {
        for key in self.map.keys() {
            let name = match key.as_str() {
                Some(s) => s.to_string(),
                None => format!("{key:?}"),
            };
            if !self.taken.contains(&name) {
                return Err(ScenarioError::UnknownKey { path: self.path, key: name });
            }
        }
        Ok(())
    }
}
