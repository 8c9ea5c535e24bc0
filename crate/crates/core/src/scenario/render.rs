//! Serialize a scenario back to YAML.
//!
//! The rendered document is explicit: defaults that parsing would fill in
//! are written out, so a rendered file is self-describing and parses back
//! to an equal `ScenarioConfig` (round-trip property).

use serde_yaml::{Mapping, Value};

use super::*;
use crate::features::{BandDef, FeatureSpec, StatKind};

pub fn render_scenario(cfg: &ScenarioConfig) -> String {
    let mut root = Mapping::new();
    put(&mut root, "version", cfg.version);
    put(&mut root, "scenario", cfg.scenario_id.as_str());
    put(&mut root, "seed", cfg.seed);

    let streams: Vec<Value> = cfg.streams.iter().map(render_stream).collect();
    put(&mut root, "streams", streams);

    let mut sync = Mapping::new();
    if let Some(tol) = cfg.sync.tolerance {
        put(&mut sync, "tolerance", tol);
    }
    put(&mut sync, "max_gap", cfg.sync.max_gap);
    put(&mut root, "sync", sync);

    let processing: Vec<Value> = cfg.processing.iter().map(render_stage).collect();
    put(&mut root, "processing", processing);

    let features: Vec<Value> = cfg.features.iter().map(render_feature).collect();
    put(&mut root, "features", features);

    let mut selection = Mapping::new();
    put(&mut selection, "standardize", cfg.selection.standardize);
    if let Some(t) = cfg.selection.correlation_threshold {
        put(&mut selection, "correlation", t);
    }
    if let Some(v) = cfg.selection.pca_variance {
        put(&mut selection, "pca", v);
    }
    put(&mut root, "selection", selection);

    put(&mut root, "detection", render_detection(&cfg.detection));

    let actions: Vec<Value> = cfg
        .actions
        .iter()
        .map(|r| {
            let mut m = Mapping::new();
            put(&mut m, "when", r.when_label.as_str());
            put(&mut m, "min_confidence", r.min_confidence);
            put(&mut m, "action", r.action.as_str());
            put(&mut m, "debounce", r.debounce);
            Value::Mapping(m)
        })
        .collect();
    put(&mut root, "actions", actions);

    serde_yaml::to_string(&Value::Mapping(root)).expect("value tree serializes")
}

fn render_stream(s: &StreamDescriptor) -> Value {
    let mut m = Mapping::new();
    put(&mut m, "name", s.name.as_str());
    put(&mut m, "kind", s.kind.as_str());
    put(&mut m, "channels", s.channels.clone());
    put(&mut m, "srate", s.srate);
    put(&mut m, "units", s.units.as_str());
    put(&mut m, "source", s.source.as_str());
    put(&mut m, "emits_events", s.emits_events);
    Value::Mapping(m)
}

fn render_stage(stage: &ProcessingStageSpec) -> Value {
    let mut m = Mapping::new();
    put(&mut m, "stage", stage.stage_name());
    match stage {
        ProcessingStageSpec::Notch { stream, freq, q } => {
            put_opt_str(&mut m, "stream", stream);
            put(&mut m, "freq", *freq);
            put(&mut m, "q", *q);
        }
        ProcessingStageSpec::Bandpass { stream, low, high, order } => {
            put_opt_str(&mut m, "stream", stream);
            put(&mut m, "low", *low);
            put(&mut m, "high", *high);
            put(&mut m, "order", *order as u64);
        }
        ProcessingStageSpec::Resample { stream, target } => {
            put_opt_str(&mut m, "stream", stream);
            put(&mut m, "target", *target);
        }
        ProcessingStageSpec::Ica { stream, components, fit_seconds, eog_stream, reject_threshold } => {
            put_opt_str(&mut m, "stream", stream);
            if let Some(c) = components {
                put(&mut m, "components", *c as u64);
            }
            put(&mut m, "fit_seconds", *fit_seconds);
            put_opt_str(&mut m, "eog_stream", eog_stream);
            put(&mut m, "reject_threshold", *reject_threshold);
        }
        ProcessingStageSpec::EpochFixed { duration } => {
            put(&mut m, "duration", *duration);
        }
        ProcessingStageSpec::EpochEvent { pre, post, tags, label_key, samples_override } => {
            put(&mut m, "pre", *pre);
            put(&mut m, "post", *post);
            put(&mut m, "tags", tags.clone());
            put(&mut m, "label_key", label_key.as_str());
            if let Some(n) = samples_override {
                put(&mut m, "samples_override", *n as u64);
            }
        }
    }
    Value::Mapping(m)
}

fn render_feature(f: &FeatureSpec) -> Value {
    let mut m = Mapping::new();
    match f {
        FeatureSpec::BandPower { stream, bands } => {
            put(&mut m, "feature", "band_power");
            put(&mut m, "stream", stream.as_str());
            put(&mut m, "bands", render_bands(bands));
        }
        FeatureSpec::BandStats { stream, bands, stats } => {
            put(&mut m, "feature", "band_stats");
            put(&mut m, "stream", stream.as_str());
            put(&mut m, "bands", render_bands(bands));
            put(&mut m, "stats", render_stats(stats));
        }
        FeatureSpec::SpectralEntropy { stream } => {
            put(&mut m, "feature", "spectral_entropy");
            put(&mut m, "stream", stream.as_str());
        }
        FeatureSpec::TimeStats { stream, stats } => {
            put(&mut m, "feature", "time_stats");
            put(&mut m, "stream", stream.as_str());
            put(&mut m, "stats", render_stats(stats));
        }
        FeatureSpec::Hjorth { stream } => {
            put(&mut m, "feature", "hjorth");
            put(&mut m, "stream", stream.as_str());
        }
        FeatureSpec::Perclos { stream, closed_threshold } => {
            put(&mut m, "feature", "perclos");
            put(&mut m, "stream", stream.as_str());
            put(&mut m, "closed_threshold", *closed_threshold);
        }
        FeatureSpec::Raw { stream } => {
            put(&mut m, "feature", "raw");
            put(&mut m, "stream", stream.as_str());
        }
    }
    Value::Mapping(m)
}

fn render_bands(bands: &[BandDef]) -> Vec<Value> {
    bands
        .iter()
        .map(|b| {
            let mut m = Mapping::new();
            put(&mut m, "name", b.name.as_str());
            put(&mut m, "low", b.low);
            put(&mut m, "high", b.high);
            Value::Mapping(m)
        })
        .collect()
}

fn render_stats(stats: &[StatKind]) -> Vec<Value> {
    stats.iter().map(|s| Value::from(s.name())).collect()
}

fn render_detection(d: &DetectionSpec) -> Value {
    let mut m = Mapping::new();
    put(&mut m, "task", d.task.as_str());
    put(&mut m, "algorithm", d.algorithm.as_str());
    let mut labels = Mapping::new();
    match &d.label_source {
        LabelSource::Blocks => put(&mut labels, "from", "blocks"),
        LabelSource::Subject => put(&mut labels, "from", "subject"),
        LabelSource::Perclos { stream, drowsy_threshold } => {
            put(&mut labels, "from", "perclos");
            put(&mut labels, "stream", stream.as_str());
            put(&mut labels, "drowsy_threshold", *drowsy_threshold);
        }
    }
    put(&mut m, "labels", labels);
    if let Some(f) = &d.epoch_filter {
        put(&mut m, "epoch_filter", f.as_str());
    }
    if !d.label_map.is_empty() {
        let mut lm = Mapping::new();
        for (k, v) in &d.label_map {
            put(&mut lm, k.as_str(), v.as_str());
        }
        put(&mut m, "label_map", lm);
    }
    if !d.classes.is_empty() {
        put(&mut m, "classes", d.classes.clone());
    }
    if let Some(p) = &d.positive_class {
        put(&mut m, "positive", p.as_str());
    }
    put(&mut m, "one_vs_rest", d.one_vs_rest);
    let mut split = Mapping::new();
    match d.split {
        SplitSpec::Holdout { test_fraction } => put(&mut split, "holdout", test_fraction),
        SplitSpec::KFold { folds } => put(&mut split, "folds", folds as u64),
    }
    put(&mut m, "split", split);
    let mut hyper = Mapping::new();
    put(&mut hyper, "knn_k", d.hyper.knn_k as u64);
    put(&mut hyper, "trees", d.hyper.trees as u64);
    put(&mut hyper, "max_depth", d.hyper.max_depth as u64);
    put(&mut hyper, "min_leaf", d.hyper.min_leaf as u64);
    put(&mut m, "hyper", hyper);
    Value::Mapping(m)
}

fn put(map: &mut Mapping, key: &str, value: impl Into<Value>) {
    map.insert(Value::from(key), value.into());
}

fn put_opt_str(map: &mut Mapping, key: &str, value: &Option<String>) {
    if let Some(v) = value {
        put(map, key, v.as_str());
    }
}
