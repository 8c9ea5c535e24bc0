//! Scenario validation and pipeline resolution.
//!
//! `validate_scenario` never fails: it returns findings (errors and
//! warnings) with the offending document path. `resolve_pipeline` refuses
//! configs with error findings and otherwise produces an executable plan
//! with concrete per-stage sample rates.

use std::collections::BTreeMap;

use super::*;
use crate::acquire::StreamKind;
use crate::dsp::filter::MAX_ORDER;

/// Classification algorithm identifiers.
pub const CLASSIFIERS: [&str; 6] = ["knn", "logistic", "lda", "qda", "dtree", "rforest"];
/// Regression algorithm identifiers.
pub const REGRESSORS: [&str; 2] = ["linreg", "rforest_reg"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// One validation finding, anchored to a document path.
#[derive(Debug, Clone)]
pub struct Finding {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: {}: {}", tag, self.path, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn summary(&self) -> String {
        self.findings.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("\n")
    }

    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        });
    }
}

/// One resolved stage with its concrete input/output rates.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedStage {
    pub spec: ProcessingStageSpec,
    pub input_rate: f64,
    pub output_rate: f64,
}

/// The resolved epoching rule, in samples at the processed rate.
#[derive(Debug, Clone, PartialEq)]
pub enum PlannedEpoch {
    Fixed { duration: f64, samples: usize, srate: f64 },
    Event { pre: f64, post: f64, samples: usize, srate: f64, tags: Vec<String>, label_key: String },
}

impl PlannedEpoch {
    pub fn samples(&self) -> usize {
        match self {
            PlannedEpoch::Fixed { samples, .. } | PlannedEpoch::Event { samples, .. } => *samples,
        }
    }

    pub fn srate(&self) -> f64 {
        match self {
            PlannedEpoch::Fixed { srate, .. } | PlannedEpoch::Event { srate, .. } => *srate,
        }
    }
}

/// Executable processing plan for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelinePlan {
    /// The stream the processing chain runs on.
    pub master_stream: String,
    pub master_channels: Vec<String>,
    /// Signal stages in declared order (the epoch stage is split out).
    pub stages: Vec<PlannedStage>,
    pub epoch: Option<PlannedEpoch>,
    /// Output rate of every processing stage in declared order, epoch
    /// stage included (it preserves rate).
    pub stage_output_rates: Vec<f64>,
    /// Per-stream sample rate after processing (master: final processed
    /// rate; auxiliary streams keep their native rate).
    pub final_rates: BTreeMap<String, f64>,
    /// Feature specs with bands clipped to each stream's representable
    /// range; bands entirely above Nyquist removed.
    pub feature_specs: Vec<crate::features::FeatureSpec>,
}

/// Check every cross-field invariant the parser cannot see.
pub fn validate_scenario(cfg: &ScenarioConfig) -> ValidationReport {
    let mut report = ValidationReport::default();

    // Stream-level invariants.
    for (i, s) in cfg.streams.iter().enumerate() {
        let path = format!("$.streams[{i}]");
        if cfg.streams.iter().filter(|o| o.name == s.name).count() > 1 {
            report.error(&path, format!("duplicate stream name `{}`", s.name));
        }
        for (j, ch) in s.channels.iter().enumerate() {
            if s.channels[..j].contains(ch) {
                report.error(&path, format!("duplicate channel label `{ch}`"));
            }
        }
    }
    if cfg.sync.max_gap <= 0.0 {
        report.error("$.sync.max_gap", "must be > 0");
    }
    if let Some(t) = cfg.sync.tolerance {
        if t <= 0.0 {
            report.error("$.sync.tolerance", "must be > 0");
        }
    }

    let master = cfg.master_stream().to_string();
    let mut rate = match cfg.stream(&master) {
        Some(s) => s.srate,
        None => {
            report.error("$.processing", format!("processing targets undeclared stream `{master}`"));
            return report;
        }
    };
    let master_channels = cfg.stream(&master).map(|s| s.channels.len()).unwrap_or(0);

    // Walk the processing chain, tracking the evolving sample rate.
    let n_stages = cfg.processing.len();
    for (i, stage) in cfg.processing.iter().enumerate() {
        let path = format!("$.processing[{i}]");
        if let Some(target) = stage.stream() {
            if cfg.stream(target).is_none() {
                report.error(&path, format!("references undeclared stream `{target}`"));
                continue;
            }
            if target != master {
                report.error(
                    &path,
                    format!(
                        "processing targets two streams (`{master}` and `{target}`); one chain per scenario"
                    ),
                );
            }
        }
        let nyquist = rate / 2.0;
        match stage {
            ProcessingStageSpec::Notch { freq, q, .. } => {
                if !(*freq > 0.0 && *freq < nyquist) {
                    report.error(&path, format!("notch {freq} Hz outside (0, {nyquist}) Hz"));
                }
                if !(*q > 0.0) {
                    report.error(&path, format!("quality factor must be > 0, got {q}"));
                }
            }
            ProcessingStageSpec::Bandpass { low, high, order, .. } => {
                if !(*low >= 0.0 && low < high && *high < nyquist) {
                    report.error(
                        &path,
                        format!("invalid band edges ({low}, {high}) Hz at rate {rate} Hz"),
                    );
                }
                if *order == 0 || *order > MAX_ORDER {
                    report.error(&path, format!("order must lie in 1..={MAX_ORDER}, got {order}"));
                }
            }
            ProcessingStageSpec::Resample { target, .. } => {
                if !(*target > 0.0) {
                    report.error(&path, format!("target rate must be > 0, got {target}"));
                } else {
                    if *target > nyquist {
                        report.warn(
                            &path,
                            format!(
                                "upsampling declared: target {target} Hz above half the source rate {rate} Hz"
                            ),
                        );
                    }
                    if crate::dsp::resample::rational_ratio(rate, *target).is_err() {
                        report.error(
                            &path,
                            format!("ratio {rate} -> {target} not rational within denominator 1000"),
                        );
                    }
                    rate = *target;
                }
            }
            ProcessingStageSpec::Ica { components, fit_seconds, eog_stream, reject_threshold, .. } => {
                if let Some(c) = components {
                    if *c == 0 || *c > master_channels {
                        report.error(
                            &path,
                            format!("components must lie in 1..={master_channels}, got {c}"),
                        );
                    }
                }
                if !(*fit_seconds > 0.0) {
                    report.error(&path, format!("fit_seconds must be > 0, got {fit_seconds}"));
                }
                if !(*reject_threshold > 0.0 && *reject_threshold <= 1.0) {
                    report.error(&path, format!("reject_threshold must lie in (0, 1], got {reject_threshold}"));
                }
                if let Some(eog) = eog_stream {
                    match cfg.stream(eog) {
                        None => report.error(&path, format!("eog_stream `{eog}` not declared")),
                        Some(s) if s.kind != StreamKind::Eog => report.error(
                            &path,
                            format!("eog_stream `{eog}` has kind `{}`, expected `eog`", s.kind.as_str()),
                        ),
                        Some(_) => {}
                    }
                }
            }
            ProcessingStageSpec::EpochFixed { duration } => {
                if !(*duration > 0.0) || duration * rate < 1.0 {
                    report.error(&path, format!("epoch duration {duration} s is shorter than one sample at {rate} Hz"));
                }
            }
            ProcessingStageSpec::EpochEvent { pre, post, tags, .. } => {
                if *pre < 0.0 || *post < 0.0 || pre + post <= 0.0 {
                    report.error(&path, format!("window (pre={pre}, post={post}) must be non-negative with pre+post > 0"));
                }
                if tags.is_empty() {
                    report.error(&path, "no event tags declared");
                }
                if !cfg.streams.iter().any(|s| s.event_capable()) {
                    report.error(
                        &path,
                        "event-locked epoching declared but no declared stream can deliver events",
                    );
                }
            }
        }
        if stage.is_epoch() && i + 1 != n_stages {
            report.error(&path, "epoching must be the last processing stage");
        }
        if stage.is_epoch() && cfg.processing[..i].iter().any(|s| s.is_epoch()) {
            report.error(&path, "more than one epoch stage declared");
        }
    }

    // Feature references and band representability at final rates.
    let final_rates = final_rates(cfg, &master);
    for (i, f) in cfg.features.iter().enumerate() {
        let path = format!("$.features[{i}]");
        let Some(stream_rate) = final_rates.get(f.stream()) else {
            report.error(&path, format!("references undeclared stream `{}`", f.stream()));
            continue;
        };
        if matches!(f, crate::features::FeatureSpec::Raw { .. }) && f.stream() != master {
            // Auxiliary windows are cut by time range at the stream's own
            // rate, so their sample counts can differ by one between
            // epochs; raw features need a fixed length.
            report.error(
                &path,
                format!("raw features require the processed stream `{master}`, not `{}`", f.stream()),
            );
        }
        let nyq = stream_rate / 2.0;
        let bands = match f {
            crate::features::FeatureSpec::BandPower { bands, .. }
            | crate::features::FeatureSpec::BandStats { bands, .. } => bands.as_slice(),
            crate::features::FeatureSpec::Perclos { closed_threshold, .. } => {
                if !(*closed_threshold >= 0.0 && *closed_threshold <= 1.0) {
                    report.error(&path, format!("closed_threshold must lie in [0, 1], got {closed_threshold}"));
                }
                &[]
            }
            _ => &[],
        };
        for b in bands {
            if b.low >= nyq {
                report.warn(
                    &path,
                    format!(
                        "band `{}` ({}-{} Hz) lies entirely above the processed Nyquist {nyq} Hz and will be dropped",
                        b.name, b.low, b.high
                    ),
                );
            } else if b.high > nyq {
                report.warn(
                    &path,
                    format!(
                        "band `{}` ({}-{} Hz) extends past the processed Nyquist {nyq} Hz and will be clipped",
                        b.name, b.low, b.high
                    ),
                );
            }
        }
    }

    validate_detection(cfg, &mut report);

    for (i, a) in cfg.actions.iter().enumerate() {
        let path = format!("$.actions[{i}]");
        if !(0.0..=1.0).contains(&a.min_confidence) {
            report.error(&path, format!("min_confidence must lie in [0, 1], got {}", a.min_confidence));
        }
        if a.debounce < 0.0 {
            report.error(&path, format!("debounce must be >= 0, got {}", a.debounce));
        }
    }

    report
}

fn validate_detection(cfg: &ScenarioConfig, report: &mut ValidationReport) {
    let d = &cfg.detection;
    let path = "$.detection";
    let valid: &[&str] = match d.task {
        TaskKind::Classification => &CLASSIFIERS,
        TaskKind::Regression => &REGRESSORS,
    };
    if !valid.contains(&d.algorithm.as_str()) {
        report.error(
            path,
            format!(
                "algorithm `{}` not usable for {} (valid: {})",
                d.algorithm,
                d.task.as_str(),
                valid.join(", ")
            ),
        );
    }
    match &d.label_source {
        LabelSource::Perclos { stream, drowsy_threshold } => {
            match cfg.stream(stream) {
                None => report.error(path, format!("label stream `{stream}` not declared")),
                Some(s) if s.kind != StreamKind::EyeTracking => report.warn(
                    path,
                    format!("label stream `{stream}` has kind `{}`, expected eye_tracking", s.kind.as_str()),
                ),
                Some(_) => {}
            }
            if !(*drowsy_threshold > 0.0 && *drowsy_threshold < 1.0) {
                report.error(path, format!("drowsy_threshold must lie in (0, 1), got {drowsy_threshold}"));
            }
        }
        LabelSource::Blocks | LabelSource::Subject => {
            if !cfg.streams.iter().any(|s| s.event_capable()) {
                report.error(path, "labels need an event-capable stream (block/stimulus events)");
            }
        }
    }
    if d.task == TaskKind::Regression {
        if !d.label_map.is_empty() || !d.classes.is_empty() || d.positive_class.is_some() {
            report.error(path, "label_map/classes/positive are classification-only settings");
        }
        if d.one_vs_rest {
            report.error(path, "one_vs_rest is classification-only");
        }
        if !matches!(d.label_source, LabelSource::Perclos { .. }) {
            report.error(path, "regression needs a perclos label source (continuous target)");
        }
    }
    if d.one_vs_rest && !matches!(d.label_source, LabelSource::Subject) {
        report.error(path, "one_vs_rest requires subject labels");
    }
    if let (Some(pos), false) = (&d.positive_class, d.classes.is_empty()) {
        if !d.classes.contains(pos) {
            report.error(path, format!("positive class `{pos}` not in declared classes"));
        }
    }
    match d.split {
        SplitSpec::Holdout { test_fraction } => {
            if !(test_fraction > 0.0 && test_fraction < 1.0) {
                report.error(path, format!("holdout fraction must lie in (0, 1), got {test_fraction}"));
            }
        }
        SplitSpec::KFold { folds } => {
            if folds < 2 {
                report.error(path, format!("need at least 2 folds, got {folds}"));
            }
        }
    }
    let h = &d.hyper;
    if h.knn_k == 0 || h.trees == 0 || h.max_depth == 0 || h.min_leaf == 0 {
        report.error(path, "hyperparameters must be >= 1");
    }
}

/// Final per-stream rates: the master's processed rate, native elsewhere.
fn final_rates(cfg: &ScenarioConfig, master: &str) -> BTreeMap<String, f64> {
    let mut rates: BTreeMap<String, f64> =
        cfg.streams.iter().map(|s| (s.name.clone(), s.srate)).collect();
    if let Some(r) = rates.get(master).copied() {
        let mut rate = r;
        for stage in &cfg.processing {
            if let ProcessingStageSpec::Resample { target, .. } = stage {
                if *target > 0.0 {
                    rate = *target;
                }
            }
        }
        rates.insert(master.to_string(), rate);
    }
    rates
}

/// Turn a validated config into an executable plan.
///
/// Deterministic: identical configs give identical plans. Fails when the
/// config has validation errors.
pub fn resolve_pipeline(cfg: &ScenarioConfig) -> Result<PipelinePlan, ScenarioError> {
    let report = validate_scenario(cfg);
    if report.has_errors() {
        let msg = report.errors().map(|f| f.to_string()).collect::<Vec<_>>().join("\n");
        return Err(ScenarioError::FailedValidation(msg));
    }

    let master = cfg.master_stream().to_string();
    let master_desc = cfg.stream(&master).expect("validated");
    let mut rate = master_desc.srate;
    let mut stages = Vec::new();
    let mut stage_output_rates = Vec::new();
    let mut epoch = None;

    for stage in &cfg.processing {
        let input_rate = rate;
        match stage {
            ProcessingStageSpec::EpochFixed { duration } => {
                let samples = (duration * rate).round() as usize;
                epoch = Some(PlannedEpoch::Fixed { duration: *duration, samples, srate: rate });
            }
            ProcessingStageSpec::EpochEvent { pre, post, tags, label_key, samples_override } => {
                let samples = samples_override.unwrap_or(((pre + post) * rate).round() as usize);
                epoch = Some(PlannedEpoch::Event {
                    pre: *pre,
                    post: *post,
                    samples,
                    srate: rate,
                    tags: tags.clone(),
                    label_key: label_key.clone(),
                });
            }
            other => {
                if let ProcessingStageSpec::Resample { target, .. } = other {
                    rate = *target;
                }
                // Pin the stage to the master stream explicitly.
                let mut spec = other.clone();
                set_stream(&mut spec, &master);
                stages.push(PlannedStage { spec, input_rate, output_rate: rate });
            }
        }
        stage_output_rates.push(rate);
    }

    let final_rates = final_rates(cfg, &master);
    let feature_specs = cfg
        .features
        .iter()
        .map(|f| clip_feature_bands(f, final_rates[f.stream()] / 2.0))
        .collect();

    Ok(PipelinePlan {
        master_stream: master,
        master_channels: master_desc.channels.clone(),
        stages,
        epoch,
        stage_output_rates,
        final_rates,
        feature_specs,
    })
}

fn set_stream(spec: &mut ProcessingStageSpec, master: &str) {
    match spec {
        ProcessingStageSpec::Notch { stream, .. }
        | ProcessingStageSpec::Bandpass { stream, .. }
        | ProcessingStageSpec::Resample { stream, .. }
        | ProcessingStageSpec::Ica { stream, .. } => *stream = Some(master.to_string()),
        _ => {}
    }
}

fn clip_feature_bands(
    spec: &crate::features::FeatureSpec,
    nyquist: f64,
) -> crate::features::FeatureSpec {
    use crate::features::FeatureSpec as F;
    let clip = |bands: &[crate::features::BandDef]| {
        bands
            .iter()
            .filter(|b| b.low < nyquist)
            .map(|b| crate::features::BandDef {
                name: b.name.clone(),
                low: b.low,
                high: b.high.min(nyquist),
            })
            .collect::<Vec<_>>()
    };
    match spec {
        F::BandPower { stream, bands } => F::BandPower { stream: stream.clone(), bands: clip(bands) },
        F::BandStats { stream, bands, stats } => {
            F::BandStats { stream: stream.clone(), bands: clip(bands), stats: stats.clone() }
        }
        other => other.clone(),
    }
}
