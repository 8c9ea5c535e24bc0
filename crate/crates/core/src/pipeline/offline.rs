//! Batch processing: one recorded session through a resolved plan, out the
//! other end as labeled epochs and a feature matrix.
//!
//! The front end fuses every declared stream onto the fastest stream's
//! clock, exactly as the incremental engine does, so both paths see the
//! same sample grid. Auxiliary streams (EOG, eye tracking, telemetry) are
//! never resampled: feature windows cut them by time range at their native
//! rate.

use ndarray::{Array1, Array2};

use super::{
    blocks_from_events, cut_window, forward_fill_at, lock_events_from, PipelineError,
};
use crate::acquire::session::{SessionData, SessionRecord};
use crate::acquire::sync::{SyncConfig, SyncOutput, Synchronizer};
use crate::acquire::EventRecord;
use crate::dsp::epoch::{epoch_around_events, epoch_fixed, Epoch, EventEpochReport};
use crate::dsp::ica::{fast_ica, remove_artifact_components, select_eog_components, IcaModel};
use crate::dsp::{apply_filter, design_bandpass, design_notch, resample, FilterMode};
use crate::features::{assemble_features, perclos, FeatureMatrix, PsdConfig, StreamWindow};
use crate::scenario::{
    LabelSource, PipelinePlan, PlannedEpoch, ProcessingStageSpec, ScenarioConfig,
};

/// Eye-openness value at or below which a sample counts as closed when the
/// pipeline derives ground-truth PERCLOS from an eye-tracking stream.
/// Openness is normalized to [0, 1]; 0.2 sits between full closures
/// (near 0) and the open-eye plateau (near 1) with margin on both sides.
pub const EYE_CLOSED_THRESHOLD: f64 = 0.2;

/// A fitted artifact-removal stage: the decomposition plus which
/// components were subtracted.
#[derive(Debug, Clone, PartialEq)]
pub struct IcaOutcome {
    pub model: IcaModel,
    /// Component indices removed from the signal (ascending).
    pub rejected: Vec<usize>,
    /// How many samples the decomposition was fitted on.
    pub fit_samples: usize,
}

/// Everything a batch run produces for one session.
#[derive(Debug, Clone)]
pub struct ProcessedSession {
    pub record: SessionRecord,
    /// Name of the processed (master) stream.
    pub master_stream: String,
    /// Time of the first fused frame; epoch times count from here.
    pub t0: f64,
    /// Sample rate of the processed master signal.
    pub processed_rate: f64,
    /// Analysis windows cut from the processed master signal. Labels come
    /// from condition blocks (fixed windows, midpoint rule) or from the
    /// triggering event (event-locked windows).
    pub epochs: Vec<Epoch>,
    /// One feature row per epoch; labels mirror the epochs'.
    pub features: FeatureMatrix,
    /// Ground-truth PERCLOS per epoch when the scenario labels by
    /// perclos; empty otherwise.
    pub truth_values: Vec<f64>,
    /// Master-timeline holes found during fusion.
    pub gaps: Vec<EventRecord>,
    pub ica: Option<IcaOutcome>,
    /// Dropped-event accounting for event-locked epoching.
    pub epoch_report: Option<EventEpochReport>,
}

/// Native-rate view of one stream's recording.
pub(crate) struct NativeStream<'a> {
    pub ts: &'a [f64],
    pub values: ndarray::ArrayView2<'a, f64>,
}

/// Fit an artifact decomposition on a window of the processed chain and
/// decide which components to reject against an ocular reference.
///
/// `row_times` gives the session time of every fit-window row so the
/// reference channels (recorded at their own rate) can be forward-filled
/// onto the fit grid. A component is rejected when its correlation with
/// any reference channel exceeds the threshold.
pub(crate) fn fit_ica_outcome(
    fit_data: &Array2<f64>,
    row_times: &[f64],
    components: Option<usize>,
    seed: u64,
    eog: Option<&NativeStream<'_>>,
    reject_threshold: f64,
) -> Result<IcaOutcome, PipelineError> {
    let k = components.unwrap_or(fit_data.ncols());
    let (model, _report) = fast_ica(fit_data, k, seed)?;
    let mut rejected: Vec<usize> = Vec::new();
    if let Some(eog) = eog.filter(|e| !e.ts.is_empty()) {
        for ch in 0..eog.values.ncols() {
            let col: Vec<f64> = eog.values.column(ch).to_vec();
            let reference = Array1::from(forward_fill_at(eog.ts, &col, row_times));
            for c in select_eog_components(fit_data, &model, &reference, reject_threshold)? {
                if !rejected.contains(&c) {
                    rejected.push(c);
                }
            }
        }
        rejected.sort_unstable();
    }
    Ok(IcaOutcome { model, rejected, fit_samples: fit_data.nrows() })
}

/// Map every declared stream to its index in the session, checking shape.
pub(crate) fn map_streams(
    data: &SessionData,
    cfg: &ScenarioConfig,
) -> Result<Vec<usize>, PipelineError> {
    cfg.streams
        .iter()
        .map(|s| {
            let idx = data
                .stream_index(&s.name)
                .ok_or_else(|| PipelineError::MissingStream { name: s.name.clone() })?;
            let meta = &data.record.streams[idx];
            if meta.channels.len() != s.channels.len() {
                return Err(PipelineError::ChannelMismatch {
                    stream: s.name.clone(),
                    expected: s.channels.len(),
                    got: meta.channels.len(),
                });
            }
            if (meta.srate - s.srate).abs() > 1e-9 * s.srate.max(1.0) {
                return Err(PipelineError::RateMismatch {
                    stream: s.name.clone(),
                    expected: s.srate,
                    got: meta.srate,
                });
            }
            Ok(idx)
        })
        .collect()
}

/// Index of the fusion master (highest rate; ties to the earliest) among
/// the declared streams, which must be the processed stream.
pub(crate) fn require_master_fastest(
    cfg: &ScenarioConfig,
    plan: &PipelinePlan,
) -> Result<usize, PipelineError> {
    let sync_master = cfg
        .streams
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.srate.partial_cmp(&b.srate).unwrap().then(ib.cmp(ia)))
        .map(|(i, _)| i)
        .expect("validated configs have streams");
    if cfg.streams[sync_master].name != plan.master_stream {
        return Err(PipelineError::MasterNotFastest {
            plan: plan.master_stream.clone(),
            sync: cfg.streams[sync_master].name.clone(),
        });
    }
    Ok(sync_master)
}

/// Auxiliary streams (declared order) whose samples feature extraction or
/// ground-truth labeling will need.
pub(crate) fn aux_stream_names(cfg: &ScenarioConfig, plan: &PipelinePlan) -> Vec<String> {
    let mut needed: Vec<String> = Vec::new();
    let mut want = |name: &str| {
        if name != plan.master_stream && !needed.iter().any(|n| n == name) {
            needed.push(name.to_string());
        }
    };
    for spec in &plan.feature_specs {
        want(spec.stream());
    }
    if let LabelSource::Perclos { stream, .. } = &cfg.detection.label_source {
        want(stream);
    }
    // Keep declared order for deterministic window layout.
    let mut ordered: Vec<String> = Vec::new();
    for s in &cfg.streams {
        if needed.iter().any(|n| n == &s.name) {
            ordered.push(s.name.clone());
        }
    }
    ordered
}

/// Run one recorded session through the plan.
///
/// `mode` selects the filter form: zero-phase for training runs (the whole
/// signal is available, so acausal filtering is legitimate), causal for
/// runs that must match the incremental engine sample for sample.
pub fn process_session(
    data: &SessionData,
    cfg: &ScenarioConfig,
    plan: &PipelinePlan,
    mode: FilterMode,
) -> Result<ProcessedSession, PipelineError> {
    let planned_epoch = plan.epoch.as_ref().ok_or(PipelineError::EpochRequired)?;
    let order = map_streams(data, cfg)?;
    let master_pos = require_master_fastest(cfg, plan)?;

    // Fuse every declared stream onto the master clock.
    let metas: Vec<_> = order.iter().map(|&i| data.record.streams[i].clone()).collect();
    let sync_cfg = SyncConfig { tolerance: cfg.sync.tolerance, max_gap: cfg.sync.max_gap };
    let mut sync = Synchronizer::new(&metas, &sync_cfg)?;
    for (sync_idx, &sess_idx) in order.iter().enumerate() {
        if !data.data[sess_idx].is_empty() {
            sync.push(sync_idx, &data.data[sess_idx])?;
        }
    }
    sync.finish_all();

    let channels = cfg.streams[master_pos].channels.len();
    let mut master_rows: Vec<f64> = Vec::new();
    let mut master_ts: Vec<f64> = Vec::new();
    let mut gaps = Vec::new();
    while let Some(out) = sync.poll() {
        match out {
            SyncOutput::Frame(f) => {
                master_ts.push(f.t);
                master_rows.extend_from_slice(&f.slots[master_pos].values);
            }
            SyncOutput::Gap(g) => gaps.push(g),
        }
    }
    if master_ts.is_empty() {
        return Err(PipelineError::NoFrames);
    }
    let t0 = master_ts[0];
    let master = Array2::from_shape_vec((master_ts.len(), channels), master_rows)
        .expect("row-major frame collection");

    // Native-rate lookups for auxiliary windows and ocular references.
    let native = |name: &str| -> Option<NativeStream<'_>> {
        let pos = cfg.streams.iter().position(|s| s.name == name)?;
        let chunk = &data.data[order[pos]];
        Some(NativeStream { ts: &chunk.timestamps, values: chunk.values.view() })
    };

    // The processing chain.
    let mut x = master;
    let mut rate = metas[master_pos].srate;
    let mut ica = None;
    for stage in &plan.stages {
        match &stage.spec {
            ProcessingStageSpec::Notch { freq, q, .. } => {
                let f = design_notch(*freq, rate, *q)?;
                x = apply_filter(&f, &x, mode);
            }
            ProcessingStageSpec::Bandpass { low, high, order, .. } => {
                let f = design_bandpass(*low, *high, *order, rate)?;
                x = apply_filter(&f, &x, mode);
            }
            ProcessingStageSpec::Resample { target, .. } => {
                x = resample(&x, rate, *target)?;
                rate = *target;
            }
            ProcessingStageSpec::Ica {
                components,
                fit_seconds,
                eog_stream,
                reject_threshold,
                ..
            } => {
                let fit_len = (((fit_seconds * rate).round() as usize).max(1)).min(x.nrows());
                let fit = x.slice(ndarray::s![..fit_len, ..]).to_owned();
                let row_times: Vec<f64> = (0..fit_len).map(|i| t0 + i as f64 / rate).collect();
                let eog_native = eog_stream.as_deref().and_then(native);
                let outcome = fit_ica_outcome(
                    &fit,
                    &row_times,
                    *components,
                    cfg.seed,
                    eog_native.as_ref(),
                    *reject_threshold,
                )?;
                x = remove_artifact_components(&x, &outcome.model, &outcome.rejected)?;
                ica = Some(outcome);
            }
            ProcessingStageSpec::EpochFixed { .. } | ProcessingStageSpec::EpochEvent { .. } => {
                unreachable!("the planner splits epoch stages out of the stage list")
            }
        }
    }

    // Cut analysis windows.
    let (epochs, epoch_report) = match planned_epoch {
        PlannedEpoch::Fixed { duration, .. } => {
            let blocks = blocks_from_events(&data.events, data.record.end);
            (epoch_fixed(&x, t0, rate, *duration, &blocks)?, None)
        }
        PlannedEpoch::Event { pre, post, tags, label_key, .. } => {
            let locks = lock_events_from(&data.events, tags, label_key)?;
            let (eps, report) = epoch_around_events(&x, t0, rate, *pre, *post, &locks)?;
            (eps, Some(report))
        }
    };

    // Feature rows plus ground-truth PERCLOS where requested.
    let aux_names = aux_stream_names(cfg, plan);
    let truth_stream = match &cfg.detection.label_source {
        LabelSource::Perclos { stream, .. } => Some(stream.clone()),
        _ => None,
    };
    let mut features = FeatureMatrix::new(Vec::new());
    let mut truth_values = Vec::new();
    let psd_cfg = PsdConfig::default();
    for epoch in &epochs {
        let mut windows = vec![StreamWindow {
            stream: plan.master_stream.clone(),
            channels: plan.master_channels.clone(),
            srate: rate,
            data: epoch.data.clone(),
        }];
        for name in &aux_names {
            let ns = native(name).expect("validated stream");
            let w = cut_window(ns.ts, ns.values, epoch.t0, epoch.t_end());
            if w.nrows() == 0 {
                return Err(PipelineError::EmptyWindow {
                    stream: name.clone(),
                    epoch: epoch.index,
                    t0: epoch.t0,
                    t1: epoch.t_end(),
                });
            }
            let pos = cfg.streams.iter().position(|s| &s.name == name).expect("validated");
            windows.push(StreamWindow {
                stream: name.clone(),
                channels: cfg.streams[pos].channels.clone(),
                srate: cfg.streams[pos].srate,
                data: w,
            });
        }
        let (names, values) = assemble_features(&windows, &plan.feature_specs, &psd_cfg)?;
        if features.names.is_empty() && features.n_epochs() == 0 {
            features = FeatureMatrix::new(names);
        }
        features.push_row(values, epoch.label.clone(), epoch.t0)?;

        if let Some(stream) = &truth_stream {
            let w = windows
                .iter()
                .find(|w| &w.stream == stream)
                .expect("label stream is in the aux set");
            // First channel: eye trackers expose one openness channel.
            let col: Vec<f64> = w.data.column(0).to_vec();
            truth_values.push(perclos(&col, EYE_CLOSED_THRESHOLD)?);
        }
    }

    Ok(ProcessedSession {
        record: data.record.clone(),
        master_stream: plan.master_stream.clone(),
        t0,
        processed_rate: rate,
        epochs,
        features,
        truth_values,
        gaps,
        ica,
        epoch_report,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::scenario::parse_scenario;
    use crate::synth::{simulate_session, SessionScript};
    use crate::synth::{Block, EyePlan, OcularPlan, TelemetryPlan};

    /// A compact two-condition script: 24 s, two 12 s blocks, four EEG
    /// channels, an eye tracker, and telemetry. The second block doubles
    /// the alpha power and the latent drowsiness.
    pub(crate) fn two_block_script(effect: f64) -> SessionScript {
        let channels: Vec<String> =
            ["Fp1", "Cz", "Pz", "O1"].iter().map(|s| s.to_string()).collect();
        let baseline = Array2::from_shape_fn((4, 2), |(_, b)| if b == 0 { 10.0 } else { 8.0 });
        let mut lively = baseline.clone();
        for c in 0..4 {
            lively[(c, 1)] = 24.0;
        }
        SessionScript {
            session: "pipe_test".into(),
            subject: "s01".into(),
            scenario: "pipe".into(),
            seed: 11,
            duration: 24.0,
            eeg_channels: channels,
            eeg_srate: 250.0,
            bands: vec![(4.0, 8.0), (8.0, 13.0)],
            baseline: baseline.clone(),
            blocks: vec![
                Block {
                    t0: 0.0,
                    t1: 12.0,
                    label: "calm".into(),
                    drowsiness: 0.0,
                    band_powers: baseline,
                },
                Block {
                    t0: 12.0,
                    t1: 24.0,
                    label: "lively".into(),
                    drowsiness: 0.6,
                    band_powers: lively,
                },
            ],
            stimuli: Vec::new(),
            erp: None,
            ocular: Some(OcularPlan {
                srate: 250.0,
                blink_rate: 0.25,
                blink_amplitude: 150.0,
                bleed: vec![0.35, 0.08, 0.03, 0.03],
            }),
            eye: Some(EyePlan { srate: 60.0 }),
            telemetry: Some(TelemetryPlan {
                srate: 32.0,
                speed_mean: 25.0,
                steering_base: 0.0004,
                steering_by_block: vec![0.0004, 0.0025],
            }),
            effect,
        }
    }

    pub(crate) fn scenario_doc() -> &'static str {
        r#"
version: 1
scenario: pipe
seed: 11
streams:
  - name: eeg
    kind: eeg
    channels: [Fp1, Cz, Pz, O1]
    srate: 250
    units: uV
    source: synthetic
  - name: eog
    kind: eog
    channels: [heog, veog]
    srate: 250
    units: uV
    source: synthetic
  - name: eye
    kind: eye_tracking
    channels: [openness]
    srate: 60
    units: ratio
    source: synthetic
  - name: telemetry
    kind: telemetry
    channels: [speed, steering]
    srate: 32
    units: si
    source: synthetic
processing:
  - stage: bandpass
    low: 1.0
    high: 40.0
    order: 4
  - stage: resample
    target: 50.0
  - stage: epoch_fixed
    duration: 2.0
features:
  - feature: band_power
    stream: eeg
    bands: [theta, alpha]
  - feature: perclos
    stream: eye
    closed_threshold: 0.2
  - feature: time_stats
    stream: telemetry
    stats: [std]
detection:
  task: classification
  algorithm: knn
  labels:
    from: blocks
actions: []
"#
    }

    #[test]
    fn batch_run_cuts_labeled_epochs_and_features() {
        let data = simulate_session(&two_block_script(1.0)).unwrap();
        let cfg = parse_scenario(scenario_doc()).unwrap();
        let plan = crate::scenario::resolve_pipeline(&cfg).unwrap();
        let out = process_session(&data, &cfg, &plan, FilterMode::ZeroPhase).unwrap();

        assert_eq!(out.processed_rate, 50.0);
        assert_eq!(out.epochs.len(), 12, "24 s of 2 s windows");
        assert!(out.epochs.iter().all(|e| e.data.nrows() == 100));
        let labels: Vec<&str> = out.epochs.iter().map(|e| e.label.as_deref().unwrap()).collect();
        assert_eq!(&labels[..6], &["calm"; 6]);
        assert_eq!(&labels[6..], &["lively"; 6]);

        // One row per epoch; names carry stream/channel/feature structure.
        assert_eq!(out.features.n_epochs(), 12);
        let names = &out.features.names;
        assert!(names.iter().any(|n| n == "eeg.O1.alpha_power"), "{names:?}");
        assert!(names.iter().any(|n| n == "eye.openness.perclos"));
        assert!(names.iter().any(|n| n == "telemetry.steering.std"));

        // The alpha contrast survives the pipeline: second-half epochs
        // carry visibly more alpha power on every channel.
        let alpha_col = names.iter().position(|n| n == "eeg.Cz.alpha_power").unwrap();
        let first: f64 = (0..6).map(|r| out.features.values[[r, alpha_col]]).sum::<f64>() / 6.0;
        let second: f64 = (6..12).map(|r| out.features.values[[r, alpha_col]]).sum::<f64>() / 6.0;
        assert!(
            second > 1.8 * first,
            "alpha should roughly triple: calm {first:.3} vs lively {second:.3}"
        );

        // No perclos labeling requested: no truth values.
        assert!(out.truth_values.is_empty());
        assert!(out.gaps.is_empty(), "synthetic grids have no holes");

        // Determinism.
        let again = process_session(&data, &cfg, &plan, FilterMode::ZeroPhase).unwrap();
        assert_eq!(out.features.values, again.features.values);
    }

    #[test]
    fn perclos_labels_follow_the_eye_stream() {
        let data = simulate_session(&two_block_script(1.0)).unwrap();
        let mut cfg = parse_scenario(scenario_doc()).unwrap();
        cfg.detection.label_source =
            LabelSource::Perclos { stream: "eye".into(), drowsy_threshold: 0.15 };
        let plan = crate::scenario::resolve_pipeline(&cfg).unwrap();
        let out = process_session(&data, &cfg, &plan, FilterMode::ZeroPhase).unwrap();

        assert_eq!(out.truth_values.len(), 12);
        let calm: f64 = out.truth_values[..6].iter().sum::<f64>() / 6.0;
        let drowsy: f64 = out.truth_values[6..].iter().sum::<f64>() / 6.0;
        assert!(calm < 0.05, "open-eyed block closure {calm}");
        // 0.65 * d with d = 0.6 -> about 0.39 closed, per-window spread.
        assert!((0.2..0.6).contains(&drowsy), "drowsy block closure {drowsy}");
    }

    #[test]
    fn ocular_rejection_strips_blink_bleed_from_the_front_channel() {
        let script = two_block_script(0.0); // flat conditions, blinks only
        let data = simulate_session(&script).unwrap();
        let mut cfg = parse_scenario(scenario_doc()).unwrap();
        // Drop the resample so epochs stay on the native grid, and fit the
        // decomposition on the first half of the session.
        cfg.processing = vec![
            crate::scenario::ProcessingStageSpec::Ica {
                stream: None,
                components: Some(4),
                fit_seconds: 12.0,
                eog_stream: Some("eog".into()),
                reject_threshold: 0.7,
            },
            crate::scenario::ProcessingStageSpec::EpochFixed { duration: 2.0 },
        ];
        let plan = crate::scenario::resolve_pipeline(&cfg).unwrap();
        let cleaned = process_session(&data, &cfg, &plan, FilterMode::ZeroPhase).unwrap();
        let outcome = cleaned.ica.as_ref().expect("stage ran");
        assert!(!outcome.rejected.is_empty(), "a blink component must be found");
        assert_eq!(outcome.fit_samples, 3000);

        // Fp1 variance drops once the blink component is gone; Pz (tiny
        // bleed) keeps most of its signal.
        cfg.processing = vec![crate::scenario::ProcessingStageSpec::EpochFixed { duration: 2.0 }];
        let plan_raw = crate::scenario::resolve_pipeline(&cfg).unwrap();
        let raw = process_session(&data, &cfg, &plan_raw, FilterMode::ZeroPhase).unwrap();

        let var = |ps: &ProcessedSession, ch: usize| -> f64 {
            let mut acc = 0.0;
            let mut n = 0.0;
            for e in &ps.epochs {
                for &v in e.data.column(ch) {
                    acc += v * v;
                    n += 1.0;
                }
            }
            acc / n
        };
        let fp1_drop = 1.0 - var(&cleaned, 0) / var(&raw, 0);
        let pz_drop = 1.0 - var(&cleaned, 2) / var(&raw, 2);
        assert!(fp1_drop > 0.3, "front-channel power should fall, dropped {fp1_drop:.3}");
        assert!(pz_drop.abs() < 0.25, "parietal channel should be mostly kept ({pz_drop:.3})");
    }

    #[test]
    fn event_epochs_carry_the_trigger_labels() {
        let mut script = two_block_script(1.0);
        script.stimuli = vec![
            crate::synth::Stimulus { t: 3.0, label: "cell1".into(), target: true },
            crate::synth::Stimulus { t: 6.0, label: "cell2".into(), target: false },
            crate::synth::Stimulus { t: 23.9, label: "cell3".into(), target: false }, // post window clipped
        ];
        let data = simulate_session(&script).unwrap();
        let mut cfg = parse_scenario(scenario_doc()).unwrap();
        cfg.processing = vec![crate::scenario::ProcessingStageSpec::EpochEvent {
            pre: 0.1,
            post: 0.8,
            tags: vec!["stimulus".into()],
            label_key: "target".into(),
            samples_override: None,
        }];
        let plan = crate::scenario::resolve_pipeline(&cfg).unwrap();
        let out = process_session(&data, &cfg, &plan, FilterMode::ZeroPhase).unwrap();

        assert_eq!(out.epochs.len(), 2);
        assert_eq!(out.epochs[0].label.as_deref(), Some("true"));
        assert_eq!(out.epochs[1].label.as_deref(), Some("false"));
        let report = out.epoch_report.as_ref().unwrap();
        assert_eq!(report.kept, 2);
        assert_eq!(report.out_of_range, vec![23.9]);
        assert!(out.epochs.iter().all(|e| e.data.nrows() == 225), "0.9 s at 250 Hz");
    }

    #[test]
    fn shape_mismatches_are_named() {
        let data = simulate_session(&two_block_script(1.0)).unwrap();
        let mut cfg = parse_scenario(scenario_doc()).unwrap();
        cfg.streams[3].name = "wheel".into();
        // Re-point the feature spec so validation still passes.
        cfg.features = cfg
            .features
            .iter()
            .cloned()
            .filter(|f| f.stream() != "telemetry")
            .collect();
        let plan = crate::scenario::resolve_pipeline(&cfg).unwrap();
        let err = process_session(&data, &cfg, &plan, FilterMode::ZeroPhase).unwrap_err();
        assert!(matches!(err, PipelineError::MissingStream { name } if name == "wheel"));

        let mut cfg2 = parse_scenario(scenario_doc()).unwrap();
        cfg2.streams[0].srate = 250.0;
        cfg2.streams[2].srate = 500.0; // declared faster than the eeg master
        let plan2 = crate::scenario::resolve_pipeline(&cfg2).unwrap();
        let err2 = process_session(&data, &cfg2, &plan2, FilterMode::ZeroPhase).unwrap_err();
        assert!(
            matches!(err2, PipelineError::RateMismatch { ref stream, .. } if stream == "eye"),
            "rate check precedes master choice: {err2}"
        );
    }
}
