//! Incremental processing: chunks in, detection events out.
//!
//! The engine mirrors the batch path stage for stage. Every piece of the
//! chain is chunking-invariant — the synchronizer only emits a frame once
//! its neighbors are settled, causal filters keep per-channel state, the
//! resampler emits an output only when its full input window has arrived,
//! and artifact removal is a per-sample linear map once fitted — so feeding
//! a recording through this engine yields bit-identical processed samples
//! to one causal batch pass, and therefore the same epochs, features, and
//! predictions.
//!
//! Two operations need future context and are therefore *deferred* rather
//! than approximated:
//!
//! * the artifact decomposition waits until its fit window (and the ocular
//!   reference covering it) has fully arrived, buffering its input;
//! * a finished epoch is featurized only once every auxiliary stream has
//!   passed the epoch's end time, so native-rate windows are complete.
//!
//! Buffers grow with the session (native aux streams and the processed
//! master signal are kept whole). At biosignal rates this is a few
//! megabytes per ten minutes, which is fine for the session lengths this
//! framework targets; epoch-level state is what carries the detections.
//!
//! Events must be pushed in time order relative to the samples that cover
//! them (replay and live sources both deliver them that way): a condition
//! marker may not arrive after samples far beyond it, or labels could
//! differ from the batch path at block boundaries.

use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

use ndarray::{Array2, ArrayView2};

use super::offline::{aux_stream_names, fit_ica_outcome, require_master_fastest, NativeStream};
use super::{cut_window, payload_label, PipelineError};
use crate::acquire::sync::{SyncConfig, SyncOutput, Synchronizer};
use crate::acquire::{EventRecord, SampleChunk, StreamMeta};
use crate::detect::{DetectionEvent, Prediction, TrainedModel};
use crate::dsp::epoch::{Epoch, LockEvent};
use crate::dsp::ica::remove_artifact_components;
use crate::dsp::{design_bandpass, design_notch, Resampler, StreamingFilter};
use crate::features::{assemble_features, FeatureSpec, PsdConfig, StreamWindow};
use crate::pipeline::offline::IcaOutcome;
use crate::scenario::{PipelinePlan, PlannedEpoch, ProcessingStageSpec, ScenarioConfig};

/// What an incremental run did, returned by [`OnlineEngine::finish`].
#[derive(Debug, Clone, Default)]
pub struct EngineReport {
    /// Epochs featurized and classified.
    pub epochs: usize,
    /// Event times whose lock window fell outside the recording.
    pub out_of_range: Vec<f64>,
    /// Master-timeline holes found during fusion.
    pub gaps: Vec<EventRecord>,
    /// Wall-clock feature+inference time per epoch.
    pub latencies_ms: Vec<f64>,
    /// Seconds of processed master signal.
    pub processed_seconds: f64,
}

/// One stream's raw samples, kept at native rate for window cutting.
struct NativeBuffer {
    channels: usize,
    ts: Vec<f64>,
    rows: Vec<f64>,
}

impl NativeBuffer {
    fn new(channels: usize) -> Self {
        Self { channels, ts: Vec::new(), rows: Vec::new() }
    }

    fn append(&mut self, chunk: &SampleChunk) {
        self.ts.extend_from_slice(&chunk.timestamps);
        self.rows.extend(chunk.values.iter().copied());
    }

    fn last_t(&self) -> Option<f64> {
        self.ts.last().copied()
    }

    fn view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.ts.len(), self.channels), &self.rows)
            .expect("append keeps rows and timestamps in step")
    }
}

/// The artifact-removal stage while the engine runs: buffers its input
/// until the fit window is complete, then becomes a per-sample linear map.
struct IcaStage {
    fit_target: usize,
    rate: f64,
    channels: usize,
    components: Option<usize>,
    seed: u64,
    eog_stream: Option<String>,
    reject_threshold: f64,
    buffer: Vec<f64>,
    rows: usize,
    outcome: Option<IcaOutcome>,
}

enum OnlineStage {
    Filter(StreamingFilter),
    Resample(Resampler),
    Ica(IcaStage),
}

enum Cutter {
    Fixed {
        len: usize,
        next_start: usize,
    },
    Event {
        pre: f64,
        len: usize,
        tags: Vec<String>,
        label_key: String,
        pending: VecDeque<LockEvent>,
    },
}

/// Auxiliary stream info needed to build feature windows.
struct AuxInfo {
    name: String,
    channels: Vec<String>,
    srate: f64,
}

/// Streams a multi-rate recording through a resolved plan and a trained
/// model, emitting one [`DetectionEvent`] per completed epoch.
pub struct OnlineEngine {
    stream_names: Vec<String>,
    master_pos: usize,
    master_stream: String,
    master_channels: Vec<String>,
    sync: Synchronizer,
    stages: Vec<OnlineStage>,
    native: BTreeMap<String, NativeBuffer>,
    /// Processed master rows, flat row-major (channels fixed).
    processed: Vec<f64>,
    nch: usize,
    rate: f64,
    t0: Option<f64>,
    cutter: Cutter,
    /// Condition markers seen so far: (time, label).
    block_marks: Vec<(f64, String)>,
    /// Cut but not yet featurized (waiting on auxiliary samples).
    pending_epochs: VecDeque<Epoch>,
    epoch_count: usize,
    feature_specs: Vec<FeatureSpec>,
    aux: Vec<AuxInfo>,
    psd: PsdConfig,
    model: TrainedModel,
    events_out: VecDeque<DetectionEvent>,
    out_of_range: Vec<f64>,
    gaps: Vec<EventRecord>,
    latencies_ms: Vec<f64>,
    finished: bool,
}

impl OnlineEngine {
    pub fn new(
        cfg: &ScenarioConfig,
        plan: &PipelinePlan,
        model: TrainedModel,
    ) -> Result<Self, PipelineError> {
        let planned_epoch = plan.epoch.as_ref().ok_or(PipelineError::EpochRequired)?;
        let master_pos = require_master_fastest(cfg, plan)?;

        let metas: Vec<StreamMeta> = cfg
            .streams
            .iter()
            .map(|s| StreamMeta {
                name: s.name.clone(),
                kind: s.kind,
                channels: s.channels.clone(),
                srate: s.srate,
                units: s.units.clone(),
            })
            .collect();
        let sync_cfg = SyncConfig { tolerance: cfg.sync.tolerance, max_gap: cfg.sync.max_gap };
        let sync = Synchronizer::new(&metas, &sync_cfg)?;

        let nch = cfg.streams[master_pos].channels.len();
        let mut stages = Vec::with_capacity(plan.stages.len());
        for st in &plan.stages {
            let rate = st.input_rate;
            let stage = match &st.spec {
                ProcessingStageSpec::Notch { freq, q, .. } => {
                    OnlineStage::Filter(design_notch(*freq, rate, *q)?.streaming(nch))
                }
                ProcessingStageSpec::Bandpass { low, high, order, .. } => {
                    OnlineStage::Filter(design_bandpass(*low, *high, *order, rate)?.streaming(nch))
                }
                ProcessingStageSpec::Resample { target, .. } => {
                    OnlineStage::Resample(Resampler::new(rate, *target, nch)?)
                }
                ProcessingStageSpec::Ica {
                    components,
                    fit_seconds,
                    eog_stream,
                    reject_threshold,
                    ..
                } => OnlineStage::Ica(IcaStage {
                    fit_target: ((fit_seconds * rate).round() as usize).max(1),
                    rate,
                    channels: nch,
                    components: *components,
                    seed: cfg.seed,
                    eog_stream: eog_stream.clone(),
                    reject_threshold: *reject_threshold,
                    buffer: Vec::new(),
                    rows: 0,
                    outcome: None,
                }),
                ProcessingStageSpec::EpochFixed { .. } | ProcessingStageSpec::EpochEvent { .. } => {
                    unreachable!("the planner splits epoch stages out of the stage list")
                }
            };
            stages.push(stage);
        }

        // Track every stream whose raw samples are needed later: feature
        // windows off the master chain, plus any ocular reference.
        let mut tracked = aux_stream_names(cfg, plan);
        for st in &plan.stages {
            if let ProcessingStageSpec::Ica { eog_stream: Some(name), .. } = &st.spec {
                if !tracked.iter().any(|t| t == name) {
                    tracked.push(name.clone());
                }
            }
        }
        let mut native = BTreeMap::new();
        for name in &tracked {
            let s = cfg.stream(name).expect("validated stream");
            native.insert(name.clone(), NativeBuffer::new(s.channels.len()));
        }

        let aux = aux_stream_names(cfg, plan)
            .into_iter()
            .map(|name| {
                let s = cfg.stream(&name).expect("validated stream");
                AuxInfo { name, channels: s.channels.clone(), srate: s.srate }
            })
            .collect();

        let cutter = match planned_epoch {
            PlannedEpoch::Fixed { samples, .. } => {
                Cutter::Fixed { len: *samples, next_start: 0 }
            }
            PlannedEpoch::Event { pre, samples, tags, label_key, .. } => Cutter::Event {
                pre: *pre,
                len: *samples,
                tags: tags.clone(),
                label_key: label_key.clone(),
                pending: VecDeque::new(),
            },
        };

        Ok(Self {
            stream_names: cfg.streams.iter().map(|s| s.name.clone()).collect(),
            master_pos,
            master_stream: plan.master_stream.clone(),
            master_channels: plan.master_channels.clone(),
            sync,
            stages,
            native,
            processed: Vec::new(),
            nch,
            rate: planned_epoch.srate(),
            t0: None,
            cutter,
            block_marks: Vec::new(),
            pending_epochs: VecDeque::new(),
            epoch_count: 0,
            feature_specs: plan.feature_specs.clone(),
            aux,
            psd: PsdConfig::default(),
            model,
            events_out: VecDeque::new(),
            out_of_range: Vec::new(),
            gaps: Vec::new(),
            latencies_ms: Vec::new(),
            finished: false,
        })
    }

    /// Feed one chunk of the stream at `stream` (index in declared order).
    pub fn push_chunk(
        &mut self,
        stream: usize,
        chunk: &SampleChunk,
    ) -> Result<(), PipelineError> {
        self.check_open()?;
        let name = self.stream_names.get(stream).cloned().ok_or_else(|| {
            PipelineError::MissingStream { name: format!("#{stream}") }
        })?;
        if chunk.is_empty() {
            return Ok(());
        }
        if let Some(buf) = self.native.get_mut(&name) {
            buf.append(chunk);
        }
        self.sync.push(stream, chunk)?;
        self.drain_sync()?;
        self.pump(false)
    }

    /// Feed one marker/stimulus event.
    pub fn push_event(&mut self, event: &EventRecord) -> Result<(), PipelineError> {
        self.check_open()?;
        match &mut self.cutter {
            Cutter::Fixed { .. } => {
                if event.tag == "block" {
                    if let Some(label) = event.payload.get("label").and_then(|v| v.as_str()) {
                        self.block_marks.push((event.t, label.to_string()));
                    }
                }
            }
            Cutter::Event { tags, label_key, pending, .. } => {
                if tags.iter().any(|t| t == &event.tag) {
                    let label =
                        event.payload.get(label_key.as_str()).and_then(payload_label).ok_or(
                            PipelineError::MissingLabelKey {
                                t: event.t,
                                key: label_key.clone(),
                            },
                        )?;
                    pending.push_back(LockEvent { t: event.t, label });
                }
            }
        }
        self.pump(false)
    }

    /// Next detection, if one is ready.
    pub fn poll(&mut self) -> Option<DetectionEvent> {
        self.events_out.pop_front()
    }

    /// Declare end of input: flush every stage, cut and classify what
    /// remains, and summarize the run.
    pub fn finish(&mut self) -> Result<EngineReport, PipelineError> {
        self.check_open()?;
        self.finished = true;
        self.sync.finish_all();
        self.drain_sync()?;
        self.pump(true)?;

        // Cascade stage flushes left to right so tails travel the rest of
        // the chain.
        for i in 0..self.stages.len() {
            let tail = match &mut self.stages[i] {
                OnlineStage::Filter(_) => None,
                OnlineStage::Resample(r) => {
                    let t = r.finish();
                    (t.nrows() > 0).then_some(t)
                }
                OnlineStage::Ica(_) => None, // handled by pump(true)
            };
            if let Some(t) = tail {
                self.feed_from(i + 1, t)?;
                self.pump(true)?;
            }
        }
        self.pump(true)?;

        // Lock events that never got their window are out of range, in
        // arrival order, matching the batch cutter's report.
        if let Cutter::Event { pending, .. } = &mut self.cutter {
            let mut leftovers: Vec<f64> = pending.drain(..).map(|e| e.t).collect();
            self.out_of_range.append(&mut leftovers);
        }

        Ok(EngineReport {
            epochs: self.epoch_count,
            out_of_range: self.out_of_range.clone(),
            gaps: self.gaps.clone(),
            latencies_ms: self.latencies_ms.clone(),
            processed_seconds: (self.processed.len() / self.nch) as f64 / self.rate,
        })
    }

    fn check_open(&self) -> Result<(), PipelineError> {
        if self.finished {
            return Err(PipelineError::Label {
                context: "online",
                message: "engine already finished".into(),
            });
        }
        Ok(())
    }

    /// Pull fused frames out of the synchronizer and through the chain.
    fn drain_sync(&mut self) -> Result<(), PipelineError> {
        let mut rows: Vec<f64> = Vec::new();
        let mut n = 0usize;
        while let Some(out) = self.sync.poll() {
            match out {
                SyncOutput::Frame(f) => {
                    if self.t0.is_none() {
                        self.t0 = Some(f.t);
                    }
                    rows.extend_from_slice(&f.slots[self.master_pos].values);
                    n += 1;
                }
                SyncOutput::Gap(g) => self.gaps.push(g),
            }
        }
        if n == 0 {
            return Ok(());
        }
        let block = Array2::from_shape_vec((n, self.nch), rows).expect("fixed-width frames");
        self.feed_from(0, block)
    }

    /// Run a block through stages `start..`, appending chain output to the
    /// processed signal. An unfitted artifact stage swallows the block
    /// into its fit buffer.
    fn feed_from(&mut self, start: usize, block: Array2<f64>) -> Result<(), PipelineError> {
        let mut stages = std::mem::take(&mut self.stages);
        let result = (|| {
            let mut block = block;
            for stage in stages.iter_mut().skip(start) {
                if block.nrows() == 0 {
                    break;
                }
                block = match stage {
                    OnlineStage::Filter(f) => {
                        f.process(&mut block);
                        block
                    }
                    OnlineStage::Resample(r) => r.push(&block),
                    OnlineStage::Ica(st) => match &st.outcome {
                        Some(o) => remove_artifact_components(&block, &o.model, &o.rejected)?,
                        None => {
                            st.buffer.extend(block.iter().copied());
                            st.rows += block.nrows();
                            Array2::zeros((0, st.channels))
                        }
                    },
                };
            }
            if block.nrows() > 0 {
                self.processed.extend(block.iter().copied());
            }
            Ok(())
        })();
        self.stages = stages;
        result
    }

    /// Make every deferred decision that new data may have unblocked:
    /// fit-ready artifact stages, complete epochs, and epochs whose
    /// auxiliary windows are now fully covered.
    fn pump(&mut self, finishing: bool) -> Result<(), PipelineError> {
        loop {
            let Some((idx, fit_len)) = self.ica_ready(finishing) else { break };
            let drained = self.fit_ica_stage(idx, fit_len)?;
            self.feed_from(idx + 1, drained)?;
        }
        self.try_cut()?;
        self.try_emit(finishing)
    }

    /// First unfitted artifact stage that can fit now, with its fit length.
    fn ica_ready(&self, finishing: bool) -> Option<(usize, usize)> {
        let t0 = self.t0?;
        for (i, stage) in self.stages.iter().enumerate() {
            let OnlineStage::Ica(st) = stage else { continue };
            if st.outcome.is_some() {
                continue;
            }
            if st.rows == 0 {
                return None; // nothing upstream yet; later stages have no input either
            }
            let fit_len = st.rows.min(st.fit_target);
            if !finishing && fit_len < st.fit_target {
                return None;
            }
            // The ocular reference must cover the fit window, or its
            // forward-filled values could still change.
            if !finishing {
                if let Some(eog) = &st.eog_stream {
                    let fit_end = t0 + (fit_len - 1) as f64 / st.rate;
                    let covered = self
                        .native
                        .get(eog)
                        .and_then(|b| b.last_t())
                        .is_some_and(|t| t >= fit_end);
                    if !covered {
                        return None;
                    }
                }
            }
            return Some((i, fit_len));
        }
        None
    }

    /// Fit the artifact stage at `idx` on its buffered prefix, then clean
    /// and release everything it buffered.
    fn fit_ica_stage(&mut self, idx: usize, fit_len: usize) -> Result<Array2<f64>, PipelineError> {
        let t0 = self.t0.expect("frames precede stage input");
        let OnlineStage::Ica(st) = &mut self.stages[idx] else {
            unreachable!("ica_ready only returns artifact stages")
        };
        let buffered =
            Array2::from_shape_vec((st.rows, st.channels), std::mem::take(&mut st.buffer))
                .expect("row-major stage buffer");
        st.rows = 0;
        let fit = buffered.slice(ndarray::s![..fit_len, ..]).to_owned();
        let row_times: Vec<f64> = (0..fit_len).map(|i| t0 + i as f64 / st.rate).collect();
        let eog_buf = st.eog_stream.as_ref().and_then(|n| self.native.get(n));
        let eog_view =
            eog_buf.map(|b| NativeStream { ts: &b.ts, values: b.view() });
        let outcome = fit_ica_outcome(
            &fit,
            &row_times,
            st.components,
            st.seed,
            eog_view.as_ref(),
            st.reject_threshold,
        )?;
        let cleaned = remove_artifact_components(&buffered, &outcome.model, &outcome.rejected)?;
        st.outcome = Some(outcome);
        Ok(cleaned)
    }

    fn processed_rows(&self) -> usize {
        self.processed.len() / self.nch
    }

    /// Cut every epoch whose samples are all in the processed buffer.
    fn try_cut(&mut self) -> Result<(), PipelineError> {
        let Some(t0) = self.t0 else { return Ok(()) };
        let total = self.processed_rows();
        let view = ArrayView2::from_shape((total, self.nch), &self.processed)
            .expect("flat buffer is row-major");
        match &mut self.cutter {
            Cutter::Fixed { len, next_start } => {
                while *next_start + *len <= total {
                    let start = *next_start;
                    let data = view.slice(ndarray::s![start..start + *len, ..]).to_owned();
                    let t_start = t0 + start as f64 / self.rate;
                    let midpoint = t_start + 0.5 * *len as f64 / self.rate;
                    // Same rule as interval labeling over chained blocks:
                    // the last marker at or before the midpoint wins.
                    let label = self
                        .block_marks
                        .iter()
                        .rev()
                        .find(|(t, _)| *t <= midpoint)
                        .map(|(_, l)| l.clone());
                    self.pending_epochs.push_back(Epoch {
                        index: self.epoch_count,
                        t0: t_start,
                        srate: self.rate,
                        data,
                        label,
                    });
                    self.epoch_count += 1;
                    *next_start += *len;
                }
            }
            Cutter::Event { pre, len, pending, .. } => {
                while let Some(ev) = pending.front() {
                    let start = ((ev.t - *pre - t0) * self.rate).round() as i64;
                    if start < 0 {
                        self.out_of_range.push(ev.t);
                        pending.pop_front();
                        continue;
                    }
                    let start = start as usize;
                    if start + *len > total {
                        break; // later events start later still
                    }
                    let data = view.slice(ndarray::s![start..start + *len, ..]).to_owned();
                    let ev = pending.pop_front().expect("peeked");
                    self.pending_epochs.push_back(Epoch {
                        index: self.epoch_count,
                        t0: t0 + start as f64 / self.rate,
                        srate: self.rate,
                        data,
                        label: Some(ev.label),
                    });
                    self.epoch_count += 1;
                }
            }
        }
        Ok(())
    }

    /// Featurize and classify epochs whose auxiliary windows are complete.
    fn try_emit(&mut self, finishing: bool) -> Result<(), PipelineError> {
        while let Some(epoch) = self.pending_epochs.front() {
            let covered = finishing
                || self.aux.iter().all(|a| {
                    self.native
                        .get(&a.name)
                        .and_then(|b| b.last_t())
                        .is_some_and(|t| t >= epoch.t_end())
                });
            if !covered {
                break;
            }
            let epoch = self.pending_epochs.pop_front().expect("peeked");
            let started = Instant::now();

            let mut windows = vec![StreamWindow {
                stream: self.master_stream.clone(),
                channels: self.master_channels.clone(),
                srate: self.rate,
                data: epoch.data.clone(),
            }];
            for a in &self.aux {
                let buf = self.native.get(&a.name).expect("tracked at construction");
                let w = cut_window(&buf.ts, buf.view(), epoch.t0, epoch.t_end());
                if w.nrows() == 0 {
                    return Err(PipelineError::EmptyWindow {
                        stream: a.name.clone(),
                        epoch: epoch.index,
                        t0: epoch.t0,
                        t1: epoch.t_end(),
                    });
                }
                windows.push(StreamWindow {
                    stream: a.name.clone(),
                    channels: a.channels.clone(),
                    srate: a.srate,
                    data: w,
                });
            }
            let (names, values) = assemble_features(&windows, &self.feature_specs, &self.psd)?;
            let x = Array2::from_shape_vec((1, values.len()), values)
                .expect("one feature row");
            let prediction = self.model.predict(&x, &names)?;
            let (label, confidence) = match prediction {
                Prediction::Classes { labels, confidence, .. } => {
                    (labels[0].clone(), confidence[0])
                }
                Prediction::Values(v) => (format!("{:.4}", v[0]), 1.0),
            };
            self.latencies_ms.push(started.elapsed().as_secs_f64() * 1e3);
            self.events_out.push_back(DetectionEvent { t: epoch.t_end(), label, confidence });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::ModelConfig;
    use crate::dsp::FilterMode;
    use crate::pipeline::offline::tests::{scenario_doc, two_block_script};
    use crate::pipeline::{build_dataset, process_session};
    use crate::scenario::{parse_scenario, resolve_pipeline};
    use crate::synth::simulate_session;

    /// Train on the zero-phase batch path, then check that streaming the
    /// same recording through the engine matches a causal batch pass,
    /// epoch for epoch and label for label.
    #[test]
    fn streaming_run_matches_the_causal_batch_pass() {
        let data = simulate_session(&two_block_script(1.0)).unwrap();
        let cfg = parse_scenario(scenario_doc()).unwrap();
        let plan = resolve_pipeline(&cfg).unwrap();

        let training = process_session(&data, &cfg, &plan, FilterMode::ZeroPhase).unwrap();
        let (dataset, _, _) = build_dataset(&[training], &cfg.detection).unwrap();
        let config = ModelConfig {
            task: cfg.detection.task,
            algorithm: "knn".into(),
            selection: cfg.selection.clone(),
            hyper: cfg.detection.hyper.clone(),
            classes: Vec::new(),
            seed: cfg.seed,
        };
        let model = TrainedModel::train(config, &dataset).unwrap();

        // Batch reference with the causal filter form.
        let causal = process_session(&data, &cfg, &plan, FilterMode::Causal).unwrap();
        let reference = model
            .predict(&causal.features.values, &causal.features.names)
            .unwrap();
        let Prediction::Classes { labels: want, .. } = reference else {
            panic!("classification model")
        };

        // Stream the same session chunk by chunk, interleaving streams and
        // events roughly in time order, in uneven chunk sizes.
        let mut engine = OnlineEngine::new(&cfg, &plan, model).unwrap();
        let sizes = [7usize, 31, 200, 3, 64];
        let mut cursors = vec![0usize; data.data.len()];
        let mut next_event = 0usize;
        let mut step = 0usize;
        loop {
            let mut advanced = false;
            for (i, chunk) in data.data.iter().enumerate() {
                let n = chunk.timestamps.len();
                if cursors[i] >= n {
                    continue;
                }
                let take = sizes[step % sizes.len()].min(n - cursors[i]);
                step += 1;
                let lo = cursors[i];
                let hi = lo + take;
                let part = SampleChunk::new(
                    chunk.timestamps[lo..hi].to_vec(),
                    chunk.values.slice(ndarray::s![lo..hi, ..]).to_owned(),
                )
                .unwrap();
                engine.push_chunk(i, &part).unwrap();
                cursors[i] = hi;
                advanced = true;

                // Deliver events once the first stream has passed them.
                if i == 0 {
                    let watermark = chunk.timestamps[hi - 1];
                    while next_event < data.events.len()
                        && data.events[next_event].t <= watermark
                    {
                        engine.push_event(&data.events[next_event]).unwrap();
                        next_event += 1;
                    }
                }
            }
            if !advanced {
                break;
            }
        }
        for ev in &data.events[next_event..] {
            engine.push_event(ev).unwrap();
        }

        let mut got: Vec<DetectionEvent> = Vec::new();
        while let Some(ev) = engine.poll() {
            got.push(ev);
        }
        let report = engine.finish().unwrap();
        while let Some(ev) = engine.poll() {
            got.push(ev);
        }

        assert_eq!(report.epochs, causal.epochs.len());
        assert_eq!(got.len(), want.len());
        for (k, (ev, want_label)) in got.iter().zip(&want).enumerate() {
            assert_eq!(&ev.label, want_label, "epoch {k} diverged");
            let want_t = causal.epochs[k].t_end();
            assert!((ev.t - want_t).abs() < 1e-9, "epoch {k} time {} vs {want_t}", ev.t);
        }
        assert!(report.gaps.is_empty());
        assert_eq!(report.latencies_ms.len(), got.len());
        assert!(report.processed_seconds > 23.0, "{}", report.processed_seconds);

        // The engine refuses input after finish.
        let err = engine.push_event(&data.events[0]).unwrap_err();
        assert!(err.to_string().contains("finished"));
    }
}
