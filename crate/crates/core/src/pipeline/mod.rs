//! End-to-end signal paths: recorded sessions to labeled feature datasets
//! (batch) and live streams to detection events (incremental).
//!
//! Both paths share one front end — multi-stream fusion on the fastest
//! stream's clock — and one back end — windowed feature assembly — so a
//! replayed session produces the same epochs, the same feature rows, and
//! (with the same model) the same predictions whether it is processed as a
//! whole or pushed through sample by sample. The only sanctioned
//! difference is the filter mode: batch *training* runs use zero-phase
//! filtering, while live runs (and the batch runs that verify them) use
//! the causal form, because zero-phase filtering needs the whole signal.

pub mod dataset;
pub mod offline;
pub mod online;

pub use dataset::{build_dataset, DatasetReport, RowRef};
pub use offline::{process_session, IcaOutcome, ProcessedSession, EYE_CLOSED_THRESHOLD};
pub use online::{EngineReport, OnlineEngine};

use ndarray::Array2;

use crate::acquire::sync::SyncError;
use crate::acquire::EventRecord;
use crate::detect::DetectError;
use crate::dsp::epoch::{LabelBlock, LockEvent};
use crate::dsp::DspError;
use crate::features::FeatureError;

/// Errors raised while running a resolved scenario over real data.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("session lacks declared stream `{name}`")]
    MissingStream { name: String },
    #[error("stream `{stream}`: data has {got} channels, scenario declares {expected}")]
    ChannelMismatch { stream: String, expected: usize, got: usize },
    #[error("stream `{stream}`: data runs at {got} Hz, scenario declares {expected} Hz")]
    RateMismatch { stream: String, expected: f64, got: f64 },
    #[error(
        "processing targets `{plan}` but the fusion master (highest rate) is `{sync}`; \
         the processed stream must be the fastest"
    )]
    MasterNotFastest { plan: String, sync: String },
    #[error("the scenario declares no epoch stage; nothing to featurize")]
    EpochRequired,
    #[error("event at t={t} has no `{key}` value in its payload")]
    MissingLabelKey { t: f64, key: String },
    #[error("epoch {epoch} window [{t0}, {t1}) holds no `{stream}` samples")]
    EmptyWindow { stream: String, epoch: usize, t0: f64, t1: f64 },
    #[error("synchronization produced no frames (empty or never-overlapping streams)")]
    NoFrames,
    #[error("{context}: {message}")]
    Label { context: &'static str, message: String },
    #[error(transparent)]
    Sync(#[from] SyncError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Detect(#[from] DetectError),
}

/// Slice one stream's samples to the half-open time range `[t0, t1)`.
///
/// `ts` must be sorted ascending (sample timestamps always are). Returns
/// the row range so callers can slice timestamps and values consistently.
pub(crate) fn time_range(ts: &[f64], t0: f64, t1: f64) -> (usize, usize) {
    let start = ts.partition_point(|&t| t < t0);
    let end = ts.partition_point(|&t| t < t1);
    (start, end)
}

/// Cut `[t0, t1)` out of a samples x channels array by timestamp.
pub(crate) fn cut_window(
    ts: &[f64],
    values: ndarray::ArrayView2<'_, f64>,
    t0: f64,
    t1: f64,
) -> Array2<f64> {
    let (a, b) = time_range(ts, t0, t1);
    values.slice(ndarray::s![a..b, ..]).to_owned()
}

/// For each query time, the latest sample value at or before it (clamped
/// to the first sample when the query precedes the whole recording).
///
/// This is the same forward-fill rule the stream fusion uses, and it is
/// stable under arrival order: appending later samples never changes the
/// answer for earlier query times.
pub(crate) fn forward_fill_at(ts: &[f64], column: &[f64], queries: &[f64]) -> Vec<f64> {
    queries
        .iter()
        .map(|&q| {
            let idx = ts.partition_point(|&t| t <= q);
            column[idx.saturating_sub(1)]
        })
        .collect()
}

/// Reconstruct labeled condition intervals from `block` events: each block
/// runs from its own timestamp to the next block's (the last one to
/// `session_end`).
pub(crate) fn blocks_from_events(events: &[EventRecord], session_end: f64) -> Vec<LabelBlock> {
    let mut marks: Vec<(f64, String)> = events
        .iter()
        .filter(|e| e.tag == "block")
        .filter_map(|e| {
            e.payload.get("label").and_then(|v| v.as_str()).map(|l| (e.t, l.to_string()))
        })
        .collect();
    marks.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite event times"));
    let mut out = Vec::with_capacity(marks.len());
    for (i, (t, label)) in marks.iter().enumerate() {
        let end = marks.get(i + 1).map(|(t1, _)| *t1).unwrap_or(session_end.max(*t));
        out.push(LabelBlock { start: *t, end, label: label.clone() });
    }
    out
}

/// Render a JSON payload value as an epoch label.
pub(crate) fn payload_label(value: &serde_json::Value) -> Option<String> {
    match value {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Bool(b) => Some(b.to_string()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Turn tagged events into epoch triggers, labeling each with the
/// stringified `label_key` payload field.
pub(crate) fn lock_events_from(
    events: &[EventRecord],
    tags: &[String],
    label_key: &str,
) -> Result<Vec<LockEvent>, PipelineError> {
    let mut out = Vec::new();
    for e in events.iter().filter(|e| tags.iter().any(|t| t == &e.tag)) {
        let label = e
            .payload
            .get(label_key)
            .and_then(payload_label)
            .ok_or(PipelineError::MissingLabelKey { t: e.t, key: label_key.to_string() })?;
        out.push(LockEvent { t: e.t, label });
    }
    Ok(out)
}
