//! Sample containers shared by every acquisition path.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// What kind of physiological (or vehicle) signal a stream carries.
///
/// The kind drives defaults elsewhere: processing chains attach to the
/// first `Eeg` stream unless told otherwise, and PERCLOS only makes sense
/// on an `EyeTracking` stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Eeg,
    Eog,
    EyeTracking,
    Telemetry,
}

impl StreamKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StreamKind::Eeg => "eeg",
            StreamKind::Eog => "eog",
            StreamKind::EyeTracking => "eye_tracking",
            StreamKind::Telemetry => "telemetry",
        }
    }
}

impl std::str::FromStr for StreamKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "eeg" => Ok(StreamKind::Eeg),
            "eog" => Ok(StreamKind::Eog),
            "eye_tracking" => Ok(StreamKind::EyeTracking),
            "telemetry" => Ok(StreamKind::Telemetry),
            other => Err(format!(
                "unknown stream kind `{other}` (expected eeg, eog, eye_tracking, or telemetry)"
            )),
        }
    }
}

/// Static description of one stream: identity, channel labels, and rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub name: String,
    pub kind: StreamKind,
    /// Channel labels, unique within the stream (e.g. 10-20 electrode
    /// names for EEG, `openness` for an eye tracker).
    pub channels: Vec<String>,
    /// Nominal sample rate in Hz. Timestamps are authoritative; the rate
    /// is used for planning (filter design, epoch sizes, sync tolerance).
    pub srate: f64,
    /// Unit label carried through to recordings (e.g. `uV`, `ratio`).
    pub units: String,
}

impl StreamMeta {
    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }
}

/// A batch of consecutive samples from one stream.
///
/// `values` is samples x channels; row `i` was captured at `timestamps[i]`
/// (seconds on the session clock). Timestamps are strictly increasing
/// within a chunk and across consecutive chunks of the same stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleChunk {
    pub timestamps: Vec<f64>,
    pub values: Array2<f64>,
}

impl SampleChunk {
    /// Build a chunk, checking the container invariants:
    /// row count matches timestamp count and timestamps strictly increase.
    pub fn new(timestamps: Vec<f64>, values: Array2<f64>) -> Result<Self, ChunkError> {
        if timestamps.len() != values.nrows() {
            return Err(ChunkError::ShapeMismatch {
                timestamps: timestamps.len(),
                rows: values.nrows(),
            });
        }
        for w in timestamps.windows(2) {
            if !(w[1] > w[0]) {
                return Err(ChunkError::NonMonotonic { at: w[0], next: w[1] });
            }
        }
        Ok(Self { timestamps, values })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn channel_count(&self) -> usize {
        self.values.ncols()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ChunkError {
    #[error("chunk has {timestamps} timestamps but {rows} sample rows")]
    ShapeMismatch { timestamps: usize, rows: usize },
    #[error("chunk timestamps must strictly increase ({at} followed by {next})")]
    NonMonotonic { at: f64, next: f64 },
}

/// One stream's contribution to a fused frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSlot {
    /// One value per declared channel.
    pub values: Vec<f64>,
    /// Timestamp of the source sample that supplied `values`.
    pub source_t: f64,
    /// True when no source sample fell within the sync tolerance of the
    /// frame time and the previous value was carried forward instead.
    pub stale: bool,
}

/// A time-aligned snapshot of every declared stream, emitted on the master
/// (highest-rate) stream's clock.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedFrame {
    /// Frame time: the master stream's sample timestamp.
    pub t: f64,
    /// Slots in declared stream order; every declared stream appears
    /// exactly once.
    pub slots: Vec<StreamSlot>,
}

/// An out-of-band event: stimulus marker, block boundary, or detection.
///
/// `payload` is free-form JSON so recorders can round-trip tags they do
/// not themselves interpret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub tag: String,
    pub payload: serde_json::Value,
}

impl EventRecord {
    pub fn new(t: f64, tag: impl Into<String>, payload: serde_json::Value) -> Self {
        Self { t, tag: tag.into(), payload }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn chunk_rejects_shape_mismatch() {
        let err = SampleChunk::new(vec![0.0, 0.004], array![[1.0, 2.0]]).unwrap_err();
        assert!(matches!(err, ChunkError::ShapeMismatch { timestamps: 2, rows: 1 }));
    }

    #[test]
    fn chunk_rejects_non_monotonic_timestamps() {
        let err =
            SampleChunk::new(vec![0.0, 0.0], array![[1.0], [2.0]]).unwrap_err();
        assert!(matches!(err, ChunkError::NonMonotonic { .. }));
    }

    #[test]
    fn chunk_accepts_well_formed_input() {
        let c = SampleChunk::new(vec![0.0, 0.004], array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.channel_count(), 2);
    }
}
