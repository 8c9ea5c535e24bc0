//! Multi-rate stream alignment.
//!
//! The fastest declared stream is the *master* (rate ties break toward the
//! earlier declaration). Every master sample becomes one [`FusedFrame`]
//! carrying, for each stream, the sample nearest the frame time `t` among
//! those with `ts <= t + tolerance` (distance ties prefer the earlier
//! sample). When the nearest eligible sample is more than `tolerance` away
//! the previous value is carried forward and the slot is flagged stale.
//!
//! The default tolerance is half the slowest stream's sample period, so a
//! healthy recording never produces stale slots.
//!
//! Frames before every stream has produced a sample no later than
//! `t + tolerance` are skipped (warm-up). A hole in the master timeline
//! longer than `max_gap` seconds emits a [`GAP_TAG`] event between the
//! surrounding frames.
//!
//! The aligner never looks ahead: a frame is released only once every
//! other stream has either delivered data past `t + tolerance` or been
//! marked finished, so feeding the same samples in different chunk sizes
//! yields byte-identical output.

use std::collections::VecDeque;

use super::chunk::{EventRecord, FusedFrame, SampleChunk, StreamMeta, StreamSlot};

/// Event tag for master-timeline gaps.
pub const GAP_TAG: &str = "sync.gap";

/// Alignment parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncConfig {
    /// Eligibility window in seconds. `None` resolves to half the slowest
    /// stream's sample period.
    pub tolerance: Option<f64>,
    /// Master-timeline hole size (seconds) that triggers a gap event.
    pub max_gap: f64,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self { tolerance: None, max_gap: 0.5 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SyncError {
    #[error("no streams to synchronize")]
    NoStreams,
    #[error("stream index {got} out of range ({count} streams)")]
    BadStreamIndex { got: usize, count: usize },
    #[error("stream `{stream}`: chunk has {got} channels, declared {expected}")]
    ChannelMismatch { stream: String, expected: usize, got: usize },
    #[error("stream `{stream}`: sample at {next} does not advance past {at}")]
    NonMonotonic { stream: String, at: f64, next: f64 },
    #[error("tolerance must be > 0, got {got}")]
    BadTolerance { got: f64 },
    #[error("max_gap must be > 0, got {got}")]
    BadMaxGap { got: f64 },
    #[error("stream `{stream}` declares srate {got}, need > 0")]
    BadRate { stream: String, got: f64 },
}

/// One aligner output, in emission order.
#[derive(Debug, Clone, PartialEq)]
pub enum SyncOutput {
    Frame(FusedFrame),
    Gap(EventRecord),
}

#[derive(Debug)]
struct StreamBuf {
    name: String,
    channels: usize,
    queue: VecDeque<(f64, Vec<f64>)>,
    /// Most recent sample whose timestamp the master clock has passed.
    last: Option<(f64, Vec<f64>)>,
    /// Earliest timestamp ever pushed.
    first_seen: Option<f64>,
    /// Latest timestamp ever pushed.
    watermark: f64,
    finished: bool,
}

impl StreamBuf {
    /// All samples up to `horizon` are guaranteed present.
    fn settled_past(&self, horizon: f64) -> bool {
        self.finished || self.watermark > horizon
    }

    /// The stream has begun by `horizon` (warm-up criterion).
    fn begun_by(&self, horizon: f64) -> bool {
        self.first_seen.is_some_and(|f| f <= horizon)
    }
}

/// Incremental multi-stream aligner.
#[derive(Debug)]
pub struct Synchronizer {
    streams: Vec<StreamBuf>,
    master: usize,
    tolerance: f64,
    max_gap: f64,
    last_frame_t: Option<f64>,
    out: VecDeque<SyncOutput>,
}

impl Synchronizer {
    pub fn new(metas: &[StreamMeta], cfg: &SyncConfig) -> Result<Self, SyncError> {
        if metas.is_empty() {
            return Err(SyncError::NoStreams);
        }
        for m in metas {
            if !(m.srate > 0.0) {
                return Err(SyncError::BadRate { stream: m.name.clone(), got: m.srate });
            }
        }
        let master = metas
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                // Strictly-greater rate wins; on ties the earlier index wins.
                a.srate.partial_cmp(&b.srate).unwrap().then(ib.cmp(ia))
            })
            .map(|(i, _)| i)
            .expect("non-empty");
        let slowest = metas.iter().map(|m| m.srate).fold(f64::INFINITY, f64::min);
        let tolerance = cfg.tolerance.unwrap_or(0.5 / slowest);
        if !(tolerance > 0.0) {
            return Err(SyncError::BadTolerance { got: tolerance });
        }
        if !(cfg.max_gap > 0.0) {
            return Err(SyncError::BadMaxGap { got: cfg.max_gap });
        }
        let streams = metas
            .iter()
            .map(|m| StreamBuf {
                name: m.name.clone(),
                channels: m.channel_count(),
                queue: VecDeque::new(),
                last: None,
                first_seen: None,
                watermark: f64::NEG_INFINITY,
                finished: false,
            })
            .collect();
        Ok(Self { streams, master, tolerance, max_gap: cfg.max_gap, last_frame_t: None, out: VecDeque::new() })
    }

    pub fn master_index(&self) -> usize {
        self.master
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Feed one chunk of one stream. Chunks of the same stream must arrive
    /// in time order.
    pub fn push(&mut self, stream: usize, chunk: &SampleChunk) -> Result<(), SyncError> {
        let count = self.streams.len();
        let buf = self.streams.get_mut(stream).ok_or(SyncError::BadStreamIndex { got: stream, count })?;
        if chunk.channel_count() != buf.channels {
            return Err(SyncError::ChannelMismatch {
                stream: buf.name.clone(),
                expected: buf.channels,
                got: chunk.channel_count(),
            });
        }
        if let Some(first) = chunk.timestamps.first() {
            if *first <= buf.watermark {
                return Err(SyncError::NonMonotonic {
                    stream: buf.name.clone(),
                    at: buf.watermark,
                    next: *first,
                });
            }
        }
        for (i, t) in chunk.timestamps.iter().enumerate() {
            buf.queue.push_back((*t, chunk.values.row(i).to_vec()));
            buf.watermark = *t;
            buf.first_seen.get_or_insert(*t);
        }
        self.advance();
        Ok(())
    }

    /// Declare a stream complete: no more samples will arrive.
    pub fn finish(&mut self, stream: usize) -> Result<(), SyncError> {
        let count = self.streams.len();
        let buf = self.streams.get_mut(stream).ok_or(SyncError::BadStreamIndex { got: stream, count })?;
        buf.finished = true;
        self.advance();
        Ok(())
    }

    pub fn finish_all(&mut self) {
        for b in &mut self.streams {
            b.finished = true;
        }
        self.advance();
    }

    /// Pop the next ready output, if any.
    pub fn poll(&mut self) -> Option<SyncOutput> {
        self.out.pop_front()
    }

    fn advance(&mut self) {
        loop {
            let Some(&(t, _)) = self.streams[self.master].queue.front() else { return };
            let horizon = t + self.tolerance;
            let ready = self
                .streams
                .iter()
                .enumerate()
                .all(|(i, b)| i == self.master || b.settled_past(horizon));
            if !ready {
                return;
            }
            let (t, master_values) = self.streams[self.master].queue.pop_front().expect("peeked");
            let mb = &mut self.streams[self.master];
            mb.last = Some((t, master_values.clone()));

            // Warm-up: every stream must have begun by t + tolerance.
            let begun = self.streams.iter().all(|b| b.begun_by(horizon));
            if !begun {
                continue;
            }

            if let Some(prev) = self.last_frame_t {
                if t - prev > self.max_gap {
                    self.out.push_back(SyncOutput::Gap(EventRecord::new(
                        prev,
                        GAP_TAG,
                        serde_json::json!({ "from": prev, "to": t, "seconds": t - prev }),
                    )));
                }
            }
            self.last_frame_t = Some(t);

            let tolerance = self.tolerance;
            let master = self.master;
            let slots = self
                .streams
                .iter_mut()
                .enumerate()
                .map(|(i, b)| {
                    if i == master {
                        return StreamSlot { values: master_values.clone(), source_t: t, stale: false };
                    }
                    // Retire everything at or before t; the newest becomes
                    // the forward-fill source.
                    while b.queue.front().is_some_and(|(ts, _)| *ts <= t) {
                        b.last = b.queue.pop_front();
                    }
                    let past = b.last.as_ref().map(|(ts, _)| t - ts);
                    let future = b
                        .queue
                        .front()
                        .filter(|(ts, _)| *ts <= t + tolerance)
                        .map(|(ts, _)| *ts - t);
                    // Distance ties prefer the earlier (past) sample.
                    let use_future = match (past, future) {
                        (Some(dp), Some(df)) => df < dp,
                        (None, Some(_)) => true,
                        _ => false,
                    };
                    if use_future {
                        let (ts, vals) = b.queue.front().expect("checked");
                        StreamSlot { values: vals.clone(), source_t: *ts, stale: false }
                    } else {
                        let (ts, vals) = b.last.as_ref().expect("warm-up guarantees a sample");
                        StreamSlot { values: vals.clone(), source_t: *ts, stale: t - ts > tolerance }
                    }
                })
                .collect();
            self.out.push_back(SyncOutput::Frame(FusedFrame { t, slots }));
        }
    }
}

/// Align complete recordings in one call: push everything, finish, drain.
pub fn synchronize(
    metas: &[StreamMeta],
    data: &[SampleChunk],
    cfg: &SyncConfig,
) -> Result<(Vec<FusedFrame>, Vec<EventRecord>), SyncError> {
    let mut sync = Synchronizer::new(metas, cfg)?;
    for (i, chunk) in data.iter().enumerate() {
        if !chunk.is_empty() {
            sync.push(i, chunk)?;
        }
    }
    sync.finish_all();
    let mut frames = Vec::new();
    let mut gaps = Vec::new();
    while let Some(item) = sync.poll() {
        match item {
            SyncOutput::Frame(f) => frames.push(f),
            SyncOutput::Gap(g) => gaps.push(g),
        }
    }
    Ok((frames, gaps))
}
