//! Epoching: cutting a continuous recording into fixed windows or
//! event-locked windows.
//!
//! Epochs carry their start time and rate so downstream feature extraction
//! can fetch time-aligned windows from auxiliary streams (EOG, eye tracking)
//! that were never resampled onto the main signal's clock.

use ndarray::Array2;

use super::DspError;

/// One analysis window cut from a continuous signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    /// Position in the emitted epoch sequence.
    pub index: usize,
    /// Start time of the window on the session clock (seconds).
    pub t0: f64,
    /// Sample rate of `data` in Hz.
    pub srate: f64,
    /// samples x channels.
    pub data: Array2<f64>,
    /// Ground-truth label when the caller supplied labeling context
    /// (block annotations or per-event labels).
    pub label: Option<String>,
}

impl Epoch {
    /// Duration of the window in seconds.
    pub fn duration(&self) -> f64 {
        self.data.nrows() as f64 / self.srate
    }

    /// End time (exclusive) of the window.
    pub fn t_end(&self) -> f64 {
        self.t0 + self.duration()
    }
}

/// A labeled time interval `[start, end)`, typically reconstructed from a
/// session's event log.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelBlock {
    pub start: f64,
    pub end: f64,
    pub label: String,
}

/// Cut back-to-back, non-overlapping epochs of `duration` seconds.
///
/// The signal starts at time `t0` and runs at `srate`. A trailing window
/// shorter than `duration` is dropped. When `blocks` is non-empty, each
/// epoch is labeled by the block containing its midpoint (unlabeled when no
/// block does); an empty `blocks` slice leaves labels `None`.
pub fn epoch_fixed(
    data: &Array2<f64>,
    t0: f64,
    srate: f64,
    duration: f64,
    blocks: &[LabelBlock],
) -> Result<Vec<Epoch>, DspError> {
    if !(srate.is_finite() && srate > 0.0) {
        return Err(DspError::BadSampleRate { srate });
    }
    let len = (duration * srate).round() as usize;
    if len == 0 || !duration.is_finite() {
        return Err(DspError::EmptyEpoch { duration, srate });
    }
    let mut out = Vec::with_capacity(data.nrows() / len);
    let mut start = 0usize;
    while start + len <= data.nrows() {
        let window = data.slice(ndarray::s![start..start + len, ..]).to_owned();
        let t_start = t0 + start as f64 / srate;
        let midpoint = t_start + 0.5 * len as f64 / srate;
        let label = blocks
            .iter()
            .find(|b| b.start <= midpoint && midpoint < b.end)
            .map(|b| b.label.clone());
        out.push(Epoch { index: out.len(), t0: t_start, srate, data: window, label });
        start += len;
    }
    Ok(out)
}

/// A timestamped trigger to lock an epoch onto, with the label the epoch
/// should carry (e.g. `target` / `nontarget`).
#[derive(Debug, Clone, PartialEq)]
pub struct LockEvent {
    pub t: f64,
    pub label: String,
}

/// Which events were dropped by [`epoch_around_events`] and why.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventEpochReport {
    pub kept: usize,
    /// Event times whose window fell (partly) outside the recording.
    pub out_of_range: Vec<f64>,
}

/// Cut one epoch per event, spanning `pre` seconds before to `post` seconds
/// after the event time.
///
/// Every epoch has exactly `round((pre + post) * srate)` samples. Events
/// whose window is not fully inside the recording are skipped and reported,
/// not errors: early/late stimuli are expected at session boundaries.
pub fn epoch_around_events(
    data: &Array2<f64>,
    t0: f64,
    srate: f64,
    pre: f64,
    post: f64,
    events: &[LockEvent],
) -> Result<(Vec<Epoch>, EventEpochReport), DspError> {
    if !(srate.is_finite() && srate > 0.0) {
        return Err(DspError::BadSampleRate { srate });
    }
    let len = ((pre + post) * srate).round() as usize;
    if len == 0 || !(pre + post).is_finite() {
        return Err(DspError::EmptyEpoch { duration: pre + post, srate });
    }
    let mut out = Vec::new();
    let mut report = EventEpochReport::default();
    for ev in events {
        let start_f = (ev.t - pre - t0) * srate;
        let start = start_f.round() as i64;
        if start < 0 || start as usize + len > data.nrows() {
            report.out_of_range.push(ev.t);
            continue;
        }
        let start = start as usize;
        let window = data.slice(ndarray::s![start..start + len, ..]).to_owned();
        out.push(Epoch {
            index: out.len(),
            t0: t0 + start as f64 / srate,
            srate,
            data: window,
            label: Some(ev.label.clone()),
        });
    }
    report.kept = out.len();
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize, ch: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, ch), |(i, c)| (i * 10 + c) as f64)
    }

    #[test]
    fn fixed_epochs_partition_the_signal() {
        let data = ramp(2625, 2); // 10.5 s at 250 Hz
        let epochs = epoch_fixed(&data, 0.0, 250.0, 1.0, &[]).unwrap();
        assert_eq!(epochs.len(), 10, "trailing half-second window must be dropped");
        for (k, e) in epochs.iter().enumerate() {
            assert_eq!(e.data.nrows(), 250);
            assert_eq!(e.index, k);
            assert!((e.t0 - k as f64).abs() < 1e-12);
            // Concatenation reproduces the signal prefix exactly.
            assert_eq!(e.data[[0, 0]], data[[k * 250, 0]]);
            assert_eq!(e.data[[249, 1]], data[[k * 250 + 249, 1]]);
        }
    }

    #[test]
    fn fixed_epochs_label_by_midpoint_block() {
        let data = ramp(1000, 1); // 10 s at 100 Hz
        let blocks = vec![
            LabelBlock { start: 0.0, end: 4.5, label: "calm".into() },
            LabelBlock { start: 4.5, end: 10.0, label: "distracted".into() },
        ];
        let epochs = epoch_fixed(&data, 0.0, 100.0, 1.0, &blocks).unwrap();
        // Epoch 4 spans [4, 5): midpoint 4.5 falls in the second block.
        let labels: Vec<&str> =
            epochs.iter().map(|e| e.label.as_deref().unwrap()).collect();
        assert_eq!(&labels[..4], &["calm"; 4]);
        assert_eq!(&labels[4..], &["distracted"; 6]);
    }

    #[test]
    fn fixed_epochs_outside_blocks_are_unlabeled() {
        let data = ramp(300, 1);
        let blocks = vec![LabelBlock { start: 0.0, end: 1.0, label: "a".into() }];
        let epochs = epoch_fixed(&data, 0.0, 100.0, 1.0, &blocks).unwrap();
        assert_eq!(epochs[0].label.as_deref(), Some("a"));
        assert_eq!(epochs[1].label, None);
        assert_eq!(epochs[2].label, None);
    }

    #[test]
    fn event_epochs_have_exact_sample_count_and_position() {
        let data = ramp(5000, 1); // 20 s at 250 Hz
        let events = vec![LockEvent { t: 10.0, label: "target".into() }];
        let (epochs, report) =
            epoch_around_events(&data, 0.0, 250.0, 0.1, 0.8, &events).unwrap();
        assert_eq!(report.kept, 1);
        assert!(report.out_of_range.is_empty());
        let e = &epochs[0];
        assert_eq!(e.data.nrows(), 225, "0.9 s at 250 Hz");
        // Event at 10.0 s minus 0.1 s pre-window = sample 2475.
        assert_eq!(e.data[[0, 0]], data[[2475, 0]]);
        assert!((e.t0 - 9.9).abs() < 1e-12);
        assert_eq!(e.label.as_deref(), Some("target"));
    }

    #[test]
    fn event_epochs_skip_out_of_range_events() {
        let data = ramp(250, 1); // 1 s at 250 Hz
        let events = vec![
            LockEvent { t: 0.05, label: "early".into() },  // needs t=-0.05
            LockEvent { t: 0.5, label: "ok".into() },      // [0.4, 1.3) > end
            LockEvent { t: 0.15, label: "fits".into() },   // [0.05, 0.95) fits
        ];
        let (epochs, report) =
            epoch_around_events(&data, 0.0, 250.0, 0.1, 0.8, &events).unwrap();
        assert_eq!(report.kept, 1);
        assert_eq!(epochs[0].label.as_deref(), Some("fits"));
        assert_eq!(report.out_of_range, vec![0.05, 0.5]);
    }

    #[test]
    fn rejects_degenerate_windows() {
        let data = ramp(100, 1);
        assert!(epoch_fixed(&data, 0.0, 100.0, 0.0, &[]).is_err());
        assert!(epoch_fixed(&data, 0.0, 0.0, 1.0, &[]).is_err());
        assert!(epoch_around_events(&data, 0.0, 100.0, 0.0, 0.0, &[]).is_err());
    }
}
