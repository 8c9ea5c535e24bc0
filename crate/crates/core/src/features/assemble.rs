//! Feature vector assembly from declarative specs.
//!
//! One epoch in, one named feature row out. Specs are walked in order, and
//! within a spec channels are walked in stream order, so the layout is
//! fully deterministic. Spectral specs share one PSD per stream per epoch.

use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::psd::{band_power, spectral_entropy, welch_psd, Psd};
use super::stats::{hjorth, perclos, time_stats, TimeStats};
use super::FeatureError;

/// The canonical EEG frequency bands (Hz), low edge inclusive, high edge
/// exclusive: delta, theta, alpha, beta, gamma.
pub const CANONICAL_BANDS: [(&str, f64, f64); 5] = [
    ("delta", 0.5, 4.0),
    ("theta", 4.0, 8.0),
    ("alpha", 8.0, 13.0),
    ("beta", 13.0, 30.0),
    ("gamma", 30.0, 60.0),
];

/// A named frequency band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandDef {
    pub name: String,
    pub low: f64,
    pub high: f64,
}

impl BandDef {
    pub fn canonical() -> Vec<BandDef> {
        CANONICAL_BANDS
            .iter()
            .map(|&(name, low, high)| BandDef { name: name.into(), low, high })
            .collect()
    }
}

/// Which summary statistic of a window (or of in-band PSD bins) to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    Mean,
    Min,
    Max,
    Median,
    Q1,
    Q3,
    Variance,
    Std,
    Kurtosis,
}

impl StatKind {
    pub const ALL: [StatKind; 9] = [
        StatKind::Mean,
        StatKind::Min,
        StatKind::Max,
        StatKind::Median,
        StatKind::Q1,
        StatKind::Q3,
        StatKind::Variance,
        StatKind::Std,
        StatKind::Kurtosis,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StatKind::Mean => "mean",
            StatKind::Min => "min",
            StatKind::Max => "max",
            StatKind::Median => "median",
            StatKind::Q1 => "q1",
            StatKind::Q3 => "q3",
            StatKind::Variance => "variance",
            StatKind::Std => "std",
            StatKind::Kurtosis => "kurtosis",
        }
    }

    fn pick(&self, s: &TimeStats) -> f64 {
        match self {
            StatKind::Mean => s.mean,
            StatKind::Min => s.min,
            StatKind::Max => s.max,
            StatKind::Median => s.median,
            StatKind::Q1 => s.q1,
            StatKind::Q3 => s.q3,
            StatKind::Variance => s.variance,
            StatKind::Std => s.std,
            StatKind::Kurtosis => s.kurtosis,
        }
    }
}

impl std::str::FromStr for StatKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StatKind::ALL
            .iter()
            .find(|k| k.name() == s)
            .copied()
            .ok_or_else(|| format!("unknown statistic `{s}`"))
    }
}

/// One feature family applied to one stream.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSpec {
    /// Integrated PSD per band per channel. Bands reaching past the
    /// stream's Nyquist are clipped to it; bands entirely above it are
    /// dropped (the stream cannot represent them).
    BandPower { stream: String, bands: Vec<BandDef> },
    /// Summary statistics of the in-band PSD bin values (spectral shape
    /// within each band), per band per channel.
    BandStats { stream: String, bands: Vec<BandDef>, stats: Vec<StatKind> },
    /// Normalized Shannon entropy of the per-channel spectrum.
    SpectralEntropy { stream: String },
    /// Time-domain summary statistics per channel.
    TimeStats { stream: String, stats: Vec<StatKind> },
    /// Hjorth activity / mobility / complexity per channel.
    Hjorth { stream: String },
    /// Fraction of eyes-closed samples per channel, threshold inclusive.
    Perclos { stream: String, closed_threshold: f64 },
    /// Every sample of the epoch window, flattened row-major
    /// (sample-major, channel-minor).
    Raw { stream: String },
}

impl FeatureSpec {
    pub fn stream(&self) -> &str {
        match self {
            FeatureSpec::BandPower { stream, .. }
            | FeatureSpec::BandStats { stream, .. }
            | FeatureSpec::SpectralEntropy { stream }
            | FeatureSpec::TimeStats { stream, .. }
            | FeatureSpec::Hjorth { stream }
            | FeatureSpec::Perclos { stream, .. }
            | FeatureSpec::Raw { stream } => stream,
        }
    }
}

/// Welch estimator settings shared by the spectral feature families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdConfig {
    /// Per-segment FFT length; `None` means the epoch length capped at 256.
    pub segment: Option<usize>,
    /// Fractional overlap between segments.
    pub overlap: f64,
}

impl Default for PsdConfig {
    fn default() -> Self {
        Self { segment: None, overlap: 0.5 }
    }
}

impl PsdConfig {
    fn segment_for(&self, epoch_len: usize) -> usize {
        self.segment.unwrap_or_else(|| epoch_len.min(256))
    }
}

/// One stream's samples for the epoch being featurized, at that stream's
/// own rate (auxiliary streams are windowed by time, never resampled).
#[derive(Debug, Clone)]
pub struct StreamWindow {
    pub stream: String,
    pub channels: Vec<String>,
    pub srate: f64,
    /// samples x channels.
    pub data: Array2<f64>,
}

/// Assemble one epoch's feature row.
///
/// Returns parallel `(names, values)` vectors. Names are globally unique
/// (`<stream>.<channel>.<feature>`); colliding specs are an error, as is a
/// spec referencing a stream that has no window here.
pub fn assemble_features(
    windows: &[StreamWindow],
    specs: &[FeatureSpec],
    psd_cfg: &PsdConfig,
) -> Result<(Vec<String>, Vec<f64>), FeatureError> {
    let by_name: HashMap<&str, &StreamWindow> =
        windows.iter().map(|w| (w.stream.as_str(), w)).collect();
    let mut psd_cache: HashMap<String, Psd> = HashMap::new();

    let mut names: Vec<String> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let push = |names: &mut Vec<String>, values: &mut Vec<f64>, name: String, v: f64| {
        names.push(name);
        values.push(v);
    };

    for spec in specs {
        let w = *by_name
            .get(spec.stream())
            .ok_or_else(|| FeatureError::UnknownStream { name: spec.stream().to_string() })?;
        if w.data.nrows() == 0 {
            return Err(FeatureError::EmptyInput { op: "assemble_features" });
        }
        match spec {
            FeatureSpec::BandPower { bands, .. } => {
                let psd = cached_psd(&mut psd_cache, w, psd_cfg)?;
                for (ch, label) in w.channels.iter().enumerate() {
                    for band in bands {
                        let Some((lo, hi)) = clip_band(band, psd.top_freq()) else { continue };
                        let p = band_power(psd, ch, lo, hi)?;
                        push(&mut names, &mut values, format!("{}.{}.{}_power", w.stream, label, band.name), p);
                    }
                }
            }
            FeatureSpec::BandStats { bands, stats, .. } => {
                let psd = cached_psd(&mut psd_cache, w, psd_cfg)?;
                for (ch, label) in w.channels.iter().enumerate() {
                    for band in bands {
                        let Some((lo, hi)) = clip_band(band, psd.top_freq()) else { continue };
                        let bins: Vec<f64> = psd
                            .freqs
                            .iter()
                            .enumerate()
                            .filter(|(_, &f)| f >= lo && f < hi)
                            .map(|(i, _)| psd.power[[i, ch]])
                            .collect();
                        if bins.is_empty() {
                            continue;
                        }
                        let s = time_stats(&bins)?;
                        for stat in stats {
                            push(
                                &mut names,
                                &mut values,
                                format!("{}.{}.{}_psd_{}", w.stream, label, band.name, stat.name()),
                                stat.pick(&s),
                            );
                        }
                    }
                }
            }
            FeatureSpec::SpectralEntropy { .. } => {
                let psd = cached_psd(&mut psd_cache, w, psd_cfg)?;
                for (ch, label) in w.channels.iter().enumerate() {
                    push(
                        &mut names,
                        &mut values,
                        format!("{}.{}.spectral_entropy", w.stream, label),
                        spectral_entropy(psd, ch),
                    );
                }
            }
            FeatureSpec::TimeStats { stats, .. } => {
                for (ch, label) in w.channels.iter().enumerate() {
                    let col: Vec<f64> = w.data.column(ch).to_vec();
                    let s = time_stats(&col)?;
                    for stat in stats {
                        push(
                            &mut names,
                            &mut values,
                            format!("{}.{}.{}", w.stream, label, stat.name()),
                            stat.pick(&s),
                        );
                    }
                }
            }
            FeatureSpec::Hjorth { .. } => {
                for (ch, label) in w.channels.iter().enumerate() {
                    let col: Vec<f64> = w.data.column(ch).to_vec();
                    let h = hjorth(&col)?;
                    for (suffix, v) in [
                        ("hjorth_activity", h.activity),
                        ("hjorth_mobility", h.mobility),
                        ("hjorth_complexity", h.complexity),
                    ] {
                        push(&mut names, &mut values, format!("{}.{}.{}", w.stream, label, suffix), v);
                    }
                }
            }
            FeatureSpec::Perclos { closed_threshold, .. } => {
                for (ch, label) in w.channels.iter().enumerate() {
                    let col: Vec<f64> = w.data.column(ch).to_vec();
                    let p = perclos(&col, *closed_threshold)?;
                    push(&mut names, &mut values, format!("{}.{}.perclos", w.stream, label), p);
                }
            }
            FeatureSpec::Raw { .. } => {
                for s in 0..w.data.nrows() {
                    for (ch, label) in w.channels.iter().enumerate() {
                        push(
                            &mut names,
                            &mut values,
                            format!("{}.t{}.{}", w.stream, s, label),
                            w.data[[s, ch]],
                        );
                    }
                }
            }
        }
    }

    // Uniqueness guard: collisions mean two specs emit the same name.
    let mut seen = std::collections::HashSet::with_capacity(names.len());
    for n in &names {
        if !seen.insert(n.as_str()) {
            return Err(FeatureError::NameCollision { name: n.clone() });
        }
    }
    Ok((names, values))
}

fn cached_psd<'a>(
    cache: &'a mut HashMap<String, Psd>,
    w: &StreamWindow,
    cfg: &PsdConfig,
) -> Result<&'a Psd, FeatureError> {
    if !cache.contains_key(&w.stream) {
        let psd = welch_psd(&w.data, w.srate, cfg.segment_for(w.data.nrows()), cfg.overlap)?;
        cache.insert(w.stream.clone(), psd);
    }
    Ok(&cache[&w.stream])
}

/// Clip a band to the representable grid; `None` when nothing remains.
fn clip_band(band: &BandDef, top: f64) -> Option<(f64, f64)> {
    if band.low >= top {
        return None;
    }
    Some((band.low, band.high.min(top)))
}

/// A stack of feature rows with shared names and per-epoch metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    /// epochs x features.
    pub values: Array2<f64>,
    /// Ground-truth label per epoch, when known.
    pub labels: Vec<Option<String>>,
    /// Epoch start times, for traceability back to the recording.
    pub epoch_t0: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>) -> Self {
        let width = names.len();
        Self { names, values: Array2::zeros((0, width)), labels: Vec::new(), epoch_t0: Vec::new() }
    }

    /// Append one epoch's row; the row length must match the names.
    pub fn push_row(
        &mut self,
        row: Vec<f64>,
        label: Option<String>,
        t0: f64,
    ) -> Result<(), FeatureError> {
        if row.len() != self.names.len() {
            return Err(FeatureError::RaggedRows { a: self.names.len(), b: row.len() });
        }
        self.values
            .push_row(ndarray::ArrayView1::from(&row))
            .expect("width checked above");
        self.labels.push(label);
        self.epoch_t0.push(t0);
        Ok(())
    }

    pub fn n_epochs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn eeg_window(channels: usize, n: usize, srate: f64, seed: u64) -> StreamWindow {
        let mut rng = crate::seed::rng(seed, "test/assemble");
        StreamWindow {
            stream: "eeg".into(),
            channels: (0..channels).map(|c| format!("C{c}")).collect(),
            srate,
            data: Array2::from_shape_fn((n, channels), |_| rng.gen_range(-1.0..1.0)),
        }
    }

    #[test]
    fn band_stats_produce_the_expected_64_features() {
        // 8 channels x 4 bands x {mean, std} = 64, in spec-then-channel order.
        let w = eeg_window(8, 500, 250.0, 1);
        let spec = FeatureSpec::BandStats {
            stream: "eeg".into(),
            bands: ["theta", "alpha", "beta", "gamma"]
                .iter()
                .map(|n| {
                    let (_, lo, hi) =
                        *CANONICAL_BANDS.iter().find(|(b, _, _)| b == n).unwrap();
                    BandDef { name: n.to_string(), low: lo, high: hi }
                })
                .collect(),
            stats: vec![StatKind::Mean, StatKind::Std],
        };
        let (names, values) =
            assemble_features(&[w], &[spec], &PsdConfig::default()).unwrap();
        assert_eq!(names.len(), 64);
        assert_eq!(values.len(), 64);
        assert_eq!(names[0], "eeg.C0.theta_psd_mean");
        assert_eq!(names[1], "eeg.C0.theta_psd_std");
        assert_eq!(names[8], "eeg.C1.theta_psd_mean", "channel-major order");
        assert!(values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn bands_above_nyquist_are_dropped_and_straddling_bands_clipped() {
        // 32 Hz stream: gamma (30-60) is unrepresentable, beta (13-30) is
        // clipped to 13-16.
        let w = eeg_window(2, 64, 32.0, 2);
        let spec = FeatureSpec::BandPower { stream: "eeg".into(), bands: BandDef::canonical() };
        let (names, _) = assemble_features(&[w], &[spec], &PsdConfig::default()).unwrap();
        assert_eq!(names.len(), 2 * 4, "five bands minus gamma, per channel");
        assert!(names.iter().any(|n| n.ends_with("beta_power")));
        assert!(!names.iter().any(|n| n.contains("gamma")));
    }

    #[test]
    fn full_feature_menu_is_deterministic_and_named_uniquely() {
        let eeg = eeg_window(3, 256, 250.0, 3);
        let mut rng = crate::seed::rng(4, "test/assemble-eye");
        let eye = StreamWindow {
            stream: "eye".into(),
            channels: vec!["openness".into()],
            srate: 90.0,
            data: Array2::from_shape_fn((90, 1), |_| rng.gen_range(0.0..1.0)),
        };
        let specs = vec![
            FeatureSpec::BandPower { stream: "eeg".into(), bands: BandDef::canonical() },
            FeatureSpec::SpectralEntropy { stream: "eeg".into() },
            FeatureSpec::TimeStats { stream: "eeg".into(), stats: StatKind::ALL.to_vec() },
            FeatureSpec::Hjorth { stream: "eeg".into() },
            FeatureSpec::Perclos { stream: "eye".into(), closed_threshold: 0.2 },
        ];
        let (names, values) =
            assemble_features(&[eeg.clone(), eye.clone()], &specs, &PsdConfig::default()).unwrap();
        // 3*(5 + 1 + 9 + 3) + 1 = 55
        assert_eq!(names.len(), 55);
        let (names2, values2) =
            assemble_features(&[eeg, eye], &specs, &PsdConfig::default()).unwrap();
        assert_eq!(names, names2);
        assert_eq!(values, values2);
        let unique: std::collections::HashSet<_> = names.iter().collect();
        assert_eq!(unique.len(), names.len(), "names must be unique");
    }

    #[test]
    fn raw_features_flatten_row_major() {
        let w = StreamWindow {
            stream: "eeg".into(),
            channels: vec!["A".into(), "B".into()],
            srate: 10.0,
            data: ndarray::array![[1.0, 2.0], [3.0, 4.0]],
        };
        let (names, values) = assemble_features(
            &[w],
            &[FeatureSpec::Raw { stream: "eeg".into() }],
            &PsdConfig::default(),
        )
        .unwrap();
        assert_eq!(names, vec!["eeg.t0.A", "eeg.t0.B", "eeg.t1.A", "eeg.t1.B"]);
        assert_eq!(values, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn unknown_stream_and_collisions_are_rejected() {
        let w = eeg_window(2, 128, 250.0, 5);
        let err = assemble_features(
            &[w.clone()],
            &[FeatureSpec::Hjorth { stream: "eog".into() }],
            &PsdConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, FeatureError::UnknownStream { .. }));

        let dup = vec![
            FeatureSpec::Hjorth { stream: "eeg".into() },
            FeatureSpec::Hjorth { stream: "eeg".into() },
        ];
        let err = assemble_features(&[w], &dup, &PsdConfig::default()).unwrap_err();
        assert!(matches!(err, FeatureError::NameCollision { .. }));
    }

    #[test]
    fn feature_matrix_rejects_ragged_rows() {
        let mut m = FeatureMatrix::new(vec!["a".into(), "b".into()]);
        m.push_row(vec![1.0, 2.0], Some("x".into()), 0.0).unwrap();
        let err = m.push_row(vec![1.0], None, 1.0).unwrap_err();
        assert!(matches!(err, FeatureError::RaggedRows { a: 2, b: 1 }));
        assert_eq!(m.n_epochs(), 1);
        assert_eq!(m.n_features(), 2);
    }
}
