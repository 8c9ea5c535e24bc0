//! Time-domain statistics: summary stats, Hjorth parameters, PERCLOS.

use serde::{Deserialize, Serialize};

use super::FeatureError;

/// Summary statistics of one channel within one epoch.
///
/// Variance and standard deviation are population statistics (divide by
/// `n`), matching the Hjorth activity convention. Kurtosis is the *excess*
/// kurtosis (Gaussian = 0). Quartiles use linear interpolation between
/// order statistics (the same convention as most numeric environments).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub variance: f64,
    pub std: f64,
    pub kurtosis: f64,
}

/// Linear-interpolation quantile on a pre-sorted slice: position
/// `(n - 1) * q` split into integer and fractional parts.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = (n - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < n {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    } else {
        sorted[n - 1]
    }
}

/// Compute [`TimeStats`] for a window of samples.
pub fn time_stats(x: &[f64]) -> Result<TimeStats, FeatureError> {
    if x.is_empty() {
        return Err(FeatureError::EmptyInput { op: "time_stats" });
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut m2, mut m4) = (0.0, 0.0);
    for &v in x {
        min = min.min(v);
        max = max.max(v);
        let d = v - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m4 /= n;
    let variance = m2;
    // Zero-variance windows get kurtosis 0 by convention (a constant has no
    // tail shape to speak of).
    let kurtosis = if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 };

    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    Ok(TimeStats {
        mean,
        min,
        max,
        median: quantile_sorted(&sorted, 0.5),
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
        variance,
        std: variance.sqrt(),
        kurtosis,
    })
}

/// Hjorth descriptors of one channel window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hjorth {
    /// Signal power: population variance.
    pub activity: f64,
    /// RMS of the normalized first derivative; for a pure sinusoid at
    /// frequency `f` sampled at `fs` this is exactly `2 sin(pi f / fs)`.
    pub mobility: f64,
    /// Mobility of the first difference over mobility of the signal;
    /// 1 for a pure sinusoid, larger for broadband signals.
    pub complexity: f64,
}

/// Compute the Hjorth parameters of a window.
///
/// A constant window (zero variance) returns all-zero descriptors rather
/// than NaNs, so downstream feature matrices stay finite.
pub fn hjorth(x: &[f64]) -> Result<Hjorth, FeatureError> {
    if x.len() < 3 {
        return Err(FeatureError::EmptyInput { op: "hjorth" });
    }
    let var = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        v.iter().map(|&s| (s - m) * (s - m)).sum::<f64>() / n
    };
    let d1: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let d2: Vec<f64> = d1.windows(2).map(|w| w[1] - w[0]).collect();
    let (v0, v1, v2) = (var(x), var(&d1), var(&d2));
    if v0 <= 0.0 {
        return Ok(Hjorth { activity: 0.0, mobility: 0.0, complexity: 0.0 });
    }
    let mobility = (v1 / v0).sqrt();
    let complexity = if v1 > 0.0 { (v2 / v1).sqrt() / mobility } else { 0.0 };
    Ok(Hjorth { activity: v0, mobility, complexity })
}

/// PERCLOS: the fraction of samples whose eye-openness value is at or
/// below `closed_threshold` (eyes counted as closed).
///
/// Openness is expected in `[0, 1]` (1 = fully open); the measure is a pure
/// count ratio, so it is invariant to reordering of the window.
pub fn perclos(openness: &[f64], closed_threshold: f64) -> Result<f64, FeatureError> {
    if openness.is_empty() {
        return Err(FeatureError::EmptyInput { op: "perclos" });
    }
    if !(0.0..=1.0).contains(&closed_threshold) {
        return Err(FeatureError::BadThreshold { got: closed_threshold });
    }
    let closed = openness.iter().filter(|&&v| v <= closed_threshold).count();
    Ok(closed as f64 / openness.len() as f64)
}
