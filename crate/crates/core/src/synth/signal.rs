//! Signal-level generators: calibrated band noise, event-locked bumps,
//! blink artifacts, and eye-openness traces.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{shape_err, SynthError};
use crate::dsp::{apply_filter, design_bandpass, FilterMode};
use crate::features::{band_power, welch_psd};

/// Band-limited unit noise: white Gaussian noise filtered to `(low, high)`
/// and rescaled so its measured in-band power is 1.0. Multiplying by
/// `sqrt(p)` then yields a component with in-band power `p`.
fn gen_unit_band_noise(
    n: usize,
    srate: f64,
    low: f64,
    high: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Array1<f64>, SynthError> {
    let nyquist = srate / 2.0;
    if !(low > 0.0 && low < high && high < nyquist) {
        return Err(SynthError::BandOutsideNyquist { low, high, nyquist });
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let white = Array2::from_shape_fn((n, 1), |_| normal.sample(rng));
    let filt = design_bandpass(low, high, 4, srate)?;
    let shaped = apply_filter(&filt, &white, FilterMode::ZeroPhase);

    // Calibrate against the same estimator the analysis side uses.
    let seg = n.min(2048);
    let psd = welch_psd(&shaped, srate, seg, 0.5)?;
    let measured = band_power(&psd, 0, low, high.min(psd.top_freq()))?;
    if !(measured > 0.0) {
        return Err(shape_err(format!(
            "generated component in ({low}, {high}) Hz has no measurable power"
        )));
    }
    let scale = (1.0 / measured).sqrt();
    Ok(shaped.column(0).mapv(|v| v * scale))
}

/// Stationary multichannel background: one independent component per
/// channel and band, with `powers[(channel, band)]` as the in-band power.
/// Zero entries contribute nothing; an all-zero profile yields silence.
pub fn gen_background_eeg(
    n: usize,
    srate: f64,
    bands: &[(f64, f64)],
    powers: &Array2<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<Array2<f64>, SynthError> {
    gen_modulated_eeg(n, srate, bands, &[(0, n)], &[powers.clone()], rng)
}

/// Background whose band powers step at block boundaries.
///
/// `blocks[k]` is the half-open sample range of block `k`, and
/// `powers[k][(channel, band)]` the in-band power inside it. A single
/// stationary noise component per channel and band spans the whole
/// recording and is amplitude-scaled per block, so block transitions do
/// not introduce filter transients.
pub fn gen_modulated_eeg(
    n: usize,
    srate: f64,
    bands: &[(f64, f64)],
    blocks: &[(usize, usize)],
    powers: &[Array2<f64>],
    rng: &mut ChaCha8Rng,
) -> Result<Array2<f64>, SynthError> {
    if powers.len() != blocks.len() {
        return Err(shape_err(format!(
            "{} power profiles for {} blocks",
            powers.len(),
            blocks.len()
        )));
    }
    let channels = powers.first().map(|p| p.nrows()).unwrap_or(0);
    if channels == 0 || n == 0 {
        return Err(shape_err("need at least one channel and one sample".to_string()));
    }
    for (k, p) in powers.iter().enumerate() {
        if p.nrows() != channels || p.ncols() != bands.len() {
            return Err(shape_err(format!(
                "power profile {k} is {}x{}, expected {channels}x{}",
                p.nrows(),
                p.ncols(),
                bands.len()
            )));
        }
    }
    for &(a, b) in blocks {
        if a >= b || b > n {
            return Err(shape_err(format!("block {a}..{b} out of range for {n} samples")));
        }
    }

    let mut out = Array2::zeros((n, channels));
    for ch in 0..channels {
        for (bi, &(low, high)) in bands.iter().enumerate() {
            if powers.iter().all(|p| p[(ch, bi)] == 0.0) {
                continue;
            }
            let component = gen_unit_band_noise(n, srate, low, high, rng)?;
            for (k, &(a, b)) in blocks.iter().enumerate() {
                let gain = powers[k][(ch, bi)].max(0.0).sqrt();
                if gain == 0.0 {
                    continue;
                }
                for i in a..b {
                    out[(i, ch)] += gain * component[i];
                }
            }
        }
    }
    Ok(out)
}

/// An event-locked potential: a Gaussian bump `amplitude * w_ch *
/// exp(-(t - onset - latency)^2 / (2 width^2))` added to every channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ErpTemplate {
    /// Seconds from event onset to the bump peak.
    pub latency: f64,
    /// Gaussian sigma in seconds.
    pub width: f64,
    /// Peak amplitude at a weight of 1.0.
    pub amplitude: f64,
    /// Spatial weight per channel.
    pub weights: Vec<f64>,
}

/// Add one ERP instance to a recording. `array_t0` is the timestamp of
/// `data` row 0; `onset` the event time on the same clock.
pub fn inject_erp(
    data: &mut Array2<f64>,
    srate: f64,
    array_t0: f64,
    onset: f64,
    erp: &ErpTemplate,
) -> Result<(), SynthError> {
    if erp.weights.len() != data.ncols() {
        return Err(shape_err(format!(
            "{} ERP weights for {} channels",
            erp.weights.len(),
            data.ncols()
        )));
    }
    let peak_t = onset + erp.latency;
    // The bump is negligible beyond 5 sigma; bound the touched rows.
    let lo_t = peak_t - 5.0 * erp.width;
    let hi_t = peak_t + 5.0 * erp.width;
    let lo = (((lo_t - array_t0) * srate).floor().max(0.0)) as usize;
    let hi = ((((hi_t - array_t0) * srate).ceil()) as usize).min(data.nrows());
    for i in lo..hi {
        let t = array_t0 + i as f64 / srate;
        let z = (t - peak_t) / erp.width;
        let bump = erp.amplitude * (-0.5 * z * z).exp();
        for (ch, w) in erp.weights.iter().enumerate() {
            data[(i, ch)] += bump * w;
        }
    }
    Ok(())
}

/// Blink onset times over `duration` seconds: a regular grid at `rate`
/// blinks per second, each onset jittered by `±jitter` of the spacing.
pub fn blink_times(duration: f64, rate: f64, jitter: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if !(rate > 0.0) || !(duration > 0.0) {
        return Vec::new();
    }
    let spacing = 1.0 / rate;
    let mut times = Vec::new();
    let mut t = spacing * 0.5;
    while t < duration - 0.3 {
        let j = if jitter > 0.0 { rng.gen_range(-jitter..jitter) * spacing } else { 0.0 };
        times.push(t + j);
        t += spacing;
    }
    times
}

/// One biphasic blink: a 100 ms positive lobe followed by a 50 ms negative
/// rebound at 30% of the peak. Peak value is 1.0; scale to taste.
pub fn blink_waveform(srate: f64) -> Vec<f64> {
    let up = (0.100 * srate).round() as usize;
    let down = (0.050 * srate).round() as usize;
    let mut w = Vec::with_capacity(up + down);
    for i in 0..up {
        let phase = (i as f64 + 0.5) / up as f64 * std::f64::consts::PI;
        w.push(phase.sin());
    }
    for i in 0..down {
        let phase = (i as f64 + 0.5) / down as f64 * std::f64::consts::PI;
        w.push(-0.3 * phase.sin());
    }
    w
}

/// Sum copies of `waveform * amplitude` starting at each onset time.
pub fn render_pulses(
    n: usize,
    srate: f64,
    times: &[f64],
    waveform: &[f64],
    amplitude: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for &t in times {
        let start = (t * srate).round() as i64;
        for (k, w) in waveform.iter().enumerate() {
            let i = start + k as i64;
            if (0..n as i64).contains(&i) {
                out[i as usize] += amplitude * w;
            }
        }
    }
    out
}

/// Eye-openness trace in `[0, 1]` following a piecewise drowsiness profile.
///
/// `segments[k]` is a half-open sample range with drowsiness `d` in
/// `[0, 1]`. Inside a segment, eyes close for ~0.1 s bursts spaced so the
/// closed-time fraction is `0.65 * d`; between closures openness hovers
/// near 0.92 with light noise. Closure onsets sit on a regular grid with
/// 5% jitter, keeping the trace low-noise enough for crisp thresholding.
pub fn gen_eye_openness(
    n: usize,
    srate: f64,
    segments: &[(usize, usize, f64)],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, SynthError> {
    const OPEN: f64 = 0.92;
    const CLOSED: f64 = 0.04;
    const PLATEAU: f64 = 0.093; // closed dwell; ramps add back up to ~0.1 s under a 0.2 threshold
    const RAMP: f64 = 0.02;

    for &(a, b, d) in segments {
        if a >= b || b > n {
            return Err(shape_err(format!("segment {a}..{b} out of range for {n} samples")));
        }
        if !(0.0..=1.0).contains(&d) {
            return Err(shape_err(format!("drowsiness {d} outside [0, 1]")));
        }
    }

    let noise = Normal::new(0.0, 0.012).expect("fixed sigma");
    let mut out: Vec<f64> = (0..n).map(|_| OPEN + noise.sample(rng)).collect();

    for &(a, b, d) in segments {
        if d <= 0.0 {
            continue;
        }
        let spacing = PLATEAU / (0.65 * d).min(0.93);
        let seg_t0 = a as f64 / srate;
        let seg_t1 = b as f64 / srate;
        let mut c = seg_t0 + spacing * 0.5;
        while c + PLATEAU + RAMP < seg_t1 {
            let onset = c + rng.gen_range(-0.05..0.05) * spacing;
            paint_closure(&mut out, srate, onset, PLATEAU, RAMP, OPEN, CLOSED);
            c += spacing;
        }
    }
    for v in &mut out {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(out)
}

fn paint_closure(out: &mut [f64], srate: f64, onset: f64, plateau: f64, ramp: f64, open: f64, closed: f64) {
    let t_start = onset - ramp;
    let t_end = onset + plateau + ramp;
    let lo = ((t_start * srate).floor().max(0.0)) as usize;
    let hi = (((t_end * srate).ceil()) as usize).min(out.len());
    for i in lo..hi {
        let t = i as f64 / srate;
        let level = if t < onset {
            let f = ((onset - t) / ramp).clamp(0.0, 1.0);
            closed + (open - closed) * f
        } else if t <= onset + plateau {
            closed
        } else {
            let f = ((t - onset - plateau) / ramp).clamp(0.0, 1.0);
            closed + (open - closed) * f
        };
        out[i] = out[i].min(level);
    }
}
