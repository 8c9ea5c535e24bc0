//! Welch power spectral density, band power, and spectral entropy.
//!
//! The estimator follows the standard recipe: split the signal into
//! 50%-overlapping segments, remove each segment's mean, apply a periodic
//! Hann window, and average the one-sided periodograms. Scaling is chosen
//! as a *density* (power per Hz): integrating the PSD across the frequency
//! grid recovers the signal's variance, which is the property band powers
//! and the validation suite rely on.

use ndarray::Array2;
use rustfft::{num_complex::Complex64, FftPlanner};

use super::FeatureError;

/// One-sided power spectral density for every channel of an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    /// Frequency grid in Hz: `k * srate / nfft` for `k = 0..=nfft/2`.
    pub freqs: Vec<f64>,
    /// bins x channels, in power units per Hz.
    pub power: Array2<f64>,
}

impl Psd {
    /// Highest representable frequency (the Nyquist bin).
    pub fn top_freq(&self) -> f64 {
        *self.freqs.last().expect("grid never empty")
    }
}

/// Estimate the PSD of `data` (samples x channels) sampled at `srate` Hz.
///
/// `segment` is the per-segment FFT length; it is clamped to the signal
/// length, so short epochs degrade to a single full-length periodogram.
/// `overlap` is the fraction of each segment shared with the next
/// (0.5 is the usual choice).
pub fn welch_psd(
    data: &Array2<f64>,
    srate: f64,
    segment: usize,
    overlap: f64,
) -> Result<Psd, FeatureError> {
    let n = data.nrows();
    if n == 0 || data.ncols() == 0 {
        return Err(FeatureError::EmptyInput { op: "welch_psd" });
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(FeatureError::BadOverlap { got: overlap });
    }
    let seg = segment.min(n);
    if seg < 8 {
        return Err(FeatureError::SegmentTooShort { got: seg });
    }
    let step = ((seg as f64) * (1.0 - overlap)).round().max(1.0) as usize;

    // Periodic Hann window and its energy, for density scaling.
    let window: Vec<f64> = (0..seg)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / seg as f64).cos()))
        .collect();
    let win_energy: f64 = window.iter().map(|w| w * w).sum();

    let n_bins = seg / 2 + 1;
    let mut fft_planner = FftPlanner::new();
    let fft = fft_planner.plan_fft_forward(seg);

    let mut power = Array2::<f64>::zeros((n_bins, data.ncols()));
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];

    for ch in 0..data.ncols() {
        let col = data.column(ch);
        let mut n_segments = 0usize;
        let mut start = 0usize;
        while start + seg <= n {
            let slice = col.slice(ndarray::s![start..start + seg]);
            let mean = slice.sum() / seg as f64;
            for (i, (&x, &w)) in slice.iter().zip(window.iter()).enumerate() {
                buf[i] = Complex64::new((x - mean) * w, 0.0);
            }
            fft.process(&mut buf);
            for k in 0..n_bins {
                // One-sided density: double everything except DC and (for
                // even segment lengths) the Nyquist bin.
                let two_sided = buf[k].norm_sqr() / (srate * win_energy);
                let factor = if k == 0 || (seg % 2 == 0 && k == n_bins - 1) { 1.0 } else { 2.0 };
                power[[k, ch]] += factor * two_sided;
            }
            n_segments += 1;
            start += step;
        }
        if n_segments > 1 {
            for k in 0..n_bins {
                power[[k, ch]] /= n_segments as f64;
            }
        }
    }

    let freqs = (0..n_bins).map(|k| k as f64 * srate / seg as f64).collect();
    Ok(Psd { freqs, power })
}

/// Integrate a channel's PSD over `[low, high)` Hz by the trapezoidal rule
/// on the grid points inside the interval.
pub fn band_power(psd: &Psd, channel: usize, low: f64, high: f64) -> Result<f64, FeatureError> {
    if !(low.is_finite() && high.is_finite()) || low < 0.0 || low >= high {
        return Err(FeatureError::BadBand { low, high });
    }
    let top = psd.top_freq();
    if low >= top {
        return Err(FeatureError::BandOutOfRange { low, high, top });
    }
    let idx: Vec<usize> = psd
        .freqs
        .iter()
        .enumerate()
        .filter(|(_, &f)| f >= low && f < high)
        .map(|(i, _)| i)
        .collect();
    if idx.len() < 2 {
        // A band narrower than one grid step carries no integrable area.
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for w in idx.windows(2) {
        let (i, j) = (w[0], w[1]);
        let df = psd.freqs[j] - psd.freqs[i];
        acc += 0.5 * (psd.power[[i, channel]] + psd.power[[j, channel]]) * df;
    }
    Ok(acc)
}

/// Total integral of a channel's PSD over the whole grid (approximately the
/// signal variance, by the estimator's scaling).
pub fn total_power(psd: &Psd, channel: usize) -> f64 {
    let mut acc = 0.0;
    for k in 1..psd.freqs.len() {
        let df = psd.freqs[k] - psd.freqs[k - 1];
        acc += 0.5 * (psd.power[[k - 1, channel]] + psd.power[[k, channel]]) * df;
    }
    acc
}

/// Normalized Shannon spectral entropy of a channel, in `[0, 1]`.
///
/// The PSD is normalized to a probability distribution over bins; entropy
/// is divided by `ln(bin count)` so a flat spectrum scores 1 and a single
/// occupied bin scores 0. An all-zero spectrum scores 0 by convention.
pub fn spectral_entropy(psd: &Psd, channel: usize) -> f64 {
    let total: f64 = psd.power.column(channel).sum();
    let n_bins = psd.freqs.len();
    if total <= 0.0 || n_bins < 2 {
        return 0.0;
    }
    let mut h = 0.0;
    for k in 0..n_bins {
        let p = psd.power[[k, channel]] / total;
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    h / (n_bins as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn tone(n: usize, f: f64, srate: f64, amp: f64) -> Array2<f64> {
        Array2::from_shape_fn((n, 1), |(i, _)| amp * (2.0 * PI * f * i as f64 / srate).sin())
    }

    #[test]
    fn sine_peak_lands_on_its_bin_and_integrates_to_half() {
        // 10 Hz unit sine, one full-length segment: bin width 1 Hz.
        let srate = 250.0;
        let x = tone(250, 10.0, srate, 1.0);
        let psd = welch_psd(&x, srate, 250, 0.5).unwrap();
        let peak = psd
            .power
            .column(0)
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        assert!((psd.freqs[peak] - 10.0).abs() < 1e-9, "peak at {} Hz", psd.freqs[peak]);
        let integral = total_power(&psd, 0);
        assert!(
            (integral - 0.5).abs() < 0.02 * 0.5,
            "unit sine should integrate to 0.5, got {integral}"
        );
    }

    #[test]
    fn integral_matches_variance_for_tones_and_noise() {
        let srate = 250.0;
        // Two-tone signal with known variance 0.5*(1^2 + 0.5^2).
        let x = Array2::from_shape_fn((2500, 1), |(i, _)| {
            let t = i as f64 / srate;
            (2.0 * PI * 7.0 * t).sin() + 0.5 * (2.0 * PI * 40.0 * t).sin()
        });
        let psd = welch_psd(&x, srate, 256, 0.5).unwrap();
        let want = 0.5 + 0.5 * 0.25;
        let got = total_power(&psd, 0);
        assert!((got - want).abs() < 0.02 * want, "two-tone variance {want} vs integral {got}");

        // Broadband noise: compare against the sample variance.
        let mut rng = crate::seed::rng(1234, "test/welch-noise");
        let noise = Array2::from_shape_fn((5000, 1), |_| rng.gen_range(-1.0..1.0f64));
        let mean = noise.column(0).sum() / 5000.0;
        let var = noise.column(0).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 5000.0;
        let psd = welch_psd(&noise, srate, 256, 0.5).unwrap();
        let got = total_power(&psd, 0);
        assert!(
            (got - var).abs() < 0.05 * var,
            "broadband variance {var} vs integral {got}"
        );
    }

    #[test]
    fn matches_direct_periodogram_for_single_segment() {
        // Independent oracle: a plain DFT periodogram computed longhand,
        // same windowing and scaling, on a signal exactly one segment long.
        let srate = 100.0;
        let n = 128;
        let mut rng = crate::seed::rng(77, "test/welch-oracle");
        let x = Array2::from_shape_fn((n, 1), |_| rng.gen_range(-1.0..1.0f64));
        let psd = welch_psd(&x, srate, n, 0.5).unwrap();

        let window: Vec<f64> =
            (0..n).map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos())).collect();
        let mean = x.column(0).sum() / n as f64;
        let we: f64 = window.iter().map(|w| w * w).sum();
        for k in 0..=n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for i in 0..n {
                let ang = 2.0 * PI * k as f64 * i as f64 / n as f64;
                let v = (x[[i, 0]] - mean) * window[i];
                re += v * ang.cos();
                im -= v * ang.sin();
            }
            let factor = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
            let want = factor * (re * re + im * im) / (srate * we);
            let got = psd.power[[k, 0]];
            assert!(
                (got - want).abs() <= 1e-9 * want.max(1.0),
                "bin {k}: {got} vs oracle {want}"
            );
        }
    }

    #[test]
    fn band_power_captures_a_tone_in_its_band() {
        let srate = 250.0;
        let x = tone(2500, 10.0, srate, 1.0);
        let psd = welch_psd(&x, srate, 250, 0.5).unwrap();
        let alpha = band_power(&psd, 0, 8.0, 13.0).unwrap();
        let total = total_power(&psd, 0);
        assert!(alpha / total >= 0.95, "alpha holds {} of total", alpha / total);
        // Disjoint canonical bands never sum to more than the whole.
        let sum: f64 = [(0.5, 4.0), (4.0, 8.0), (8.0, 13.0), (13.0, 30.0), (30.0, 60.0)]
            .iter()
            .map(|&(lo, hi)| band_power(&psd, 0, lo, hi).unwrap())
            .sum();
        assert!(sum <= total * (1.0 + 1e-9), "bands {sum} exceed total {total}");
    }

    #[test]
    fn band_power_rejects_bad_bands() {
        let x = tone(500, 10.0, 250.0, 1.0);
        let psd = welch_psd(&x, 250.0, 250, 0.5).unwrap();
        assert!(matches!(
            band_power(&psd, 0, 130.0, 140.0),
            Err(FeatureError::BandOutOfRange { .. })
        ));
        assert!(matches!(band_power(&psd, 0, 13.0, 8.0), Err(FeatureError::BadBand { .. })));
        assert!(matches!(band_power(&psd, 0, -1.0, 8.0), Err(FeatureError::BadBand { .. })));
    }

    #[test]
    fn entropy_separates_tones_from_noise_and_stays_bounded() {
        let srate = 250.0;
        let x = tone(2000, 10.0, srate, 2.0);
        let psd = welch_psd(&x, srate, 256, 0.5).unwrap();
        let h_tone = spectral_entropy(&psd, 0);
        assert!(h_tone <= 0.2, "pure tone entropy {h_tone}");

        let mut rng = crate::seed::rng(5, "test/entropy");
        let noise = Array2::from_shape_fn((4000, 1), |_| rng.gen_range(-1.0..1.0f64));
        let psd = welch_psd(&noise, srate, 256, 0.5).unwrap();
        let h_noise = spectral_entropy(&psd, 0);
        assert!(h_noise >= 0.9, "white noise entropy {h_noise}");

        // Bounds and scale invariance over assorted random signals.
        for trial in 0..50 {
            let mut rng = crate::seed::rng(trial, "test/entropy-bounds");
            let sig = Array2::from_shape_fn((512, 1), |_| rng.gen_range(-1.0..1.0f64));
            let psd1 = welch_psd(&sig, srate, 128, 0.5).unwrap();
            let h1 = spectral_entropy(&psd1, 0);
            assert!((0.0..=1.0).contains(&h1), "entropy {h1} out of bounds");
            let psd2 = welch_psd(&(&sig * 37.5), srate, 128, 0.5).unwrap();
            let h2 = spectral_entropy(&psd2, 0);
            assert!((h1 - h2).abs() < 1e-9, "entropy must be amplitude-invariant");
        }

        // All-zero signal: entropy 0 by convention.
        let zeros = Array2::<f64>::zeros((512, 1));
        let psd = welch_psd(&zeros, srate, 128, 0.5).unwrap();
        assert_eq!(spectral_entropy(&psd, 0), 0.0);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let x = Array2::<f64>::zeros((0, 1));
        assert!(welch_psd(&x, 250.0, 256, 0.5).is_err());
        let x = Array2::<f64>::zeros((100, 1));
        assert!(welch_psd(&x, 250.0, 4, 0.5).is_err(), "segment < 8");
        assert!(welch_psd(&x, 250.0, 64, 1.0).is_err(), "overlap 1.0");
    }
}
