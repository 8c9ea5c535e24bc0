//! IIR filter design (notch biquad, Butterworth band-pass) and application.
//!
//! Band-pass design follows the classical analog-prototype route: Butterworth
//! low-pass poles, low-pass -> band-pass transform, bilinear transform with
//! frequency prewarping, then grouping into second-order sections. The notch
//! is the standard audio-cookbook biquad. Filters run either causally
//! (streaming-safe, with group delay) or zero-phase (forward pass followed by
//! a time-reversed pass; offline only, squared magnitude response).

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::DspError;

/// Largest supported Butterworth prototype order. Orders beyond this are
/// almost certainly a scenario typo and would invite numerical trouble.
pub const MAX_ORDER: usize = 12;

/// One second-order section, normalized so the leading denominator
/// coefficient is 1: `H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Complex response at normalized angular frequency `w` (rad/sample).
    fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = Complex64::from_polar(1.0, -2.0 * w);
        let num = self.b[0] + self.b[1] * z1 + self.b[2] * z2;
        let den = Complex64::new(1.0, 0.0) + self.a[0] * z1 + self.a[1] * z2;
        num / den
    }

    /// Poles of this section (roots of the denominator quadratic).
    fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a[0] * self.a[0] - 4.0 * self.a[1], 0.0).sqrt();
        let r1 = (Complex64::new(-self.a[0], 0.0) + disc) / 2.0;
        let r2 = (Complex64::new(-self.a[0], 0.0) - disc) / 2.0;
        [r1, r2]
    }
}

/// What a filter was designed as, kept for introspection and serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterKind {
    Notch { f0: f64, q: f64 },
    Bandpass { low: f64, high: f64, order: usize },
}

/// A designed filter: cascade of second-order sections at a fixed rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosFilter {
    #[serde(flatten)]
    pub kind: FilterKind,
    pub srate: f64,
    pub sections: Vec<Biquad>,
}

/// How to run a filter over a recorded signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Single forward pass; what a live stream sees. Introduces group delay.
    Causal,
    /// Forward pass, then a pass over the time-reversed output. No phase
    /// distortion and the magnitude response is squared. Offline only.
    ZeroPhase,
}

fn check_srate(srate: f64) -> Result<(), DspError> {
    if !(srate.is_finite() && srate > 0.0) {
        return Err(DspError::BadSampleRate { srate });
    }
    Ok(())
}

/// Design a second-order notch at `f0` Hz with quality factor `q`
/// (bandwidth between -3 dB points is roughly `f0 / q`).
///
/// The zeros sit exactly on the unit circle at the notch frequency, so the
/// designed frequency is rejected completely; response returns to unity a
/// few bandwidths away on either side.
pub fn design_notch(f0: f64, srate: f64, q: f64) -> Result<SosFilter, DspError> {
    check_srate(srate)?;
    let nyquist = srate / 2.0;
    if !(f0.is_finite() && f0 > 0.0 && f0 < nyquist) {
        return Err(DspError::FrequencyOutOfRange { f: f0, nyquist, srate });
    }
    if !(q.is_finite() && q > 0.0) {
        return Err(DspError::BadQ { q });
    }
    let w0 = 2.0 * PI * f0 / srate;
    let alpha = w0.sin() / (2.0 * q);
    let cos_w0 = w0.cos();
    let a0 = 1.0 + alpha;
    let section = Biquad {
        b: [1.0 / a0, -2.0 * cos_w0 / a0, 1.0 / a0],
        a: [-2.0 * cos_w0 / a0, (1.0 - alpha) / a0],
    };
    Ok(SosFilter { kind: FilterKind::Notch { f0, q }, srate, sections: vec![section] })
}

/// Butterworth low-pass prototype poles (unit cutoff, left half-plane).
fn butterworth_poles(order: usize) -> Vec<Complex64> {
    (0..order)
        .map(|k| {
            let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect()
}

/// Design an order-`order` Butterworth band-pass (2x`order` poles) with -3 dB
/// points at `low` and `high` Hz.
///
/// Edges are prewarped so the bilinear transform lands the -3 dB points on
/// the requested digital frequencies. DC and Nyquist are blocked exactly
/// (numerator zeros at z = +1 and z = -1).
pub fn design_bandpass(
    low: f64,
    high: f64,
    order: usize,
    srate: f64,
) -> Result<SosFilter, DspError> {
    check_srate(srate)?;
    let nyquist = srate / 2.0;
    if !(low.is_finite() && high.is_finite() && 0.0 < low && low < high && high < nyquist) {
        return Err(DspError::BadBandEdges { low, high, nyquist });
    }
    if order == 0 || order > MAX_ORDER {
        return Err(DspError::BadOrder { order, max: MAX_ORDER });
    }

    // Prewarped analog edge frequencies (rad/s) for bilinear constant k = 2*fs.
    let k = 2.0 * srate;
    let wl = k * (PI * low / srate).tan();
    let wh = k * (PI * high / srate).tan();
    let w0_sq = wl * wh;
    let bw = wh - wl;

    // Low-pass prototype -> band-pass: each prototype pole p becomes the
    // conjugate-closed pair  s = p*bw/2 +- sqrt((p*bw/2)^2 - w0^2),
    // plus `order` zeros at s = 0. Analog gain is bw^order.
    let mut analog_poles = Vec::with_capacity(2 * order);
    for p in butterworth_poles(order) {
        let s = p * (bw / 2.0);
        let d = (s * s - Complex64::new(w0_sq, 0.0)).sqrt();
        analog_poles.push(s + d);
        analog_poles.push(s - d);
    }

    // Bilinear transform: z = (k + s) / (k - s). The `order` analog zeros at
    // s = 0 map to z = +1; the band-pass relative degree contributes another
    // `order` zeros at z = -1. Gain picks up prod(k - z_i) / prod(k - p_i)
    // with the zero product being k^order.
    let mut digital_poles = Vec::with_capacity(2 * order);
    let mut gain_num = Complex64::new(bw.powi(order as i32), 0.0)
        * Complex64::new(k, 0.0).powu(order as u32);
    let mut gain_den = Complex64::new(1.0, 0.0);
    for &p in &analog_poles {
        digital_poles.push((Complex64::new(k, 0.0) + p) / (Complex64::new(k, 0.0) - p));
        gain_den *= Complex64::new(k, 0.0) - p;
    }
    gain_num /= gain_den;
    let gain = gain_num.re; // imaginary part cancels over conjugate pairs

    // Group the 2*order poles into conjugate (or real) pairs; give every
    // section one zero at +1 and one at -1, i.e. numerator [1, 0, -1], and
    // spread the overall gain evenly across sections.
    let sections = pair_poles(&digital_poles);
    debug_assert_eq!(sections.len(), order);
    let section_gain = gain.abs().powf(1.0 / order as f64);
    let mut sos = Vec::with_capacity(order);
    for (i, (a1, a2)) in sections.into_iter().enumerate() {
        let sign = if i == 0 { gain.signum() } else { 1.0 };
        let g = sign * section_gain;
        sos.push(Biquad { b: [g, 0.0, -g], a: [a1, a2] });
    }

    Ok(SosFilter { kind: FilterKind::Bandpass { low, high, order }, srate, sections: sos })
}

/// Pair a conjugate-closed pole set into denominator quadratics
/// `(a1, a2) = (-(p+q), p*q)` with real coefficients.
fn pair_poles(poles: &[Complex64]) -> Vec<(f64, f64)> {
    const IM_TOL: f64 = 1e-10;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > IM_TOL).collect();
    let mut real: Vec<f64> = poles
        .iter()
        .filter(|p| p.im.abs() <= IM_TOL)
        .map(|p| p.re)
        .collect();
    // Deterministic ordering regardless of upstream pole order.
    complex.sort_by(|x, y| (x.re, x.im).partial_cmp(&(y.re, y.im)).unwrap());
    real.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let mut out = Vec::new();
    for p in complex {
        // Conjugate partner is implicit: (z - p)(z - conj p).
        out.push((-2.0 * p.re, p.norm_sqr()));
    }
    for pair in real.chunks(2) {
        match *pair {
            [r1, r2] => out.push((-(r1 + r2), r1 * r2)),
            [r] => out.push((-r, 0.0)),
            _ => unreachable!(),
        }
    }
    out
}

impl SosFilter {
    /// Magnitude response `|H(f)|` at `f` Hz.
    pub fn response_at(&self, f: f64) -> f64 {
        let w = 2.0 * PI * f / self.srate;
        self.sections
            .iter()
            .map(|s| s.response(w).norm())
            .product()
    }

    /// Magnitude response in dB, floored so exact nulls stay finite.
    pub fn response_db(&self, f: f64) -> f64 {
        20.0 * self.response_at(f).max(1e-300).log10()
    }

    /// True when every pole lies strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        self.sections
            .iter()
            .flat_map(|s| s.poles())
            .all(|p| p.norm() < 1.0)
    }

    /// Fresh per-channel streaming state for causal application.
    pub fn streaming(&self, channels: usize) -> StreamingFilter {
        StreamingFilter {
            filter: self.clone(),
            state: vec![vec![[0.0; 2]; self.sections.len()]; channels],
        }
    }
}

/// Causal filter with persistent state, for chunk-at-a-time streams.
///
/// Feeding the same samples in any chunking yields bit-identical output to
/// a single offline causal pass.
#[derive(Debug, Clone)]
pub struct StreamingFilter {
    filter: SosFilter,
    /// `state[channel][section] = [s1, s2]` direct-form-II-transposed state.
    state: Vec<Vec<[f64; 2]>>,
}

impl StreamingFilter {
    /// Filter a chunk (samples x channels) in place.
    pub fn process(&mut self, block: &mut Array2<f64>) {
        assert_eq!(
            block.ncols(),
            self.state.len(),
            "streaming filter was initialized for a different channel count"
        );
        for (ch, chan_state) in self.state.iter_mut().enumerate() {
            let mut col = block.column_mut(ch);
            for (section, st) in self.filter.sections.iter().zip(chan_state.iter_mut()) {
                for x in col.iter_mut() {
                    *x = df2t_step(section, st, *x);
                }
            }
        }
    }
}

/// One direct-form-II-transposed update.
#[inline]
fn df2t_step(s: &Biquad, st: &mut [f64; 2], x: f64) -> f64 {
    let y = s.b[0] * x + st[0];
    st[0] = s.b[1] * x - s.a[0] * y + st[1];
    st[1] = s.b[2] * x - s.a[1] * y;
    y
}

/// Run a designed filter over a whole recording (samples x channels).
///
/// `Causal` matches what the streaming path produces; `ZeroPhase` runs the
/// cascade forward and then backward so features see no group delay. State
/// starts at zero (no padding), so a short startup transient is expected at
/// the edges in either mode.
pub fn apply_filter(filter: &SosFilter, data: &Array2<f64>, mode: FilterMode) -> Array2<f64> {
    let mut out = data.clone();
    filter_in_place(filter, &mut out);
    if mode == FilterMode::ZeroPhase {
        reverse_rows(&mut out);
        filter_in_place(filter, &mut out);
        reverse_rows(&mut out);
    }
    out
}

fn filter_in_place(filter: &SosFilter, data: &mut Array2<f64>) {
    for ch in 0..data.ncols() {
        let mut col = data.column_mut(ch);
        for section in &filter.sections {
            let mut st = [0.0f64; 2];
            for x in col.iter_mut() {
                *x = df2t_step(section, &mut st, *x);
            }
        }
    }
}

fn reverse_rows(data: &mut Array2<f64>) {
    let n = data.nrows();
    for ch in 0..data.ncols() {
        let mut col = data.column_mut(ch);
        for i in 0..n / 2 {
            col.swap(i, n - 1 - i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    /// Independent analytic magnitude for a bilinear-transformed Butterworth
    /// band-pass: |H(f)| = 1 / sqrt(1 + U(f)^(2N)) where U is the band-pass
    /// variable (w^2 - w0^2) / (w * bw) evaluated on prewarped frequencies.
    fn analytic_bandpass_mag(f: f64, low: f64, high: f64, order: usize, srate: f64) -> f64 {
        let k = 2.0 * srate;
        let warp = |f: f64| k * (PI * f / srate).tan();
        let (wl, wh) = (warp(low), warp(high));
        let w = warp(f);
        let u = (w * w - wl * wh) / (w * (wh - wl));
        1.0 / (1.0 + u.powi(2 * order as i32)).sqrt()
    }

    /// Steady-state amplitude of the `f` Hz component of `x`, by projection
    /// onto quadrature sinusoids over an integer number of cycles.
    fn tone_amplitude(x: &[f64], f: f64, srate: f64) -> f64 {
        let cycles = (x.len() as f64 * f / srate).floor();
        let n = ((cycles * srate / f).floor() as usize).min(x.len());
        let (mut s, mut c) = (0.0, 0.0);
        for i in 0..n {
            let w = 2.0 * PI * f * i as f64 / srate;
            s += x[i] * w.sin();
            c += x[i] * w.cos();
        }
        2.0 * (s * s + c * c).sqrt() / n as f64
    }

    fn column(data: &Array2<f64>) -> Vec<f64> {
        data.column(0).to_vec()
    }

    #[test]
    fn notch_kills_center_and_spares_neighbors() {
        let f = design_notch(50.0, 250.0, 30.0).unwrap();
        assert!(f.is_stable());
        assert!(f.response_db(50.0) <= -30.0, "center rejection too weak: {} dB", f.response_db(50.0));
        assert!(f.response_db(10.0).abs() <= 0.05, "10 Hz should be untouched");
        // Q = 30 puts the -3 dB points ~0.83 Hz either side of 50 Hz, so
        // 45 and 55 Hz are far outside the rejection bandwidth.
        for f_probe in [45.0, 55.0] {
            assert!(
                f.response_db(f_probe) >= -3.0,
                "{} Hz suppressed by {} dB",
                f_probe,
                f.response_db(f_probe)
            );
        }
        // Unity at the band ends.
        assert!((f.response_at(0.0) - 1.0).abs() < 1e-9);
        assert!((f.response_at(125.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn notch_attenuates_injected_mains_tone() {
        let srate = 250.0;
        let f = design_notch(50.0, srate, 30.0).unwrap();
        let n = (8.0 * srate) as usize;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| {
            let t = i as f64 / srate;
            (2.0 * PI * 10.0 * t).sin() + (2.0 * PI * 50.0 * t).sin()
        });
        let y = apply_filter(&f, &x, FilterMode::Causal);
        // Skip the startup transient; a Q=30 notch rings for a second or so.
        let tail = &column(&y)[(4.0 * srate) as usize..];
        let mains = tone_amplitude(tail, 50.0, srate);
        let signal = tone_amplitude(tail, 10.0, srate);
        assert!(
            20.0 * mains.log10() <= -30.0,
            "mains residue {:.1} dB",
            20.0 * mains.log10()
        );
        assert!(
            (20.0 * signal.log10()).abs() <= 1.0,
            "10 Hz component moved by {:.2} dB",
            20.0 * signal.log10()
        );
    }

    #[test]
    fn bandpass_hits_requested_edges() {
        let f = design_bandpass(1.0, 30.0, 4, 250.0).unwrap();
        assert!(f.is_stable());
        // Prewarping lands the -3.01 dB points exactly on the requested edges.
        for edge in [1.0, 30.0] {
            let db = f.response_db(edge);
            assert!(
                (db + 3.0103).abs() < 0.1,
                "edge {} Hz at {:.3} dB, expected -3.01",
                edge,
                db
            );
        }
        // Well within 5% of the requested edges in any case.
        assert!(f.response_db(1.05) > -3.02);
        assert!(f.response_db(0.95) < -3.0);
        assert!(f.response_db(30.0 * 0.95) > -3.02);
        assert!(f.response_db(30.0 * 1.05) < -3.0);
    }

    #[test]
    fn bandpass_matches_analytic_magnitude_curve() {
        let (low, high, order, srate) = (1.0, 30.0, 4, 250.0);
        let f = design_bandpass(low, high, order, srate).unwrap();
        // Log-spaced probes across pass, transition, and stop bands.
        for i in 0..20 {
            let probe = 0.2 * (110.0f64 / 0.2).powf(i as f64 / 19.0);
            let got = f.response_db(probe);
            let want = 20.0 * analytic_bandpass_mag(probe, low, high, order, srate).log10();
            assert!(
                (got - want).abs() < 0.5,
                "at {:.2} Hz: designed {:.2} dB vs analytic {:.2} dB",
                probe,
                got,
                want
            );
        }
    }

    #[test]
    fn bandpass_blocks_dc_and_attenuates_stopband() {
        let f = design_bandpass(1.0, 30.0, 4, 250.0).unwrap();
        assert_eq!(f.response_at(0.0), 0.0, "DC must be blocked exactly");
        assert!(f.response_db(50.0) <= -20.0, "50 Hz only at {} dB", f.response_db(50.0));
        assert!(f.response_at(125.0) < 1e-12, "Nyquist leak: {}", f.response_at(125.0));
    }

    #[test]
    fn designs_are_stable_across_parameter_grid() {
        for order in 1..=8 {
            for (low, high, srate) in
                [(0.1, 60.0, 250.0), (1.0, 30.0, 125.0), (4.0, 60.0, 250.0), (1.0, 17.0, 250.0)]
            {
                let f = design_bandpass(low, high, order, srate).unwrap();
                assert!(f.is_stable(), "unstable design: order {order} band {low}-{high} @ {srate}");
            }
        }
    }

    #[test]
    fn rejects_malformed_parameters() {
        assert!(design_bandpass(30.0, 1.0, 4, 250.0).is_err(), "inverted edges");
        assert!(design_bandpass(1.0, 125.0, 4, 250.0).is_err(), "edge at Nyquist");
        assert!(design_bandpass(0.0, 30.0, 4, 250.0).is_err(), "zero low edge");
        assert!(design_bandpass(1.0, 30.0, 0, 250.0).is_err(), "order zero");
        assert!(design_notch(50.0, 90.0, 30.0).is_err(), "notch above Nyquist");
        assert!(design_notch(50.0, 250.0, 0.0).is_err(), "non-positive Q");
        assert!(design_notch(50.0, -250.0, 30.0).is_err(), "negative srate");
    }

    #[test]
    fn causal_filtering_is_linear() {
        let f = design_bandpass(1.0, 30.0, 4, 250.0).unwrap();
        let n = 500;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| ((i * 7919) % 101) as f64 / 50.0 - 1.0);
        let y = Array2::from_shape_fn((n, 1), |(i, _)| ((i * 104729) % 97) as f64 / 48.0 - 1.0);
        let lhs = apply_filter(&f, &(2.5 * &x - 0.75 * &y), FilterMode::Causal);
        let rhs = 2.5 * apply_filter(&f, &x, FilterMode::Causal)
            - 0.75 * apply_filter(&f, &y, FilterMode::Causal);
        let max_err = (&lhs - &rhs).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(max_err < 1e-9, "linearity violated by {max_err}");
    }

    #[test]
    fn zero_phase_keeps_pulse_peak_in_place() {
        let srate = 250.0;
        let f = design_bandpass(1.0, 30.0, 4, srate).unwrap();
        // Odd length with the pulse dead center, so the signal (and hence the
        // forward+backward startup transients) are mirror-symmetric.
        let n = 1001;
        let center = 500usize;
        // Smooth symmetric pulse, wide enough to survive the band-pass.
        let x = Array2::from_shape_fn((n, 1), |(i, _)| {
            let d = (i as f64 - center as f64) / (0.05 * srate);
            (-0.5 * d * d).exp()
        });
        let argmax = |v: &Array1<f64>| {
            v.iter().enumerate().fold((0, f64::MIN), |acc, (i, &x)| {
                if x > acc.1 { (i, x) } else { acc }
            })
        };
        let zp = apply_filter(&f, &x, FilterMode::ZeroPhase);
        let causal = apply_filter(&f, &x, FilterMode::Causal);
        let (zp_peak, _) = argmax(&zp.column(0).to_owned());
        assert_eq!(zp_peak, center, "zero-phase pass moved the pulse peak");
        // Symmetric input through a zero-phase filter stays symmetric up to
        // boundary transients (no padding is applied, and the 1 Hz edge's
        // startup response has not fully decayed within half the signal), so
        // the check is against a transient-scale bound, not machine epsilon.
        for k in 1..100 {
            let (l, r) = (zp[[center - k, 0]], zp[[center + k, 0]]);
            assert!((l - r).abs() < 1e-4, "asymmetry at +-{k}: {l} vs {r}");
        }
        // The causal pass is materially different (it has phase distortion).
        let diff = (&zp - &causal).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(diff > 0.1, "causal and zero-phase outputs should differ, max diff {diff}");
    }

    #[test]
    fn streaming_chunks_match_offline_causal_pass() {
        let f = design_bandpass(1.0, 30.0, 4, 250.0).unwrap();
        let n = 1237;
        let x = Array2::from_shape_fn((n, 3), |(i, c)| {
            (((i * 2654435761 + c * 97) % 1000) as f64 / 500.0) - 1.0
        });
        let offline = apply_filter(&f, &x, FilterMode::Causal);
        let mut streaming = f.streaming(3);
        let mut got = Array2::zeros((0, 3));
        let mut start = 0;
        // Deliberately irregular chunk sizes.
        for &len in [1usize, 7, 64, 3, 255, 128, 779].iter() {
            let stop = (start + len).min(n);
            let mut block = x.slice(ndarray::s![start..stop, ..]).to_owned();
            streaming.process(&mut block);
            got.append(ndarray::Axis(0), block.view()).unwrap();
            start = stop;
            if start == n {
                break;
            }
        }
        assert_eq!(got.nrows(), n);
        let max_err = (&got - &offline).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(max_err == 0.0, "streaming output diverged from offline by {max_err}");
    }
}
