//! Rational-ratio resampling with a polyphase windowed-sinc kernel.
//!
//! The conversion `srate_in -> srate_out` is reduced to a rational ratio
//! `up/down`; output sample `k` sits at input position `k * down / up`. A
//! Kaiser-windowed sinc low-pass (cutoff at 0.45x the narrower of the two
//! rates) provides anti-aliasing on the way down and interpolation on the
//! way up. Because the fractional positions repeat with period `up`, the
//! kernel collapses into `up` fixed FIR phases, each normalized to unity DC
//! gain, so passband tones keep their amplitude.

use ndarray::Array2;

use super::DspError;

/// Largest accepted denominator after reducing `srate_out / srate_in`.
/// Ratios finer than this indicate mis-declared rates rather than a real
/// conversion (e.g. 44100.1 -> 250) and would need an enormous phase table.
pub const MAX_DENOMINATOR: u64 = 1000;

/// Kaiser window shape parameter; ~80 dB stopband for the sinc kernel.
const KAISER_BETA: f64 = 8.6;

/// Half-width of the kernel measured in *input* samples, scaled by the
/// inverse cutoff so narrow transitions get proportionally longer filters.
const HALF_WIDTH_CYCLES: f64 = 8.0;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Reduce a rate pair to the rational ratio `(up, down)`.
///
/// Rates are scaled to integers by 1000 first, so rates specified with up
/// to millihertz precision reduce exactly.
pub fn rational_ratio(srate_in: f64, srate_out: f64) -> Result<(u64, u64), DspError> {
    let to_int = |r: f64| (r * 1000.0).round() as u64;
    let (num, den) = (to_int(srate_out), to_int(srate_in));
    if num == 0 || den == 0 {
        return Err(DspError::BadSampleRate { srate: if num == 0 { srate_out } else { srate_in } });
    }
    let g = gcd(num, den);
    let (up, down) = (num / g, den / g);
    if down > MAX_DENOMINATOR {
        return Err(DspError::RatioTooFine {
            from: srate_in,
            to: srate_out,
            denom: down,
            max: MAX_DENOMINATOR,
        });
    }
    Ok((up, down))
}

/// Zeroth-order modified Bessel function of the first kind (series form),
/// the normalization core of the Kaiser window.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_sq = (x / 2.0) * (x / 2.0);
    for k in 1..64 {
        term *= half_sq / ((k * k) as f64);
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
    }
}

/// Polyphase resampler state. Holds the per-phase FIR banks and, in
/// streaming use, the trailing input history needed by future outputs.
#[derive(Debug, Clone)]
pub struct Resampler {
    pub srate_in: f64,
    pub srate_out: f64,
    up: u64,
    down: u64,
    /// `phases[p]` is the FIR for outputs whose fractional position is
    /// `p/up`, as taps over input samples `[-half, +half]`.
    phases: Vec<Vec<f64>>,
    half: isize,
    // Streaming state: absolute index of the first sample in `history`,
    // count of input samples seen, and index of the next output to emit.
    history: Vec<Vec<f64>>,
    history_start: i64,
    seen: i64,
    next_out: i64,
    channels: usize,
}

impl Resampler {
    pub fn new(srate_in: f64, srate_out: f64, channels: usize) -> Result<Self, DspError> {
        if !(srate_in.is_finite() && srate_in > 0.0) {
            return Err(DspError::BadSampleRate { srate: srate_in });
        }
        if !(srate_out.is_finite() && srate_out > 0.0) {
            return Err(DspError::BadSampleRate { srate: srate_out });
        }
        let (up, down) = rational_ratio(srate_in, srate_out)?;

        // Identity conversions copy samples through; no kernel needed.
        if up == down {
            return Ok(Self {
                srate_in,
                srate_out,
                up,
                down,
                phases: Vec::new(),
                half: 0,
                history: vec![Vec::new(); channels],
                history_start: 0,
                seen: 0,
                next_out: 0,
                channels,
            });
        }

        // Anti-alias / interpolation cutoff in cycles per *input* sample.
        let cutoff_hz = 0.45 * srate_in.min(srate_out);
        let c = cutoff_hz / srate_in;
        let half = (HALF_WIDTH_CYCLES / (2.0 * c)).ceil() as isize;
        let denom = bessel_i0(KAISER_BETA);

        let mut phases = Vec::with_capacity(up as usize);
        for p in 0..up {
            // Output at input position n0 + frac, frac = p/up (see `resample`).
            let frac = p as f64 / up as f64;
            let mut taps = Vec::with_capacity((2 * half + 1) as usize);
            let mut sum = 0.0;
            for m in -half..=half {
                // Tap over input sample (n0 + m); kernel argument is the
                // distance from the output position.
                let d = m as f64 - frac;
                let x = d / half as f64;
                let w = if x.abs() <= 1.0 {
                    bessel_i0(KAISER_BETA * (1.0 - x * x).sqrt()) / denom
                } else {
                    0.0
                };
                let tap = 2.0 * c * sinc(2.0 * c * d) * w;
                sum += tap;
                taps.push(tap);
            }
            // Unity DC gain per phase keeps passband amplitude exact.
            for t in &mut taps {
                *t /= sum;
            }
            phases.push(taps);
        }

        Ok(Self {
            srate_in,
            srate_out,
            up,
            down,
            phases,
            half,
            history: vec![Vec::new(); channels],
            history_start: 0,
            seen: 0,
            next_out: 0,
            channels,
        })
    }

    /// Number of output samples a whole input of length `n` produces.
    pub fn output_len(&self, n: usize) -> usize {
        ((n as u128 * self.up as u128 + (self.down / 2) as u128) / self.down as u128) as usize
    }

    fn is_identity(&self) -> bool {
        self.up == self.down
    }

    /// Streaming push: feed a chunk, get every output sample whose input
    /// window is now fully available. Input beyond the signal is treated as
    /// zero only by [`finish`](Self::finish), never here, so chunking does
    /// not change the values produced.
    pub fn push(&mut self, block: &Array2<f64>) -> Array2<f64> {
        assert_eq!(block.ncols(), self.channels, "resampler channel count mismatch");
        if self.is_identity() {
            self.seen += block.nrows() as i64;
            return block.clone();
        }
        for ch in 0..self.channels {
            self.history[ch].extend(block.column(ch).iter());
        }
        self.seen += block.nrows() as i64;
        let out = self.drain_ready(false);
        self.trim_history();
        out
    }

    /// Flush remaining outputs at end of signal, treating samples past the
    /// end as zero. Total emitted equals `output_len(total_input)`.
    pub fn finish(&mut self) -> Array2<f64> {
        if self.is_identity() {
            return Array2::zeros((0, self.channels));
        }
        self.drain_ready(true)
    }

    fn drain_ready(&mut self, at_end: bool) -> Array2<f64> {
        let total_out = ((self.seen as u128 * self.up as u128 + (self.down / 2) as u128)
            / self.down as u128) as i64;
        let mut rows: Vec<f64> = Vec::new();
        let mut count = 0usize;
        while self.next_out < total_out {
            let k = self.next_out;
            // Output k sits at input position (k * down) / up = n0 + p/up.
            let num = k as i128 * self.down as i128;
            let n0 = num.div_euclid(self.up as i128) as i64;
            let p = num.rem_euclid(self.up as i128) as usize;
            let last_needed = n0 + self.half as i64;
            if !at_end && last_needed >= self.seen {
                break;
            }
            let taps = &self.phases[p];
            for ch in 0..self.channels {
                let hist = &self.history[ch];
                let mut acc = 0.0;
                for (ti, m) in (-self.half..=self.half).enumerate() {
                    let idx = n0 + m as i64 - self.history_start;
                    if idx >= 0 && (idx as usize) < hist.len() {
                        acc += taps[ti] * hist[idx as usize];
                    }
                }
                rows.push(acc);
            }
            count += 1;
            self.next_out += 1;
        }
        Array2::from_shape_vec((count, self.channels), rows).expect("row count consistent")
    }

    /// Drop history no future output can reach.
    fn trim_history(&mut self) {
        let num = self.next_out as i128 * self.down as i128;
        let n0 = num.div_euclid(self.up as i128) as i64;
        let keep_from = n0 - self.half as i64;
        let drop = (keep_from - self.history_start).max(0) as usize;
        if drop > 0 {
            for hist in &mut self.history {
                hist.drain(..drop);
            }
            self.history_start += drop as i64;
        }
    }
}

/// Resample a whole recording (samples x channels) from `srate_in` to
/// `srate_out`. Output length is `round(n * srate_out / srate_in)`; sample
/// `k` of the output corresponds to time `k / srate_out` on the same clock
/// as the input's sample times.
pub fn resample(
    data: &Array2<f64>,
    srate_in: f64,
    srate_out: f64,
) -> Result<Array2<f64>, DspError> {
    if data.nrows() == 0 {
        return Err(DspError::EmptyInput { op: "resample" });
    }
    let mut rs = Resampler::new(srate_in, srate_out, data.ncols())?;
    let mut head = rs.push(data);
    let tail = rs.finish();
    head.append(ndarray::Axis(0), tail.view()).expect("channel counts match");
    Ok(head)
}
