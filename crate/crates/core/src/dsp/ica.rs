//! FastICA blind source separation and ICA-based artifact removal.
//!
//! The deflation-free symmetric variant is used: all component directions
//! are updated together from a seeded random start, with the log-cosh
//! contrast (`g = tanh`) and symmetric decorrelation after every sweep.
//! Whitening comes from an eigendecomposition of the channel covariance.
//!
//! The intended use is ocular-artifact removal: fit on a training stretch,
//! flag components that track an EOG reference channel, and subtract those
//! components' contribution from the recording. The model is a pair of
//! fixed matrices once fitted, so applying it online is just a per-sample
//! matrix multiply.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::DspError;
use crate::linalg;
use crate::seed;

/// Fixed-point iteration limit. Clean, genuinely non-Gaussian mixtures
/// converge in well under fifty sweeps; hitting this limit is reported, not
/// fatal, because a best-effort unmixing is still usable for inspection.
pub const MAX_ITER: usize = 200;

/// Convergence threshold on the per-component direction change
/// `max_i |1 - |<w_i_new, w_i_old>||`.
pub const TOL: f64 = 1e-4;

/// Default |Pearson r| above which a component is called ocular when an EOG
/// reference is available.
pub const EOG_CORR_THRESHOLD: f64 = 0.7;

/// A fitted ICA decomposition.
///
/// With `X` as centered data (samples x channels):
/// components `S = X * unmixing^T` (samples x k, unit variance on the fit
/// data), reconstruction `X ~= S * mixing^T`. `unmixing * mixing = I_k`,
/// which is what makes subtracting a subset of components exact.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IcaModel {
    /// Per-channel mean of the fit data; subtracted before unmixing.
    pub mean: Vec<f64>,
    /// k x channels.
    pub unmixing: Array2<f64>,
    /// channels x k (right pseudo-inverse of `unmixing`).
    pub mixing: Array2<f64>,
}

/// Fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct IcaReport {
    pub converged: bool,
    pub iterations: usize,
}

impl IcaModel {
    pub fn n_components(&self) -> usize {
        self.unmixing.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.unmixing.ncols()
    }

    /// Project a recording onto the fitted components (samples x k).
    pub fn components(&self, data: &Array2<f64>) -> Array2<f64> {
        let centered = data - &self.mean_row();
        centered.dot(&self.unmixing.t())
    }

    fn mean_row(&self) -> Array2<f64> {
        Array2::from_shape_fn((1, self.mean.len()), |(_, c)| self.mean[c])
    }
}

/// Fit a FastICA decomposition with `n_components` components.
///
/// Deterministic for a fixed `(data, n_components, seed)` triple. The fit
/// centers the data internally; pass recordings as-is.
pub fn fast_ica(
    data: &Array2<f64>,
    n_components: usize,
    seed_value: u64,
) -> Result<(IcaModel, IcaReport), DspError> {
    let (n, c) = (data.nrows(), data.ncols());
    if n_components == 0 || n_components > c {
        return Err(DspError::TooManyComponents { requested: n_components, channels: c });
    }
    if n <= c {
        return Err(DspError::TooFewSamples { needed: c + 1, got: n });
    }
    let k = n_components;

    // Center.
    let mean: Vec<f64> = data.mean_axis(Axis(0)).expect("non-empty").to_vec();
    let mean_row = Array2::from_shape_fn((1, c), |(_, j)| mean[j]);
    let centered = data - &mean_row;

    // Whiten via eigendecomposition of the covariance: rows of `whiten`
    // map centered channels onto unit-variance, decorrelated coordinates.
    let cov = centered.t().dot(&centered) / n as f64;
    let (evals, evecs) = linalg::sym_eig_desc(&cov);
    let scale = evals[0].max(f64::MIN_POSITIVE);
    if evals[k - 1] <= 1e-12 * scale {
        let rank = evals.iter().take_while(|&&v| v > 1e-12 * scale).count();
        return Err(DspError::TooManyComponents { requested: k, channels: rank });
    }
    let mut whiten = evecs.slice(ndarray::s![..k, ..]).to_owned();
    for (mut row, &ev) in whiten.axis_iter_mut(Axis(0)).zip(evals.iter()) {
        row.mapv_inplace(|v| v / ev.sqrt());
    }
    let z = centered.dot(&whiten.t()); // samples x k, identity covariance

    // Random orthonormal start, then symmetric fixed-point sweeps.
    let mut rng = seed::rng(seed_value, "ica/init");
    let mut w = Array2::from_shape_fn((k, k), |_| {
        // Box-Muller keeps us independent of distribution-crate API details.
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    });
    w = sym_decorrelate(&w)?;

    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=MAX_ITER {
        iterations = it;
        // u = Z W^T; g = tanh(u); w_i <- E[z g_i] - E[g'_i] w_i
        let u = z.dot(&w.t());
        let g = u.mapv(|v| v.tanh());
        let g_prime_mean = g.mapv(|v| 1.0 - v * v).mean_axis(Axis(0)).expect("non-empty");
        let mut w_new = g.t().dot(&z) / n as f64;
        for (i, mut row) in w_new.axis_iter_mut(Axis(0)).enumerate() {
            let old = w.row(i);
            for (r, &o) in row.iter_mut().zip(old.iter()) {
                *r -= g_prime_mean[i] * o;
            }
        }
        let w_next = sym_decorrelate(&w_new)?;

        // Direction change ignoring sign flips.
        let overlap = w_next.dot(&w.t());
        let delta = (0..k)
            .map(|i| (1.0 - overlap[[i, i]].abs()).abs())
            .fold(0.0, f64::max);
        w = w_next;
        if delta < TOL {
            converged = true;
            break;
        }
    }

    // Compose with whitening; canonical sign: largest-|.| entry positive.
    let mut unmixing = w.dot(&whiten);
    for mut row in unmixing.axis_iter_mut(Axis(0)) {
        let dominant = row.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if dominant < 0.0 {
            row.mapv_inplace(|v| -v);
        }
    }

    // Right pseudo-inverse: mixing = U^T (U U^T)^{-1}.
    let uut = unmixing.dot(&unmixing.t());
    let uut_inv = linalg::inverse(&uut).ok_or(DspError::TooManyComponents {
        requested: k,
        channels: c,
    })?;
    let mixing = unmixing.t().dot(&uut_inv);

    Ok((IcaModel { mean, unmixing, mixing }, IcaReport { converged, iterations }))
}

/// Symmetric decorrelation: `W <- (W W^T)^{-1/2} W`, making the rows an
/// orthonormal set without privileging any component.
fn sym_decorrelate(w: &Array2<f64>) -> Result<Array2<f64>, DspError> {
    let wwt = w.dot(&w.t());
    let (evals, evecs) = linalg::sym_eig_desc(&wwt);
    if evals[evals.len() - 1] <= 1e-12 * evals[0].max(f64::MIN_POSITIVE) {
        return Err(DspError::TooManyComponents { requested: w.nrows(), channels: w.ncols() });
    }
    // (W W^T)^{-1/2} = E diag(1/sqrt(l)) E^T
    let mut inv_sqrt = Array2::zeros((evals.len(), evals.len()));
    for i in 0..evals.len() {
        for j in 0..evals.len() {
            let mut acc = 0.0;
            for m in 0..evals.len() {
                acc += evecs[[m, i]] * evecs[[m, j]] / evals[m].sqrt();
            }
            inv_sqrt[[i, j]] = acc;
        }
    }
    Ok(inv_sqrt.dot(w))
}

/// Subtract the listed components' contribution from a recording.
///
/// `cleaned = data - S_rejected * mixing_rejected^T` (with the model's mean
/// handling folded in). Rejecting nothing returns the data unchanged, and
/// the projection of the output onto the *kept* components is identical to
/// the input's, because `unmixing * mixing = I`.
pub fn remove_artifact_components(
    data: &Array2<f64>,
    model: &IcaModel,
    rejected: &[usize],
) -> Result<Array2<f64>, DspError> {
    if data.ncols() != model.n_channels() {
        return Err(DspError::TooManyComponents {
            requested: data.ncols(),
            channels: model.n_channels(),
        });
    }
    let mut cleaned = data.clone();
    if rejected.is_empty() {
        return Ok(cleaned);
    }
    for &r in rejected {
        if r >= model.n_components() {
            return Err(DspError::TooManyComponents {
                requested: r + 1,
                channels: model.n_components(),
            });
        }
    }
    let s = model.components(data); // samples x k
    for &r in rejected {
        let comp = s.column(r);
        let load = model.mixing.column(r);
        for (mut row, &sv) in cleaned.axis_iter_mut(Axis(0)).zip(comp.iter()) {
            for (x, &l) in row.iter_mut().zip(load.iter()) {
                *x -= sv * l;
            }
        }
    }
    Ok(cleaned)
}

/// Indices of components whose |Pearson correlation| with an EOG reference
/// exceeds `threshold`. `eog` must be sample-aligned with `data`.
pub fn select_eog_components(
    data: &Array2<f64>,
    model: &IcaModel,
    eog: &Array1<f64>,
    threshold: f64,
) -> Result<Vec<usize>, DspError> {
    if eog.len() != data.nrows() {
        return Err(DspError::TooFewSamples { needed: data.nrows(), got: eog.len() });
    }
    let s = model.components(data);
    let mut out = Vec::new();
    for j in 0..s.ncols() {
        let r = pearson(&s.column(j).to_owned(), eog);
        if r.abs() > threshold {
            out.push(j);
        }
    }
    Ok(out)
}

fn pearson(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.sum() / n, b.sum() / n);
    let (mut num, mut da, mut db) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b.iter()) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    if da == 0.0 || db == 0.0 {
        0.0
    } else {
        num / (da * db).sqrt()
    }
}
