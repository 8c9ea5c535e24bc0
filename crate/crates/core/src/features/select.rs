//! Feature selection: greedy correlation pruning and PCA.
//!
//! Both transforms are fitted on training data only and then replayed
//! verbatim at inference time; the fitted state (kept indices, PCA basis)
//! is part of a trained model's lineage.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::linalg;

/// Greedy in-order correlation pruning.
///
/// Walks columns left to right, keeping a column only if its absolute
/// Pearson correlation with every *already kept* column is at or below
/// `threshold`. Zero-variance (constant) columns are dropped outright since
/// their correlation is undefined and they carry no information. Returns
/// the kept column indices, in ascending order.
pub fn correlation_prune(x: &Array2<f64>, threshold: f64) -> Result<Vec<usize>, FeatureError> {
    if x.nrows() < 2 || x.ncols() == 0 {
        return Err(FeatureError::EmptyInput { op: "correlation_prune" });
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(FeatureError::BadCorrThreshold { got: threshold });
    }
    let n = x.nrows() as f64;
    // Pre-center columns; remember per-column L2 norms of the residuals.
    let means = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = x - &means.broadcast((x.nrows(), x.ncols())).expect("broadcastable");
    let norms: Vec<f64> = (0..x.ncols())
        .map(|j| centered.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    // Relative tolerance: a column whose spread is this far below its mean
    // magnitude is constant for all practical purposes.
    let scale = |j: usize| means[j].abs().max(1.0);

    let mut kept: Vec<usize> = Vec::new();
    for j in 0..x.ncols() {
        if norms[j] <= 1e-12 * (n.sqrt() * scale(j)) {
            continue; // constant column
        }
        let col_j = centered.column(j);
        let mut correlated = false;
        for &k in &kept {
            let dot: f64 = col_j.iter().zip(centered.column(k).iter()).map(|(a, b)| a * b).sum();
            // |r| <= 1 by Cauchy-Schwarz; clamp away rounding overshoot so a
            // threshold of exactly 1.0 never prunes anything.
            let r = (dot / (norms[j] * norms[k])).clamp(-1.0, 1.0);
            if r.abs() > threshold {
                correlated = true;
                break;
            }
        }
        if !correlated {
            kept.push(j);
        }
    }
    Ok(kept)
}

/// A fitted PCA basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// Per-feature training mean, subtracted before projection.
    pub mean: Vec<f64>,
    /// k x p, orthonormal rows ordered by decreasing explained variance.
    pub components: Array2<f64>,
    /// Fraction of total variance captured by each kept component.
    pub explained_variance_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }
}

/// Fit a PCA basis keeping the smallest number of components whose
/// cumulative explained variance reaches `retained_variance` (in `(0, 1]`).
///
/// `retained_variance = 1.0` keeps every numerically nonzero direction, so
/// projection followed by back-projection reproduces the training data.
pub fn pca_fit(x: &Array2<f64>, retained_variance: f64) -> Result<PcaModel, FeatureError> {
    if x.nrows() < 2 || x.ncols() == 0 {
        return Err(FeatureError::EmptyInput { op: "pca_fit" });
    }
    if !(retained_variance > 0.0 && retained_variance <= 1.0) {
        return Err(FeatureError::BadRetainedVariance { got: retained_variance });
    }
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = x - &mean.broadcast((x.nrows(), x.ncols())).expect("broadcastable");
    let (svals, vt) = linalg::svd_vt(&centered);

    // sigma_i^2 are proportional to the per-direction variances.
    let total: f64 = svals.iter().map(|s| s * s).sum();
    if total <= 0.0 {
        return Err(FeatureError::EmptyInput { op: "pca_fit (zero-variance input)" });
    }
    let rank_tol = 1e-12 * svals[0];
    let mut cum = 0.0;
    let mut k = 0;
    for (i, &s) in svals.iter().enumerate() {
        if s <= rank_tol {
            break;
        }
        cum += s * s / total;
        k = i + 1;
        // Small slack so retained_variance = 1.0 terminates despite
        // floating-point cumulative sums landing at 0.999999....
        if cum >= retained_variance - 1e-9 {
            break;
        }
    }
    let k = k.max(1);

    let mut components = vt.slice(ndarray::s![..k, ..]).to_owned();
    // Canonical sign: the entry with the largest magnitude is positive, so
    // fits are byte-stable under serialization round-trips.
    for mut row in components.axis_iter_mut(Axis(0)) {
        let dominant =
            row.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if dominant < 0.0 {
            row.mapv_inplace(|v| -v);
        }
    }
    let explained_variance_ratio: Vec<f64> =
        svals.iter().take(k).map(|s| s * s / total).collect();

    Ok(PcaModel { mean: mean.to_vec(), components, explained_variance_ratio })
}

/// Project rows of `x` onto a fitted basis: `(x - mean) . components^T`.
pub fn pca_transform(model: &PcaModel, x: &Array2<f64>) -> Array2<f64> {
    let mean = Array1::from_vec(model.mean.clone());
    let centered = x - &mean.broadcast((x.nrows(), x.ncols())).expect("broadcastable");
    centered.dot(&model.components.t())
}

/// Back-project component scores into feature space (used by tests and
/// diagnostics; inference never needs it).
pub fn pca_inverse(model: &PcaModel, scores: &Array2<f64>) -> Array2<f64> {
    let mean = Array1::from_vec(model.mean.clone());
    scores.dot(&model.components) + &mean.broadcast((scores.nrows(), model.mean.len())).expect("broadcastable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn randn(rng: &mut impl Rng) -> f64 {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    #[test]
    fn prune_drops_duplicates_and_constants_keeps_first_of_each_group() {
        let mut rng = crate::seed::rng(21, "test/prune");
        let n = 400;
        let a: Vec<f64> = (0..n).map(|_| randn(&mut rng)).collect();
        let c: Vec<f64> = (0..n).map(|_| randn(&mut rng)).collect();
        let x = Array2::from_shape_fn((n, 4), |(i, j)| match j {
            0 => a[i],
            1 => a[i] + 0.01 * ((i * 37 % 11) as f64 - 5.0) / 5.0, // near-copy of column 0
            2 => c[i],
            _ => 7.25, // constant
        });
        let kept = correlation_prune(&x, 0.9).unwrap();
        assert_eq!(kept, vec![0, 2]);
    }

    #[test]
    fn prune_keeps_everything_when_independent() {
        let mut rng = crate::seed::rng(22, "test/prune-indep");
        let x = Array2::from_shape_fn((500, 5), |_| randn(&mut rng));
        let kept = correlation_prune(&x, 0.9).unwrap();
        assert_eq!(kept, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn prune_threshold_is_strictly_greater_than() {
        // Two columns engineered to correlate exactly 1.0, threshold 1.0:
        // |r| > 1.0 is impossible, so both survive.
        let x = Array2::from_shape_fn((100, 2), |(i, j)| (i as f64) * (j as f64 + 1.0));
        let kept = correlation_prune(&x, 1.0).unwrap();
        assert_eq!(kept, vec![0, 1]);
    }

    #[test]
    fn pca_recovers_embedded_subspace_losslessly() {
        // Three observed features spanning a 2-D latent space.
        let mut rng = crate::seed::rng(31, "test/pca-lossless");
        let n = 200;
        let x = Array2::from_shape_fn((n, 3), |(i, _)| i as f64 * 0.0); // placeholder
        let mut x = x;
        for i in 0..n {
            let (u, v) = (randn(&mut rng), randn(&mut rng));
            x[[i, 0]] = u + 1.0;
            x[[i, 1]] = v - 2.0;
            x[[i, 2]] = u + v; // linearly dependent
        }
        let model = pca_fit(&x, 1.0).unwrap();
        assert_eq!(model.n_components(), 2, "rank-2 data keeps 2 components");
        let scores = pca_transform(&model, &x);
        let recon = pca_inverse(&model, &scores);
        let err = (&recon - &x).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "lossless reconstruction failed by {err}");
    }

    #[test]
    fn pca_keeps_smallest_count_reaching_target_variance() {
        // Diagonal covariance ~ [100, 1, 0.01]: first component explains
        // ~0.9900, first two ~0.9999.
        let mut rng = crate::seed::rng(32, "test/pca-count");
        let x = Array2::from_shape_fn((2000, 3), |(_, j)| {
            randn(&mut rng) * [10.0, 1.0, 0.1][j]
        });
        let m95 = pca_fit(&x, 0.95).unwrap();
        assert_eq!(m95.n_components(), 1, "95% needs one component");
        let m999 = pca_fit(&x, 0.9995).unwrap();
        assert_eq!(m999.n_components(), 2, "99.95% needs two");
        // Ratios sorted descending, rows orthonormal.
        let m = pca_fit(&x, 1.0).unwrap();
        for w in m.explained_variance_ratio.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let g = m.components.dot(&m.components.t());
        for r in 0..g.nrows() {
            for c in 0..g.ncols() {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((g[[r, c]] - want).abs() < 1e-10, "component rows not orthonormal");
            }
        }
    }

    #[test]
    fn pca_scores_are_decorrelated() {
        let mut rng = crate::seed::rng(33, "test/pca-decorr");
        let n = 1000;
        let mut x = Array2::zeros((n, 3));
        for i in 0..n {
            let (u, v, w) = (randn(&mut rng), randn(&mut rng), randn(&mut rng));
            x[[i, 0]] = 2.0 * u + v;
            x[[i, 1]] = u - v + 0.5 * w;
            x[[i, 2]] = w + 0.3 * u;
        }
        let model = pca_fit(&x, 1.0).unwrap();
        let s = pca_transform(&model, &x);
        let nf = n as f64;
        for a in 0..s.ncols() {
            for b in (a + 1)..s.ncols() {
                let (ma, mb) =
                    (s.column(a).sum() / nf, s.column(b).sum() / nf);
                let cov: f64 = s
                    .column(a)
                    .iter()
                    .zip(s.column(b).iter())
                    .map(|(x, y)| (x - ma) * (y - mb))
                    .sum::<f64>()
                    / nf;
                assert!(cov.abs() < 1e-9, "score covariance [{a},{b}] = {cov}");
            }
        }
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let x = Array2::<f64>::zeros((1, 3));
        assert!(correlation_prune(&x, 0.9).is_err(), "single row");
        let x = Array2::from_elem((10, 3), 5.0);
        assert!(pca_fit(&x, 0.95).is_err(), "zero-variance input");
        let x = Array2::from_shape_fn((10, 2), |(i, j)| (i + j) as f64);
        assert!(pca_fit(&x, 0.0).is_err(), "retained variance 0");
        assert!(pca_fit(&x, 1.5).is_err(), "retained variance > 1");
        assert!(correlation_prune(&x, 0.0).is_err(), "threshold 0");
    }
}
