//! Linear-algebra-based learners: multinomial logistic regression,
//! linear/quadratic discriminants, and ridge linear regression.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{shape_err, DetectError};
use crate::linalg;

/// Row-wise softmax, numerically stabilized.
fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Argmax per row; ties go to the smaller class id. Returns the winning
/// indices and their (already normalized) scores.
fn pick_rows(prob: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    let mut labels = Vec::with_capacity(prob.nrows());
    let mut confidence = Vec::with_capacity(prob.nrows());
    for row in prob.rows() {
        let mut best = 0usize;
        for (k, v) in row.iter().enumerate() {
            if *v > row[best] {
                best = k;
            }
        }
        labels.push(best);
        confidence.push(row[best]);
    }
    (labels, confidence)
}

/// Multinomial logistic regression trained by full-batch gradient descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// n_classes x (1 + n_features); column 0 is the bias.
    pub weights: Array2<f64>,
    pub iterations: usize,
}

impl LogisticModel {
    pub const LEARNING_RATE: f64 = 0.5;
    pub const L2: f64 = 1e-4;
    pub const MAX_ITERS: usize = 500;
    pub const TOL: f64 = 1e-6;

    pub fn fit(x: &Array2<f64>, y: &[usize], n_classes: usize) -> Self {
        let n = x.nrows();
        let f = x.ncols();
        let mut xa = Array2::ones((n, f + 1));
        xa.slice_mut(ndarray::s![.., 1..]).assign(x);
        let mut onehot = Array2::<f64>::zeros((n, n_classes));
        for (i, &k) in y.iter().enumerate() {
            onehot[(i, k)] = 1.0;
        }

        let mut w = Array2::<f64>::zeros((n_classes, f + 1));
        let mut iterations = 0;
        for _ in 0..Self::MAX_ITERS {
            iterations += 1;
            let mut prob = xa.dot(&w.t());
            softmax_rows(&mut prob);
            let resid = &prob - &onehot; // n x c
            let mut grad = resid.t().dot(&xa) / n as f64; // c x (f+1)
            // L2 on everything but the bias column.
            let mut penalty = w.clone() * Self::L2;
            penalty.column_mut(0).fill(0.0);
            grad += &penalty;
            let step = grad.mapv(|g| g * Self::LEARNING_RATE);
            w -= &step;
            let max_step = step.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if max_step < Self::TOL {
                break;
            }
        }
        LogisticModel { weights: w, iterations }
    }

    pub fn predict(&self, x: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
        let n = x.nrows();
        let f = x.ncols();
        let mut xa = Array2::ones((n, f + 1));
        xa.slice_mut(ndarray::s![.., 1..]).assign(x);
        let mut prob = xa.dot(&self.weights.t());
        softmax_rows(&mut prob);
        pick_rows(&prob)
    }
}

/// Linear discriminant: shared within-class covariance with a small
/// ridge, Gaussian class posteriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    /// n_classes x n_features discriminant directions (Sigma^-1 mu_k).
    pub directions: Array2<f64>,
    /// Per-class constant: -mu_k . a_k / 2 + ln prior_k.
    pub offsets: Vec<f64>,
}

pub const DISCRIMINANT_RIDGE: f64 = 1e-6;

fn class_stats(
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
) -> Result<(Array2<f64>, Vec<usize>), DetectError> {
    let f = x.ncols();
    let mut means = Array2::<f64>::zeros((n_classes, f));
    let mut counts = vec![0usize; n_classes];
    for (i, &k) in y.iter().enumerate() {
        counts[k] += 1;
        for c in 0..f {
            means[(k, c)] += x[(i, c)];
        }
    }
    for k in 0..n_classes {
        if counts[k] < 2 {
            return Err(DetectError::ClassTooSmall {
                class: format!("#{k}"),
                count: counts[k],
            });
        }
        for c in 0..f {
            means[(k, c)] /= counts[k] as f64;
        }
    }
    Ok((means, counts))
}

impl LdaModel {
    pub fn fit(x: &Array2<f64>, y: &[usize], n_classes: usize) -> Result<Self, DetectError> {
        let n = x.nrows();
        let f = x.ncols();
        let (means, counts) = class_stats(x, y, n_classes)?;

        let mut pooled = Array2::<f64>::zeros((f, f));
        for (i, &k) in y.iter().enumerate() {
            let d: Vec<f64> = (0..f).map(|c| x[(i, c)] - means[(k, c)]).collect();
            for a in 0..f {
                for b in a..f {
                    pooled[(a, b)] += d[a] * d[b];
                }
            }
        }
        let denom = (n.saturating_sub(n_classes)).max(1) as f64;
        for a in 0..f {
            for b in a..f {
                pooled[(a, b)] /= denom;
                pooled[(b, a)] = pooled[(a, b)];
            }
            pooled[(a, a)] += DISCRIMINANT_RIDGE;
        }

        let mut directions = Array2::<f64>::zeros((n_classes, f));
        let mut offsets = Vec::with_capacity(n_classes);
        for k in 0..n_classes {
            let mu = means.row(k).to_owned();
            let a = linalg::solve(&pooled, &mu).ok_or_else(|| DetectError::SingularModel {
                context: "linear discriminant".to_string(),
            })?;
            let prior = counts[k] as f64 / n as f64;
            offsets.push(-0.5 * mu.dot(&a) + prior.ln());
            directions.row_mut(k).assign(&a);
        }
        Ok(LdaModel { directions, offsets })
    }

    pub fn predict(&self, x: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
        let mut scores = x.dot(&self.directions.t());
        for mut row in scores.rows_mut() {
            for (k, v) in row.iter_mut().enumerate() {
                *v += self.offsets[k];
            }
        }
        softmax_rows(&mut scores);
        pick_rows(&scores)
    }
}

/// Quadratic discriminant: one ridge-stabilized covariance per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdaModel {
    pub means: Array2<f64>,
    pub inverses: Vec<Array2<f64>>,
    pub log_dets: Vec<f64>,
    pub log_priors: Vec<f64>,
}

impl QdaModel {
    pub fn fit(x: &Array2<f64>, y: &[usize], n_classes: usize) -> Result<Self, DetectError> {
        let n = x.nrows();
        let f = x.ncols();
        let (means, counts) = class_stats(x, y, n_classes)?;

        let mut inverses = Vec::with_capacity(n_classes);
        let mut log_dets = Vec::with_capacity(n_classes);
        let mut log_priors = Vec::with_capacity(n_classes);
        for k in 0..n_classes {
            let mut cov = Array2::<f64>::zeros((f, f));
            for (i, &yi) in y.iter().enumerate() {
                if yi != k {
                    continue;
                }
                let d: Vec<f64> = (0..f).map(|c| x[(i, c)] - means[(k, c)]).collect();
                for a in 0..f {
                    for b in a..f {
                        cov[(a, b)] += d[a] * d[b];
                    }
                }
            }
            for a in 0..f {
                for b in a..f {
                    cov[(a, b)] /= (counts[k] - 1) as f64;
                    cov[(b, a)] = cov[(a, b)];
                }
            }
            // Escalate the ridge until the matrix is positive definite;
            // tiny classes in high dimensions need more than the default.
            let mut ridge = DISCRIMINANT_RIDGE;
            let mut solved = None;
            for _ in 0..6 {
                let mut c = cov.clone();
                for a in 0..f {
                    c[(a, a)] += ridge;
                }
                if let Some(logdet) = linalg::cholesky_logdet(&c) {
                    if let Some(inv) = linalg::inverse(&c) {
                        solved = Some((inv, logdet));
                        break;
                    }
                }
                ridge *= 10.0;
            }
            let (inv, logdet) = solved.ok_or_else(|| DetectError::SingularModel {
                context: format!("quadratic discriminant, class #{k}"),
            })?;
            inverses.push(inv);
            log_dets.push(logdet);
            log_priors.push((counts[k] as f64 / n as f64).ln());
        }
        Ok(QdaModel { means, inverses, log_dets, log_priors })
    }

    pub fn predict(&self, x: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
        let n_classes = self.means.nrows();
        let mut scores = Array2::<f64>::zeros((x.nrows(), n_classes));
        for (i, row) in x.rows().into_iter().enumerate() {
            for k in 0..n_classes {
                let d = &row.to_owned() - &self.means.row(k).to_owned();
                let quad = d.dot(&self.inverses[k].dot(&d));
                scores[(i, k)] = -0.5 * (self.log_dets[k] + quad) + self.log_priors[k];
            }
        }
        softmax_rows(&mut scores);
        pick_rows(&scores)
    }
}

/// Ridge least squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinregModel {
    /// Bias followed by one weight per feature.
    pub weights: Vec<f64>,
}

impl LinregModel {
    pub const RIDGE: f64 = 1e-8;

    pub fn fit(x: &Array2<f64>, y: &[f64]) -> Result<Self, DetectError> {
        let n = x.nrows();
        let f = x.ncols();
        let mut xa = Array2::ones((n, f + 1));
        xa.slice_mut(ndarray::s![.., 1..]).assign(x);
        let mut gram = xa.t().dot(&xa);
        for j in 1..=f {
            gram[(j, j)] += Self::RIDGE;
        }
        let rhs = xa.t().dot(&Array1::from_iter(y.iter().copied()));
        let w = linalg::solve(&gram, &rhs).ok_or_else(|| DetectError::SingularModel {
            context: "ridge regression".to_string(),
        })?;
        Ok(LinregModel { weights: w.to_vec() })
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                self.weights[0]
                    + row.iter().zip(&self.weights[1..]).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }
}

/// Guard shared by the trainers: x non-empty and y aligned.
pub(crate) fn check_xy(x: &Array2<f64>, n_targets: usize) -> Result<(), DetectError> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(DetectError::EmptyDataset);
    }
    if x.nrows() != n_targets {
        return Err(shape_err(format!(
            "{} rows vs {} targets",
            x.nrows(),
            n_targets
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Axis as NdAxis};
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    use crate::seed::rng;

    fn two_blobs(n_per: usize, gap: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut r = rng(seed, "detect.linear.blobs");
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut x = Array2::zeros((2 * n_per, 2));
        let mut y = Vec::new();
        for i in 0..2 * n_per {
            let k = i % 2;
            let cx = if k == 0 { 0.0 } else { gap };
            x[(i, 0)] = cx + noise.sample(&mut r);
            x[(i, 1)] = noise.sample(&mut r);
            y.push(k);
        }
        (x, y)
    }

    #[test]
    fn logistic_separates_wide_blobs_and_reports_confidence() {
        let (x, y) = two_blobs(60, 10.0, 1);
        let m = LogisticModel::fit(&x, &y, 2);
        let (pred, conf) = m.predict(&x);
        assert_eq!(pred, y);
        assert!(conf.iter().all(|&c| c > 0.9), "confident far from the boundary");
        assert!(m.iterations <= LogisticModel::MAX_ITERS);
    }

    #[test]
    fn lda_and_qda_agree_on_shared_covariance_blobs() {
        let (x, y) = two_blobs(80, 10.0, 2);
        let lda = LdaModel::fit(&x, &y, 2).unwrap();
        let qda = QdaModel::fit(&x, &y, 2).unwrap();
        let (pl, _) = lda.predict(&x);
        let (pq, _) = qda.predict(&x);
        assert_eq!(pl, y);
        assert_eq!(pq, y);
    }

    #[test]
    fn qda_uses_per_class_shape_where_lda_cannot() {
        // Class 0: tight isotropic at origin. Class 1: a wide ring-like
        // cloud around it (larger variance, same mean). LDA's shared
        // covariance cannot split identical means; QDA can.
        let mut r = rng(3, "detect.linear.ring");
        let tight: Normal<f64> = Normal::new(0.0, 0.3).unwrap();
        let wide: Normal<f64> = Normal::new(0.0, 4.0).unwrap();
        let n = 150;
        let mut x = Array2::zeros((2 * n, 2));
        let mut y = Vec::new();
        for i in 0..n {
            x[(i, 0)] = tight.sample(&mut r);
            x[(i, 1)] = tight.sample(&mut r);
            y.push(0);
        }
        for i in n..2 * n {
            // Reject draws that land inside the tight cluster's 3-sigma.
            loop {
                let a = wide.sample(&mut r);
                let b = wide.sample(&mut r);
                if a.hypot(b) > 1.5 {
                    x[(i, 0)] = a;
                    x[(i, 1)] = b;
                    break;
                }
            }
            y.push(1);
        }
        let qda = QdaModel::fit(&x, &y, 2).unwrap();
        let (pred, _) = qda.predict(&x);
        let acc = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64;
        assert!(acc > 0.95, "qda accuracy {acc}");
    }

    #[test]
    fn linreg_recovers_known_coefficients() {
        let mut r = rng(4, "detect.linear.linreg");
        let noise = Normal::new(0.0, 0.01).unwrap();
        let n = 200;
        let x = Array2::from_shape_fn((n, 2), |_| r.gen_range(-2.0..2.0));
        let y: Vec<f64> = x
            .axis_iter(NdAxis(0))
            .map(|row| 3.0 * row[0] - 2.0 * row[1] + 1.0 + noise.sample(&mut r))
            .collect();
        let m = LinregModel::fit(&x, &y).unwrap();
        assert!((m.weights[0] - 1.0).abs() < 0.01, "bias {}", m.weights[0]);
        assert!((m.weights[1] - 3.0).abs() < 0.01);
        assert!((m.weights[2] + 2.0).abs() < 0.01);
        let pred = m.predict(&array![[1.0, 1.0]]);
        assert!((pred[0] - 2.0).abs() < 0.05);
    }
}
