//! k-nearest-neighbour classifier.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Stores the (already preprocessed) training set verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub n_classes: usize,
    pub train_x: Array2<f64>,
    pub train_y: Vec<usize>,
}

impl KnnModel {
    pub fn fit(x: &Array2<f64>, y: &[usize], n_classes: usize, k: usize) -> Self {
        KnnModel {
            k: k.clamp(1, x.nrows()),
            n_classes,
            train_x: x.clone(),
            train_y: y.to_vec(),
        }
    }

    /// Majority vote among the k nearest training rows (squared Euclidean
    /// distance; distance ties break toward the earlier training row, vote
    /// ties toward the smaller class id). Confidence is the winning vote
    /// fraction.
    pub fn predict(&self, x: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
        let mut labels = Vec::with_capacity(x.nrows());
        let mut confidence = Vec::with_capacity(x.nrows());
        for row in x.rows() {
            let mut dist: Vec<(f64, usize)> = self
                .train_x
                .rows()
                .into_iter()
                .enumerate()
                .map(|(i, tr)| {
                    let d: f64 = row.iter().zip(tr.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d, i)
                })
                .collect();
            dist.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));
            let mut votes = vec![0usize; self.n_classes];
            for &(_, i) in dist.iter().take(self.k) {
                votes[self.train_y[i]] += 1;
            }
            let (winner, count) = votes
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .expect("at least one class");
            labels.push(winner);
            confidence.push(*count as f64 / self.k as f64);
        }
        (labels, confidence)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn votes_and_tie_breaks_are_deterministic() {
        // Two classes, two points each; k=4 makes every vote a 2-2 tie
        // from the origin, which must resolve to class 0.
        let x = array![[-1.0], [-2.0], [1.0], [2.0]];
        let y = vec![0, 0, 1, 1];
        let m = KnnModel::fit(&x, &y, 2, 4);
        let (labels, conf) = m.predict(&array![[0.0]]);
        assert_eq!(labels, [0]);
        assert!((conf[0] - 0.5).abs() < 1e-12);

        // k=1 reproduces the training labels exactly.
        let m1 = KnnModel::fit(&x, &y, 2, 1);
        let (labels, conf) = m1.predict(&x);
        assert_eq!(labels, y);
        assert!(conf.iter().all(|&c| c == 1.0));
    }
}
