//! Evaluation metrics for class and value predictions.

use ndarray::Array2;

/// Fraction of matching labels.
pub fn accuracy(truth: &[usize], pred: &[usize]) -> f64 {
    assert_eq!(truth.len(), pred.len(), "prediction count mismatch");
    if truth.is_empty() {
        return 0.0;
    }
    let hit = truth.iter().zip(pred).filter(|(t, p)| t == p).count();
    hit as f64 / truth.len() as f64
}

/// Confusion counts: rows = truth, columns = prediction.
pub fn confusion(truth: &[usize], pred: &[usize], n_classes: usize) -> Array2<usize> {
    assert_eq!(truth.len(), pred.len(), "prediction count mismatch");
    let mut m = Array2::zeros((n_classes, n_classes));
    for (&t, &p) in truth.iter().zip(pred) {
        m[(t, p)] += 1;
    }
    m
}

fn f1_of_class(conf: &Array2<usize>, k: usize) -> f64 {
    let tp = conf[(k, k)];
    let fp: usize = (0..conf.nrows()).filter(|&r| r != k).map(|r| conf[(r, k)]).sum();
    let fn_: usize = (0..conf.ncols()).filter(|&c| c != k).map(|c| conf[(k, c)]).sum();
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// F1 of one positive class (binary tasks).
pub fn f1_binary(truth: &[usize], pred: &[usize], n_classes: usize, positive: usize) -> f64 {
    let conf = confusion(truth, pred, n_classes);
    f1_of_class(&conf, positive)
}

/// Unweighted mean F1 over the classes that actually occur in the truth;
/// classes absent from the truth are excluded rather than scored 0.
pub fn f1_macro(truth: &[usize], pred: &[usize], n_classes: usize) -> f64 {
    let conf = confusion(truth, pred, n_classes);
    let mut sum = 0.0;
    let mut present = 0usize;
    for k in 0..n_classes {
        let support: usize = (0..n_classes).map(|c| conf[(k, c)]).sum();
        if support > 0 {
            sum += f1_of_class(&conf, k);
            present += 1;
        }
    }
    if present == 0 {
        0.0
    } else {
        sum / present as f64
    }
}

/// Root mean squared error.
pub fn rmse(truth: &[f64], pred: &[f64]) -> f64 {
    assert_eq!(truth.len(), pred.len(), "prediction count mismatch");
    if truth.is_empty() {
        return 0.0;
    }
    let sse: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p) * (t - p)).sum();
    (sse / truth.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_and_f1_match_hand_counts() {
        // truth: 0 0 0 1 1 2 ; pred: 0 1 0 1 0 2
        let truth = [0, 0, 0, 1, 1, 2];
        let pred = [0, 1, 0, 1, 0, 2];
        let conf = confusion(&truth, &pred, 3);
        assert_eq!(conf[(0, 0)], 2);
        assert_eq!(conf[(0, 1)], 1);
        assert_eq!(conf[(1, 0)], 1);
        assert_eq!(conf[(1, 1)], 1);
        assert_eq!(conf[(2, 2)], 1);

        // class 0: tp=2 fp=1 fn=1 -> f1 = 4/6
        assert!((f1_binary(&truth, &pred, 3, 0) - 2.0 / 3.0).abs() < 1e-12);
        // class 1: tp=1 fp=1 fn=1 -> f1 = 1/2 ; class 2: 1.0
        let expect = (2.0 / 3.0 + 0.5 + 1.0) / 3.0;
        assert!((f1_macro(&truth, &pred, 3) - expect).abs() < 1e-12);
        assert!((accuracy(&truth, &pred) - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn macro_f1_skips_classes_absent_from_truth() {
        let truth = [0, 0, 1, 1];
        let pred = [0, 0, 1, 1];
        // Class 2 exists in the model but never occurs: excluded.
        assert_eq!(f1_macro(&truth, &pred, 3), 1.0);
    }

    #[test]
    fn rmse_matches_hand_math() {
        let truth = [1.0, 2.0, 3.0];
        let pred = [1.0, 2.0, 5.0];
        assert!((rmse(&truth, &pred) - (4.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(rmse(&[], &[]), 0.0);
    }

    #[test]
    fn empty_denominator_scores_zero() {
        // Positive class never appears and is never predicted.
        let truth = [1, 1];
        let pred = [1, 1];
        assert_eq!(f1_binary(&truth, &pred, 2, 0), 0.0);
    }
}
