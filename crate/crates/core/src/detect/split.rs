//! Deterministic train/test splits.

use rand::seq::SliceRandom;

use super::DetectError;
use crate::seed;

fn check_fraction(test_fraction: f64) -> Result<(), DetectError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DetectError::BadSplit {
            message: format!("test fraction {test_fraction} outside (0, 1)"),
        });
    }
    Ok(())
}

/// Plain shuffled holdout over `n` rows. The test side gets
/// `round(n * test_fraction)` rows clamped to `[1, n - 1]`.
pub fn holdout(
    n: usize,
    test_fraction: f64,
    master_seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DetectError> {
    check_fraction(test_fraction)?;
    if n < 2 {
        return Err(DetectError::BadSplit {
            message: format!("cannot split {n} rows into train and test"),
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(master_seed, "split.holdout"));
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let (test, train) = idx.split_at(n_test);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Class-stratified holdout: each class contributes
/// `round(n_k * test_fraction)` test rows clamped to `[1, n_k - 1]`, so
/// every class appears on both sides. Classes with fewer than 2 rows are
/// an error (named, so the caller can fix the recording or the labels).
pub fn stratified_holdout(
    labels: &[usize],
    classes: &[String],
    test_fraction: f64,
    master_seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DetectError> {
    check_fraction(test_fraction)?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (k, class) in classes.iter().enumerate() {
        let mut members: Vec<usize> =
            (0..labels.len()).filter(|&i| labels[i] == k).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(DetectError::ClassTooSmall {
                class: class.clone(),
                count: members.len(),
            });
        }
        members.shuffle(&mut seed::rng(master_seed, &format!("split.class.{k}")));
        let n_k = members.len();
        let n_test = ((n_k as f64 * test_fraction).round() as usize).clamp(1, n_k - 1);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// K-fold splits over `n` rows: indices are shuffled once, then dealt
/// round-robin so fold sizes differ by at most one. Returns one
/// `(train, test)` pair per fold.
pub fn kfold(
    n: usize,
    folds: usize,
    master_seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>, DetectError> {
    if folds < 2 || folds > n {
        return Err(DetectError::BadSplit {
            message: format!("{folds} folds over {n} rows"),
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(master_seed, "split.kfold"));
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in idx.iter().enumerate() {
        fold_of[i] = pos % folds;
    }
    Ok(assemble_folds(&fold_of, folds))
}

/// Class-stratified k-fold: each class's rows are shuffled and dealt
/// round-robin across folds, keeping class balance within one row per
/// fold. Every class needs at least `folds` rows.
pub fn stratified_kfold(
    labels: &[usize],
    classes: &[String],
    folds: usize,
    master_seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>, DetectError> {
    if folds < 2 {
        return Err(DetectError::BadSplit { message: format!("{folds} folds") });
    }
    let mut fold_of = vec![0usize; labels.len()];
    for (k, class) in classes.iter().enumerate() {
        let mut members: Vec<usize> =
            (0..labels.len()).filter(|&i| labels[i] == k).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < folds {
            return Err(DetectError::ClassTooSmall { class: class.clone(), count: members.len() });
        }
        members.shuffle(&mut seed::rng(master_seed, &format!("split.kfold.class.{k}")));
        for (pos, &i) in members.iter().enumerate() {
            fold_of[i] = pos % folds;
        }
    }
    Ok(assemble_folds(&fold_of, folds))
}

fn assemble_folds(fold_of: &[usize], folds: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    (0..folds)
        .map(|f| {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (i, &fi) in fold_of.iter().enumerate() {
                if fi == f {
                    test.push(i);
                } else {
                    train.push(i);
                }
            }
            (train, test)
        })
        .collect()
}
