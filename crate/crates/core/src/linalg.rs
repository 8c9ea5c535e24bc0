//! Thin bridge between `ndarray` (the crate-wide sample container) and
//! `nalgebra` (used only for decompositions: symmetric eigen, SVD, and
//! linear solves). Nothing here is public API.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

pub(crate) fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_row_iterator(a.nrows(), a.ncols(), a.iter().copied())
}

pub(crate) fn to_array2(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(r, c)| m[(r, c)])
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
/// Returns `(eigenvalues, eigenvectors)` where row `i` of the returned
/// matrix is the unit eigenvector for eigenvalue `i`.
pub(crate) fn sym_eig_desc(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    assert_eq!(a.nrows(), a.ncols(), "symmetric eigen needs a square matrix");
    let eig = nalgebra::SymmetricEigen::new(to_dmatrix(a));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("eigenvalues of a real symmetric matrix are finite")
    });
    let vals = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let vecs = Array2::from_shape_fn((order.len(), a.nrows()), |(r, c)| {
        eig.eigenvectors[(c, order[r])]
    });
    (vals, vecs)
}

/// Solve `A x = b` for square `A` via LU with partial pivoting.
pub(crate) fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let lu = to_dmatrix(a).lu();
    lu.solve(&DVector::from_iterator(b.len(), b.iter().copied()))
        .map(|x| Array1::from_iter(x.iter().copied()))
}

/// Invert a square matrix, if it is invertible.
pub(crate) fn inverse(a: &Array2<f64>) -> Option<Array2<f64>> {
    to_dmatrix(a).try_inverse().map(|m| to_array2(&m))
}

/// Thin SVD of `a` (m x n): returns `(singular_values, vt)` with the
/// singular values sorted descending and `vt` holding the corresponding
/// right-singular vectors as rows (k x n, k = min(m, n)).
pub(crate) fn svd_vt(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let svd = to_dmatrix(a).svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .expect("singular values are finite")
    });
    let vals = Array1::from_iter(order.iter().map(|&i| svd.singular_values[i]));
    let rows = Array2::from_shape_fn((order.len(), a.ncols()), |(r, c)| vt[(order[r], c)]);
    (vals, rows)
}

/// log-determinant of a symmetric positive-definite matrix via Cholesky.
/// Returns `None` when the matrix is not positive definite.
pub(crate) fn cholesky_logdet(a: &Array2<f64>) -> Option<f64> {
    let chol = nalgebra::Cholesky::new(to_dmatrix(a))?;
    let l = chol.l();
    Some(2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sym_eig_sorts_descending_and_reconstructs() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = sym_eig_desc(&a);
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        // A = sum_i lambda_i v_i v_i^T
        let recon = vals[0] * outer(&vecs.row(0).to_owned()) + vals[1] * outer(&vecs.row(1).to_owned());
        let err = (&a - &recon).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "reconstruction error {err}");
    }

    fn outer(v: &ndarray::Array1<f64>) -> Array2<f64> {
        Array2::from_shape_fn((v.len(), v.len()), |(r, c)| v[r] * v[c])
    }

    #[test]
    fn solve_round_trips() {
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let b = array![1.0, 2.0];
        let x = solve(&a, &b).unwrap();
        let r0 = 4.0 * x[0] + 1.0 * x[1] - 1.0;
        let r1 = 1.0 * x[0] + 3.0 * x[1] - 2.0;
        assert!(r0.abs() < 1e-12 && r1.abs() < 1e-12);
    }

    #[test]
    fn svd_matches_eig_of_gram_matrix() {
        let a = array![[1.0, 2.0, 0.5], [0.0, 1.0, -1.0], [2.0, 0.0, 1.0], [1.0, 1.0, 1.0]];
        let (svals, vt) = svd_vt(&a);
        let gram = a.t().dot(&a);
        let (evals, _) = sym_eig_desc(&gram);
        for i in 0..3 {
            assert!(
                (svals[i] * svals[i] - evals[i]).abs() < 1e-10,
                "sigma_{i}^2 = {} vs eigenvalue {}",
                svals[i] * svals[i],
                evals[i]
            );
        }
        // Right-singular vectors are orthonormal rows.
        let vvt = vt.dot(&vt.t());
        for r in 0..3 {
            for c in 0..3 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((vvt[[r, c]] - want).abs() < 1e-10);
            }
        }
    }
}
