//! Thin dense linear-algebra layer over `nalgebra`.
//!
//! Every rank or kernel decision in the crate goes through these helpers so the
//! thresholds are applied the same way everywhere: a singular value (or
//! eigenvalue magnitude) counts as zero when it is at most `tol` times the
//! largest one.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `tol * sigma_max`.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    rank_of_values(&singular_values(m), tol)
}

pub(crate) fn rank_of_values(sv: &[f64], tol: f64) -> usize {
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// Orthonormal basis of `{x : m x = 0}` at relative threshold `tol`.
///
/// Wide matrices are padded with zero rows so the decomposition yields a full
/// set of right singular vectors.
pub fn right_null_space(m: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let cols = m.ncols();
    if cols == 0 {
        return Vec::new();
    }
    if m.nrows() == 0 {
        return (0..cols).map(|i| unit(cols, i)).collect();
    }
    let square;
    let work = if m.nrows() < cols {
        let mut padded = DMatrix::zeros(cols, cols);
        padded.rows_mut(0, m.nrows()).copy_from(m);
        square = padded;
        &square
    } else {
        m
    };
    let svd = work.clone().svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let max = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    order
        .into_iter()
        .filter(|&i| max == 0.0 || svd.singular_values[i] <= tol * max)
        .map(|i| vt.row(i).transpose())
        .collect()
}

pub(crate) fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: DMatrix<f64>,
}

pub fn sym_eigen(m: &DMatrix<f64>) -> SymEigen {
    let n = m.nrows();
    if n == 0 {
        return SymEigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        };
    }
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    SymEigen { values, vectors }
}

/// Operator 2-norm.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Dimension of the span of a set of vectors of equal length.
pub fn span_dimension(vectors: &[DVector<f64>], tol: f64) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    rank(&DMatrix::from_columns(vectors), tol)
}

pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub fn norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

/// Determinant-based affine independence of `points` (each of length `d`,
/// exactly `d+1` of them), scaled by the product of the edge vectors from the
/// first point so that the test is invariant under uniform scaling.
pub fn affinely_independent(points: &[&[f64]], tol: f64) -> bool {
    let d = points.len().saturating_sub(1);
    if d == 0 {
        return true;
    }
    let base = points[0];
    let mut m = DMatrix::zeros(d, d);
    let mut scale = 1.0;
    for (r, p) in points[1..].iter().enumerate() {
        let mut len2 = 0.0;
        for c in 0..d {
            let x = p[c] - base[c];
            m[(r, c)] = x;
            len2 += x * x;
        }
        if len2 == 0.0 {
            return false;
        }
        scale *= sqrt(len2);
    }
    m.determinant().abs() > tol * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix_is_complete() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = right_null_space(&m, 1e-12);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            assert!((&m * v).norm() < 1e-12);
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        assert!(ns[0].dot(&ns[1]).abs() < 1e-12);
    }

    #[test]
    fn rank_of_zero_matrix() {
        assert_eq!(rank(&DMatrix::zeros(3, 2), 1e-9), 0);
        assert_eq!(right_null_space(&DMatrix::zeros(3, 2), 1e-9).len(), 2);
    }

    #[test]
    fn eigen_sorted() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -1.0]);
        let e = sym_eigen(&m);
        assert_eq!(e.values, [-1.0, 3.0]);
        assert!((e.vectors[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn collinear_points_are_dependent() {
        let pts: [&[f64]; 3] = [&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]];
        assert!(!affinely_independent(&pts, 1e-9));
        let pts: [&[f64]; 3] = [&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]];
        assert!(affinely_independent(&pts, 1e-9));
    }
}
