//! Matrix factorizations: QR by Gram-Schmidt, Householder reflections, and
//! Givens rotations; LQ; the rank-revealing ULV/URV pair; CR; the symmetric
//! spectral decomposition; and the singular value decomposition.

mod eigen;
mod qr;
mod svd;
mod utv;

pub use eigen::{spectral_symmetric, SpectralFactors};
pub use qr::{
    lq, qr_givens, qr_gram_schmidt, qr_householder, LqFactors, QrAlgorithm, QrFactors, QrMode,
};
pub use svd::{svd, SvdFactors, SvdMode};
pub use utv::{cr, ulv, urv, CrFactors, UtvFactors, UtvVariant};

use crate::matrix::{dot, norm2, Matrix};

/// Orthonormalizes `v` against the columns in `basis` (two passes of
/// projection subtraction) and returns the residual with its norm.
pub(crate) fn orthogonalize_against(v: &[f64], basis: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let mut w = v.to_vec();
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, &w);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
    }
    let n = norm2(&w);
    (w, n)
}

/// Deterministic completion: the standard basis vector with the largest
/// residual orthogonal to `basis`, normalized. Ties go to the lowest index.
pub(crate) fn complete_basis_vector(dim: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        let (w, n) = orthogonalize_against(&e, basis);
        if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
            best = Some((n, w));
        }
    }
    let (n, mut w) = best.expect("dim > 0");
    assert!(n > 0.0, "basis already spans the space");
    for x in w.iter_mut() {
        *x /= n;
    }
    w
}

/// Column-major list of orthonormal vectors into a matrix.
pub(crate) fn columns_to_matrix(rows: usize, cols: &[Vec<f64>]) -> Matrix {
    let mut m = Matrix::zeros(rows, cols.len());
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            m.set(i, j, v);
        }
    }
    m
}
