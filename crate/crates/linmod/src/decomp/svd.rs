//! Singular value decomposition built on the symmetric eigendecomposition
//! of the Gram matrix: right vectors are eigenvectors of `X^T X`, singular
//! values their square roots, and left vectors `u_i = X v_i / sigma_i`.
//! One alternation pass (`u` from `X v`, `v` from `X^T u`, both
//! re-orthonormalized) scrubs the precision lost to squaring the condition
//! number in the Gram matrix.

use serde::Serialize;

use super::eigen::spectral_symmetric;
use super::{columns_to_matrix, complete_basis_vector, orthogonalize_against};
use crate::error::Result;
use crate::matrix::{dot, norm2, Matrix};

/// Singular values below `1e-8 * sigma_1` are treated as numerically zero
/// when deciding the rank.
pub const SVD_RANK_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SvdMode {
    /// `rank` columns in `U` and `V`.
    Reduced,
    /// Square `U` and `V`; silent columns span the null spaces of `X^T`
    /// and `X`.
    Full,
}

/// `X = U diag(sigma) V^T` with nonnegative singular values in descending
/// order.
#[derive(Clone, Debug, Serialize)]
pub struct SvdFactors {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
    pub rank: usize,
    pub mode: SvdMode,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> Matrix {
        let (n, p) = (self.u.rows, self.v.rows);
        let mut out = Matrix::zeros(n, p);
        for (k, &s) in self.sigma.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for i in 0..n {
                let us = s * self.u.get(i, k);
                for j in 0..p {
                    out.set(i, j, out.get(i, j) + us * self.v.get(j, k));
                }
            }
        }
        out
    }
}

pub fn svd(x: &Matrix, mode: SvdMode) -> Result<SvdFactors> {
    let (n, p) = (x.rows, x.cols);
    let k = n.min(p);
    let eigen = spectral_symmetric(&x.gram())?;
    // rank decision from ||X v_i||, which sees true null directions at
    // machine precision where sqrt(lambda_i) only sees the Gram noise floor
    let sigma_mv: Vec<f64> = (0..k)
        .map(|i| x.matvec(&eigen.q.col(i)).map(|w| norm2(&w)))
        .collect::<Result<_>>()?;
    let sigma1 = sigma_mv.iter().fold(0.0_f64, |m, &s| m.max(s));
    let keep: Vec<usize> = if sigma1 == 0.0 {
        Vec::new()
    } else {
        (0..k)
            .filter(|&i| sigma_mv[i] > SVD_RANK_TOLERANCE * sigma1)
            .collect()
    };
    let rank = keep.len();

    // left vectors from the construction u_i = X v_i / sigma_i
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(rank);
    for &i in &keep {
        let w = x.matvec(&eigen.q.col(i))?;
        let (w, norm) = orthogonalize_against(&w, &u_cols);
        debug_assert!(norm > 0.0);
        u_cols.push(w.iter().map(|t| t / norm).collect());
    }
    // refreshed right vectors v_i = X^T u_i land in the row space exactly
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(rank);
    for u in &u_cols {
        let w = x.tr_matvec(u)?;
        let (w, norm) = orthogonalize_against(&w, &v_cols);
        debug_assert!(norm > 0.0);
        v_cols.push(w.iter().map(|t| t / norm).collect());
    }
    // sign convention on v, then sigma from the Rayleigh quotient
    let mut triples: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::with_capacity(rank);
    for (u, mut v) in u_cols.into_iter().zip(v_cols) {
        let mut best = 0;
        for (i, t) in v.iter().enumerate() {
            if t.abs() > v[best].abs() {
                best = i;
            }
        }
        let mut u = u;
        if v[best] < 0.0 {
            for t in v.iter_mut() {
                *t = -*t;
            }
            for t in u.iter_mut() {
                *t = -*t;
            }
        }
        let xv = x.matvec(&v)?;
        let mut s = dot(&u, &xv);
        if s < 0.0 {
            for t in u.iter_mut() {
                *t = -*t;
            }
            s = -s;
        }
        triples.push((s, u, v));
    }
    triples.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite singular values"));
    let mut sigma: Vec<f64> = triples.iter().map(|t| t.0).collect();
    let mut u_cols: Vec<Vec<f64>> = triples.iter().map(|t| t.1.clone()).collect();
    let mut v_cols: Vec<Vec<f64>> = triples.into_iter().map(|t| t.2).collect();

    match mode {
        SvdMode::Reduced => Ok(SvdFactors {
            u: columns_to_matrix(n, &u_cols),
            sigma,
            v: columns_to_matrix(p, &v_cols),
            rank,
            mode,
        }),
        SvdMode::Full => {
            while u_cols.len() < n {
                u_cols.push(complete_basis_vector(n, &u_cols));
            }
            while v_cols.len() < p {
                v_cols.push(complete_basis_vector(p, &v_cols));
            }
            sigma.resize(k, 0.0);
            Ok(SvdFactors {
                u: columns_to_matrix(n, &u_cols),
                sigma,
                v: columns_to_matrix(p, &v_cols),
                rank,
                mode,
            })
        }
    }
}
