//! Three QR algorithms and the LQ sibling.

use serde::Serialize;

use super::{columns_to_matrix, complete_basis_vector};
use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, Matrix};

/// Reduced keeps `p` orthonormal columns; full completes the basis to `n`
/// silent columns and appends zero rows to the triangular factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum QrMode {
    Reduced,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum QrAlgorithm {
    GramSchmidt,
    Householder,
    Givens,
}

/// `X = Q R` with orthonormal columns in `Q` and upper-triangular `R`.
#[derive(Clone, Debug, Serialize)]
pub struct QrFactors {
    pub q: Matrix,
    pub r: Matrix,
    pub mode: QrMode,
    pub algorithm: QrAlgorithm,
}

impl QrFactors {
    /// First `p` columns of `Q` and top `p x p` block of `R`.
    pub fn reduced_parts(&self) -> (Matrix, Matrix) {
        let p = self.r.cols;
        let q1 = self.q.take_cols(&(0..p.min(self.q.cols)).collect::<Vec<_>>());
        let mut r1 = Matrix::zeros(p.min(self.r.rows), p);
        for i in 0..r1.rows {
            for j in 0..p {
                r1.set(i, j, self.r.get(i, j));
            }
        }
        (q1, r1)
    }

    /// Flips signs so every diagonal entry of `R` is nonnegative, the
    /// convention under which the reduced QR of a full-column-rank matrix
    /// is unique.
    pub fn with_positive_diagonal(mut self) -> QrFactors {
        let k = self.r.rows.min(self.r.cols).min(self.q.cols);
        for i in 0..k {
            if self.r.get(i, i) < 0.0 {
                for c in 0..self.r.cols {
                    self.r.set(i, c, -self.r.get(i, c));
                }
                for r in 0..self.q.rows {
                    self.q.set(r, i, -self.q.get(r, i));
                }
            }
        }
        self
    }
}

/// `X = L Q` with lower-triangular `L` and orthonormal rows in `Q`,
/// obtained from the QR decomposition of the transpose.
#[derive(Clone, Debug, Serialize)]
pub struct LqFactors {
    pub l: Matrix,
    pub q: Matrix,
    pub mode: QrMode,
}

/// Gram-Schmidt QR. Columns found dependent (residual below the
/// scale-relative tolerance) get a zero diagonal in `R` and a deterministic
/// replacement direction orthogonal to the earlier columns.
pub fn qr_gram_schmidt(x: &Matrix, mode: QrMode) -> Result<QrFactors> {
    let (n, p) = (x.rows, x.cols);
    if mode == QrMode::Reduced && n < p {
        return Err(Error::shape(
            "qr_gram_schmidt",
            format!("reduced mode needs rows >= cols, got {n}x{p}"),
        ));
    }
    let mut q_cols: Vec<Vec<f64>> = Vec::with_capacity(p.min(n));
    let mut coeff = Matrix::zeros(n.max(p), p);
    for k in 0..p {
        let xk = x.col(k);
        let orig_norm = norm2(&xk);
        // two orthogonalization passes keep Q orthonormal to machine precision
        let mut v = xk;
        for _ in 0..2 {
            for (i, qi) in q_cols.iter().enumerate() {
                let c = dot(qi, &v);
                coeff.set(i, k, coeff.get(i, k) + c);
                for (vj, qj) in v.iter_mut().zip(qi) {
                    *vj -= c * qj;
                }
            }
        }
        if q_cols.len() < n {
            let slot = q_cols.len();
            let nk = norm2(&v);
            if nk > 1e-10 * f64::max(1.0, orig_norm) {
                coeff.set(slot, k, nk);
                q_cols.push(v.iter().map(|t| t / nk).collect());
            } else {
                // dependent column: flag with a zero diagonal and fill the slot
                coeff.set(slot, k, 0.0);
                q_cols.push(complete_basis_vector(n, &q_cols));
            }
        }
    }
    match mode {
        QrMode::Reduced => {
            let mut r = Matrix::zeros(p, p);
            for i in 0..p {
                for j in 0..p {
                    r.set(i, j, coeff.get(i, j));
                }
            }
            Ok(QrFactors {
                q: columns_to_matrix(n, &q_cols),
                r,
                mode,
                algorithm: QrAlgorithm::GramSchmidt,
            })
        }
        QrMode::Full => {
            while q_cols.len() < n {
                q_cols.push(complete_basis_vector(n, &q_cols));
            }
            let mut r_full = Matrix::zeros(n, p);
            for i in 0..n.min(coeff.rows) {
                for j in 0..p {
                    r_full.set(i, j, coeff.get(i, j));
                }
            }
            Ok(QrFactors {
                q: columns_to_matrix(n, &q_cols),
                r: r_full,
                mode,
                algorithm: QrAlgorithm::GramSchmidt,
            })
        }
    }
}

/// Householder QR (always full). The reflector maps each subcolumn to
/// `r e_1` with `r = -sign(x_1) ||x||`, the cancellation-free sign choice.
pub fn qr_householder(x: &Matrix) -> Result<QrFactors> {
    let (n, p) = (x.rows, x.cols);
    let mut r = x.clone();
    let mut q = Matrix::identity(n);
    let steps = p.min(n.saturating_sub(1));
    for k in 0..steps {
        // u = subcolumn - r1 e1, normalized
        let mut u = vec![0.0; n - k];
        for i in k..n {
            u[i - k] = r.get(i, k);
        }
        let norm_x = norm2(&u);
        if norm_x == 0.0 {
            continue;
        }
        let sign = if u[0] >= 0.0 { 1.0 } else { -1.0 };
        u[0] += sign * norm_x; // x - (-sign ||x||) e1
        let norm_u = norm2(&u);
        if norm_u == 0.0 {
            continue;
        }
        for t in u.iter_mut() {
            *t /= norm_u;
        }
        // R <- H R on rows k..n
        for j in k..p {
            let mut c = 0.0;
            for i in 0..n - k {
                c += u[i] * r.get(k + i, j);
            }
            c *= 2.0;
            for i in 0..n - k {
                r.set(k + i, j, r.get(k + i, j) - c * u[i]);
            }
        }
        // Q <- Q H on columns k..n
        for row in 0..n {
            let mut c = 0.0;
            for i in 0..n - k {
                c += q.get(row, k + i) * u[i];
            }
            c *= 2.0;
            for i in 0..n - k {
                q.set(row, k + i, q.get(row, k + i) - c * u[i]);
            }
        }
    }
    // exact zeros below the diagonal
    for j in 0..p {
        for i in (j + 1)..n {
            r.set(i, j, 0.0);
        }
    }
    Ok(QrFactors {
        q,
        r,
        mode: QrMode::Full,
        algorithm: QrAlgorithm::Householder,
    })
}

/// Rotation coefficients `(c, s)` sending `(a, b)` to `(hypot(a, b), 0)`.
pub fn givens_coefficients(a: f64, b: f64) -> (f64, f64) {
    let r = a.hypot(b);
    if r == 0.0 {
        (1.0, 0.0)
    } else {
        (a / r, b / r)
    }
}

/// Givens QR (always full). Zeros are introduced column by column, pairing
/// the pivot row with each row below it in turn.
pub fn qr_givens(x: &Matrix) -> Result<QrFactors> {
    let (n, p) = (x.rows, x.cols);
    let mut r = x.clone();
    let mut q = Matrix::identity(n);
    for k in 0..p.min(n) {
        for l in (k + 1)..n {
            let b = r.get(l, k);
            if b == 0.0 {
                continue;
            }
            let a = r.get(k, k);
            let (c, s) = givens_coefficients(a, b);
            // rows k, l of R
            for j in k..p {
                let rk = r.get(k, j);
                let rl = r.get(l, j);
                r.set(k, j, c * rk + s * rl);
                r.set(l, j, -s * rk + c * rl);
            }
            r.set(l, k, 0.0);
            // Q <- Q G^T: columns k, l of Q
            for row in 0..n {
                let qk = q.get(row, k);
                let ql = q.get(row, l);
                q.set(row, k, c * qk + s * ql);
                q.set(row, l, -s * qk + c * ql);
            }
        }
    }
    for j in 0..p {
        for i in (j + 1)..n {
            r.set(i, j, 0.0);
        }
    }
    Ok(QrFactors {
        q,
        r,
        mode: QrMode::Full,
        algorithm: QrAlgorithm::Givens,
    })
}

/// LQ decomposition via QR of the transpose: `X = L Q` with
/// `L = qr(X^T).r^T` and `Q = qr(X^T).q^T`.
pub fn lq(x: &Matrix, mode: QrMode) -> Result<LqFactors> {
    let qr = qr_gram_schmidt(&x.transpose(), mode)?;
    Ok(LqFactors {
        l: qr.r.transpose(),
        q: qr.q.transpose(),
        mode,
    })
}
