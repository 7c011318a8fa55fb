//! Symmetric eigendecomposition by cyclic Jacobi sweeps.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MAX_SWEEPS: usize = 50;

/// `A = Q diag(lambda) Q^T` with orthonormal eigenvector columns and
/// eigenvalues sorted in descending order.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralFactors {
    pub q: Matrix,
    pub lambda: Vec<f64>,
}

impl SpectralFactors {
    /// Reassembles `Q diag(f(lambda)) Q^T`; used for matrix square roots
    /// and inverses of symmetric positive definite matrices.
    pub fn reassemble(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.q.rows;
        let mut out = Matrix::zeros(n, n);
        for k in 0..self.lambda.len() {
            let fk = f(self.lambda[k]);
            if fk == 0.0 {
                continue;
            }
            for i in 0..n {
                let qik = self.q.get(i, k);
                if qik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.set(i, j, out.get(i, j) + fk * qik * self.q.get(j, k));
                }
            }
        }
        out.symmetrized()
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Converges when the off-diagonal Frobenius mass drops below
/// `1e-12 * ||A||_F`; asymmetric input is rejected.
pub fn spectral_symmetric(a: &Matrix) -> Result<SpectralFactors> {
    if !a.is_square() {
        return Err(Error::shape(
            "spectral_symmetric",
            format!("{}x{} is not square", a.rows, a.cols),
        ));
    }
    let norm = a.frobenius_norm();
    let asym = a.sub(&a.transpose())?.frobenius_norm();
    if asym > 1e-10 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::invalid(format!(
            "matrix is not symmetric: ||A - A^T||_F = {asym:e}"
        )));
    }
    let n = a.rows;
    let mut work = a.symmetrized();
    let mut q = Matrix::identity(n);
    if n > 1 && norm > 0.0 {
        let target = 1e-12 * norm;
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += 2.0 * work.get(i, j) * work.get(i, j);
                }
            }
            if off.sqrt() <= target {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for r in (p + 1)..n {
                    let apr = work.get(p, r);
                    if apr == 0.0 {
                        continue;
                    }
                    let theta = 0.5 * (work.get(r, r) - work.get(p, p)) / apr;
                    let t = if theta.abs() > 1e12 {
                        0.5 / theta
                    } else {
                        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                        sign / (theta.abs() + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    rotate(&mut work, p, r, c, s);
                    // accumulate eigenvectors: Q <- Q J
                    for row in 0..n {
                        let qp = q.get(row, p);
                        let qr = q.get(row, r);
                        q.set(row, p, c * qp - s * qr);
                        q.set(row, r, s * qp + c * qr);
                    }
                }
            }
        }
        if !converged {
            // final check after the last sweep
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += 2.0 * work.get(i, j) * work.get(i, j);
                }
            }
            if off.sqrt() > target {
                return Err(Error::NoConvergence("jacobi eigendecomposition"));
            }
        }
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (work.get(i, i), i)).collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite eigenvalues"));
    let mut lambda = Vec::with_capacity(n);
    let mut q_sorted = Matrix::zeros(n, n);
    for (dst, &(lam, src)) in pairs.iter().enumerate() {
        lambda.push(lam);
        // sign convention: largest-magnitude entry positive
        let mut best = 0;
        for i in 1..n {
            if q.get(i, src).abs() > q.get(best, src).abs() {
                best = i;
            }
        }
        let flip = if q.get(best, src) < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            q_sorted.set(i, dst, flip * q.get(i, src));
        }
    }
    Ok(SpectralFactors { q: q_sorted, lambda })
}

/// Two-sided Jacobi rotation `A <- J^T A J` in the (p, r) plane.
fn rotate(a: &mut Matrix, p: usize, r: usize, c: f64, s: f64) {
    let n = a.rows;
    for j in 0..n {
        let ajp = a.get(j, p);
        let ajr = a.get(j, r);
        a.set(j, p, c * ajp - s * ajr);
        a.set(j, r, s * ajp + c * ajr);
    }
    for j in 0..n {
        let apj = a.get(p, j);
        let arj = a.get(r, j);
        a.set(p, j, c * apj - s * arj);
        a.set(r, j, s * apj + c * arj);
    }
    // enforce exact symmetry on the rotated pair
    let m = 0.5 * (a.get(p, r) + a.get(r, p));
    a.set(p, r, m);
    a.set(r, p, m);
}
