//! Least-squares solvers (normal equation, QR, UTV, SVD routes), orthogonal
//! and generalized projections, the Moore-Penrose pseudo-inverse, GLS/WLS,
//! and ridge regression.

use serde::Serialize;

use crate::decomp::{
    cr, qr_householder, spectral_symmetric, svd, urv, SpectralFactors, SvdMode, UtvVariant,
};
use crate::error::{Error, Result};
use crate::matrix::{
    dot, rank, solve_triangular, sub_vec, Matrix, TriangularShape,
};

/// Which algebraic route produced a fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FitMethod {
    Normal,
    Qr,
    Utv,
    Svd,
}

/// A least-squares fit: estimator, fitted values, residuals, and the error
/// bookkeeping every later inference step consumes.
#[derive(Clone, Debug, Serialize)]
pub struct LsFit {
    pub beta_hat: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sse: f64,
    /// Residual degrees of freedom, `n - rank`.
    pub dof: usize,
    pub rank: usize,
    pub method: FitMethod,
}

impl LsFit {
    fn from_beta(
        x: &Matrix,
        y: &[f64],
        beta: Vec<f64>,
        rank: usize,
        method: FitMethod,
    ) -> Result<LsFit> {
        let fitted = x.matvec(&beta)?;
        let residuals = sub_vec(y, &fitted);
        let sse = dot(&residuals, &residuals);
        Ok(LsFit {
            beta_hat: beta,
            fitted,
            residuals,
            sse,
            dof: x.rows - rank,
            rank,
            method,
        })
    }

    pub fn n(&self) -> usize {
        self.fitted.len()
    }
}

fn check_response(x: &Matrix, y: &[f64], op: &'static str) -> Result<()> {
    if y.len() != x.rows {
        return Err(Error::shape(
            op,
            format!("response length {} vs {} rows", y.len(), x.rows),
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(op));
    }
    Ok(())
}

/// Solves the square system `A b = rhs` through a Householder QR of `A`.
pub fn solve_via_qr(a: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let f = qr_householder(a)?;
    let qt_rhs = f.q.tr_matvec(rhs)?;
    solve_triangular(&f.r, &qt_rhs, TriangularShape::Upper)
}

/// Inverse of a square matrix via QR solves against identity columns.
pub fn inv_via_qr(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::shape(
            "inv_via_qr",
            format!("{}x{} is not square", a.rows, a.cols),
        ));
    }
    let n = a.rows;
    let f = qr_householder(a)?;
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let qte = f.q.tr_matvec(&e)?;
        let col = solve_triangular(&f.r, &qte, TriangularShape::Upper)?;
        for i in 0..n {
            inv.set(i, j, col[i]);
        }
    }
    Ok(inv)
}

/// Ordinary least squares through the normal equation
/// `X^T X beta = X^T y`. Rejects rank-deficient designs; those route to
/// [`ols_svd`] or [`ols_utv`].
pub fn ols_normal(x: &Matrix, y: &[f64]) -> Result<LsFit> {
    check_response(x, y, "ols_normal")?;
    let r = rank(x);
    if r < x.cols {
        return Err(Error::RankDeficient {
            rank: r,
            cols: x.cols,
            hint: "use ols_svd or ols_utv for rank-deficient designs",
        });
    }
    let g = x.gram();
    let xty = x.tr_matvec(y)?;
    let beta = solve_via_qr(&g, &xty)?;
    LsFit::from_beta(x, y, beta, x.cols, FitMethod::Normal)
}

/// Least squares via the full QR decomposition: `beta = R_1^{-1} c` with
/// `c` the first `p` entries of `Q^T y`.
pub fn ols_qr(x: &Matrix, y: &[f64]) -> Result<LsFit> {
    check_response(x, y, "ols_qr")?;
    let p = x.cols;
    let f = qr_householder(x)?;
    let max_diag = (0..p.min(f.r.rows)).fold(0.0_f64, |m, i| m.max(f.r.get(i, i).abs()));
    for i in 0..p.min(f.r.rows) {
        if f.r.get(i, i).abs() <= 1e-10 * f64::max(1.0, max_diag) {
            return Err(Error::RankDeficient {
                rank: i,
                cols: p,
                hint: "near-singular triangular pivot; use ols_svd or ols_utv",
            });
        }
    }
    let qty = f.q.tr_matvec(y)?;
    let (_, r1) = f.reduced_parts();
    let beta = solve_triangular(&r1, &qty[..p], TriangularShape::Upper)?;
    LsFit::from_beta(x, y, beta, p, FitMethod::Qr)
}

/// Minimal-norm least squares via the URV decomposition:
/// `beta = V^T [T_11^{-1} c; 0]` with `c` the first `r` entries of `U^T y`.
/// Zeroing the trailing block selects the unique minimizer of smallest
/// 2-norm, so duplicated columns share their weight evenly.
pub fn ols_utv(x: &Matrix, y: &[f64]) -> Result<LsFit> {
    check_response(x, y, "ols_utv")?;
    let f = urv(x)?;
    let r = f.rank;
    let uty = f.u.tr_matvec(y)?;
    let shape = match f.variant {
        UtvVariant::Urv => TriangularShape::Upper,
        UtvVariant::Ulv => TriangularShape::Lower,
    };
    let head = if r > 0 {
        solve_triangular(&f.t11(), &uty[..r], shape)?
    } else {
        Vec::new()
    };
    let mut padded = head;
    padded.resize(x.cols, 0.0);
    let beta = f.v.tr_matvec(&padded)?;
    LsFit::from_beta(x, y, beta, r, FitMethod::Utv)
}

/// Minimal-norm least squares via the SVD:
/// `beta = sum_i (u_i^T y / sigma_i) v_i` over the retained modes, which
/// places the estimator in the row space of `X`.
pub fn ols_svd(x: &Matrix, y: &[f64]) -> Result<LsFit> {
    check_response(x, y, "ols_svd")?;
    let f = svd(x, SvdMode::Reduced)?;
    let mut beta = vec![0.0; x.cols];
    for i in 0..f.rank {
        let c = dot(&f.u.col(i), y) / f.sigma[i];
        for (b, v) in beta.iter_mut().zip(f.v.col(i)) {
            *b += c * v;
        }
    }
    LsFit::from_beta(x, y, beta, f.rank, FitMethod::Svd)
}

/// Metric under which a projector is symmetric.
#[derive(Clone, Debug, Serialize)]
pub enum ProjectorMetric {
    Identity,
    /// Symmetry holds in the inner product `<a, b> = a^T W b` with `W` the
    /// inverse covariance stored here.
    InverseCovariance(Matrix),
}

/// An idempotent projection matrix with its subspace rank.
#[derive(Clone, Debug, Serialize)]
pub struct Projector {
    pub h: Matrix,
    pub subspace_rank: usize,
    pub metric: ProjectorMetric,
}

/// Hat matrix `H = X (X^T X)^{-1} X^T`, the orthogonal projector onto the
/// column space of a full-column-rank design.
pub fn hat_matrix(x: &Matrix) -> Result<Projector> {
    let r = rank(x);
    if r < x.cols {
        return Err(Error::RankDeficient {
            rank: r,
            cols: x.cols,
            hint: "form the projector as X X^+ via pinv for deficient designs",
        });
    }
    let g_inv = inv_via_qr(&x.gram())?;
    let h = x.matmul(&g_inv)?.matmul(&x.transpose())?.symmetrized();
    Ok(Projector {
        h,
        subspace_rank: x.cols,
        metric: ProjectorMetric::Identity,
    })
}

/// Moore-Penrose pseudo-inverse with its four defining residuals
/// `||X X+ X - X||_F`, `||X+ X X+ - X+||_F`, `||(X X+)^T - X X+||_F`,
/// `||(X+ X)^T - X+ X||_F`.
#[derive(Clone, Debug, Serialize)]
pub struct PseudoInverse {
    pub x_plus: Matrix,
    pub penrose_residuals: [f64; 4],
}

/// Pseudo-inverse via the SVD: `X^+ = V Sigma^+ U^T`.
pub fn pinv(x: &Matrix) -> Result<PseudoInverse> {
    let f = svd(x, SvdMode::Reduced)?;
    let mut x_plus = Matrix::zeros(x.cols, x.rows);
    for k in 0..f.rank {
        let inv_s = 1.0 / f.sigma[k];
        let u = f.u.col(k);
        let v = f.v.col(k);
        for i in 0..x.cols {
            for j in 0..x.rows {
                x_plus.set(i, j, x_plus.get(i, j) + inv_s * v[i] * u[j]);
            }
        }
    }
    let penrose_residuals = penrose_residuals(x, &x_plus)?;
    Ok(PseudoInverse {
        x_plus,
        penrose_residuals,
    })
}

/// Pseudo-inverse via the CR decomposition:
/// `X^+ = R^T (R R^T)^{-1} (C^T C)^{-1} C^T`.
pub fn pinv_cr(x: &Matrix) -> Result<Matrix> {
    let f = cr(x)?;
    if f.rank == 0 {
        return Ok(Matrix::zeros(x.cols, x.rows));
    }
    let rrt = f.r_factor.matmul(&f.r_factor.transpose())?;
    let ctc = f.c.gram();
    let rrt_inv = inv_via_qr(&rrt)?;
    let ctc_inv = inv_via_qr(&ctc)?;
    f.r_factor
        .transpose()
        .matmul(&rrt_inv)?
        .matmul(&ctc_inv)?
        .matmul(&f.c.transpose())
}

/// The four Penrose condition residuals for a candidate pseudo-inverse.
pub fn penrose_residuals(x: &Matrix, x_plus: &Matrix) -> Result<[f64; 4]> {
    let xxp = x.matmul(x_plus)?; // n x n
    let pxp = x_plus.matmul(x)?; // p x p
    let c1 = xxp.matmul(x)?.sub(x)?.frobenius_norm();
    let c2 = pxp.matmul(x_plus)?.sub(x_plus)?.frobenius_norm();
    let c3 = xxp.transpose().sub(&xxp)?.frobenius_norm();
    let c4 = pxp.transpose().sub(&pxp)?.frobenius_norm();
    Ok([c1, c2, c3, c4])
}

/// Spectral decomposition of a symmetric positive definite matrix, with the
/// definiteness check `min lambda > 1e-10 max lambda`.
pub fn spectral_pd(sigma: &Matrix) -> Result<SpectralFactors> {
    let spec = spectral_symmetric(sigma)?;
    let max = spec.lambda.first().copied().unwrap_or(0.0);
    let min = spec.lambda.last().copied().unwrap_or(0.0);
    if !(max > 0.0) || min <= 1e-10 * max {
        return Err(Error::NotPositiveDefinite {
            ratio: if max > 0.0 { min / max } else { 0.0 },
        });
    }
    Ok(spec)
}

/// A generalized least-squares fit: the whitened-space [`LsFit`] plus the
/// maximum-likelihood noise scale
/// `sigma2 = (y - X beta)^T Sigma^{-1} (y - X beta) / n`.
#[derive(Clone, Debug, Serialize)]
pub struct GlsFit {
    pub fit: LsFit,
    pub sigma2_mle: f64,
}

impl GlsFit {
    pub fn beta_hat(&self) -> &[f64] {
        &self.fit.beta_hat
    }
}

/// Generalized least squares for noise covariance `sigma^2 Sigma`: whitens
/// with the symmetric square root `Sigma^{-1/2}` and solves the ordinary
/// problem by QR. The returned fit lives in the whitened space, so its
/// residual-orthogonality invariants hold verbatim.
pub fn gls(x: &Matrix, y: &[f64], sigma: &Matrix) -> Result<GlsFit> {
    check_response(x, y, "gls")?;
    if sigma.rows != x.rows {
        return Err(Error::shape(
            "gls",
            format!(
                "covariance is {}x{} for {} rows",
                sigma.rows, sigma.cols, x.rows
            ),
        ));
    }
    let spec = spectral_pd(sigma)?;
    let whitener = spec.reassemble(|l| 1.0 / l.sqrt());
    let xw = whitener.matmul(x)?;
    let yw = whitener.matvec(y)?;
    let fit = ols_qr(&xw, &yw)?;
    let sigma2_mle = fit.sse / x.rows as f64;
    Ok(GlsFit { fit, sigma2_mle })
}

/// Generalized projector `H_2 = X (X^T Sigma^{-1} X)^{-1} X^T Sigma^{-1}`,
/// idempotent and symmetric in the `Sigma^{-1}` inner product.
pub fn generalized_projector(x: &Matrix, sigma: &Matrix) -> Result<Projector> {
    let r = rank(x);
    if r < x.cols {
        return Err(Error::RankDeficient {
            rank: r,
            cols: x.cols,
            hint: "generalized projector needs a full-column-rank design",
        });
    }
    let spec = spectral_pd(sigma)?;
    let sigma_inv = spec.reassemble(|l| 1.0 / l);
    let xt_si = x.transpose().matmul(&sigma_inv)?;
    let core = inv_via_qr(&xt_si.matmul(x)?.symmetrized())?;
    let h = x.matmul(&core)?.matmul(&xt_si)?;
    Ok(Projector {
        h,
        subspace_rank: x.cols,
        metric: ProjectorMetric::InverseCovariance(sigma_inv),
    })
}

/// Ridge estimator `(X^T X + lambda I)^{-1} X^T y`, defined for any rank.
pub fn ridge(x: &Matrix, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_response(x, y, "ridge")?;
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!(
            "ridge penalty {lambda} must be > 0"
        )));
    }
    let mut g = x.gram();
    for i in 0..g.rows {
        g.set(i, i, g.get(i, i) + lambda);
    }
    solve_via_qr(&g, &x.tr_matvec(y)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{norm2, norm_inf};
    use crate::rng::RngStream;

    fn random(n: usize, p: usize, rng: &mut RngStream) -> Matrix {
        Matrix::new(n, p, rng.normal_vec(n * p)).unwrap()
    }

    fn vec_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{x} vs {y} (tol {tol})");
        }
    }

    #[test]
    fn identity_design_reproduces_response() {
        let y = vec![2.0, -1.0, 0.5];
        let fit = ols_normal(&Matrix::identity(3), &y).unwrap();
        vec_close(&fit.beta_hat, &y, 1e-14);
        assert!(fit.sse <= 1e-28);
        assert_eq!(fit.dof, 0);
    }

    #[test]
    fn left_multiplied_system_example() {
        // X beta = y has no solution; A X beta = A y has the exact solution
        // [1/2, -1/2], which is not the least-squares minimizer.
        let x = Matrix::from_rows(&[vec![-3.0, -4.0], vec![4.0, 6.0], vec![1.0, 1.0]]);
        let y = vec![1.0, -1.0, 0.0];
        let a = Matrix::from_rows(&[vec![0.0, -1.0, 6.0], vec![0.0, 1.0, -4.0]]);
        let transformed = vec![0.5, -0.5];
        let ax = a.matmul(&x).unwrap();
        let ay = a.matvec(&y).unwrap();
        let resid_transformed = sub_vec(&ax.matvec(&transformed).unwrap(), &ay);
        assert!(norm_inf(&resid_transformed) <= 1e-12);

        // the normal-equation residual of the LS solution vanishes
        let fit = ols_normal(&x, &y).unwrap();
        let g = x.gram();
        let lhs = g.matvec(&fit.beta_hat).unwrap();
        let rhs = x.tr_matvec(&y).unwrap();
        assert!(norm2(&sub_vec(&lhs, &rhs)) <= 1e-10);
        // and it differs from the transformed-system solution
        assert!(norm2(&sub_vec(&fit.beta_hat, &transformed)) > 1e-3);
    }

    #[test]
    fn ols_normal_matches_grid_refinement_and_other_routes() {
        let mut rng = RngStream::new(61);
        let x = random(40, 5, &mut rng);
        let beta_true = rng.normal_vec(5);
        let noise = rng.normal_vec(40);
        let y: Vec<f64> = x
            .matvec(&beta_true)
            .unwrap()
            .iter()
            .zip(&noise)
            .map(|(m, e)| m + 0.3 * e)
            .collect();
        let fit = ols_normal(&x, &y).unwrap();

        // coordinate-descent grid refinement of ||y - X beta||^2
        let oracle = coordinate_descent_oracle(&x, &y, 5);
        vec_close(&fit.beta_hat, &oracle, 1e-4);

        let qr = ols_qr(&x, &y).unwrap();
        let sv = ols_svd(&x, &y).unwrap();
        let scale = 1.0 + norm2(&fit.beta_hat);
        assert!(norm2(&sub_vec(&fit.beta_hat, &qr.beta_hat)) <= 1e-9 * scale);
        assert!(norm2(&sub_vec(&fit.beta_hat, &sv.beta_hat)) <= 1e-9 * scale);
    }

    /// Cyclic coordinate descent with shrinking step size; slow but
    /// independent of any factorization.
    fn coordinate_descent_oracle(x: &Matrix, y: &[f64], p: usize) -> Vec<f64> {
        let mut beta = vec![0.0; p];
        let mut step = 1.0;
        let sse = |b: &[f64]| {
            let r = sub_vec(y, &x.matvec(b).unwrap());
            dot(&r, &r)
        };
        let mut best = sse(&beta);
        while step > 1e-7 {
            let mut improved = false;
            for j in 0..p {
                for dir in [-1.0, 1.0] {
                    loop {
                        beta[j] += dir * step;
                        let v = sse(&beta);
                        if v < best {
                            best = v;
                            improved = true;
                        } else {
                            beta[j] -= dir * step;
                            break;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        beta
    }

    #[test]
    fn ols_normal_rejects_rank_deficiency() {
        let mut rng = RngStream::new(62);
        let base = random(6, 2, &mut rng);
        let x = base.hcat(&base.take_cols(&[0])).unwrap(); // duplicated column
        assert!(matches!(
            ols_normal(&x, &rng.normal_vec(6)),
            Err(Error::RankDeficient { .. })
        ));
        assert!(matches!(
            ols_qr(&x, &rng.normal_vec(6)),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn ols_qr_orthonormal_design_and_loss_split() {
        let mut rng = RngStream::new(63);
        let x = crate::decomp::qr_gram_schmidt(
            &random(8, 3, &mut rng),
            crate::decomp::QrMode::Reduced,
        )
        .unwrap()
        .q;
        let y = rng.normal_vec(8);
        let fit = ols_qr(&x, &y).unwrap();
        vec_close(&fit.beta_hat, &x.tr_matvec(&y).unwrap(), 1e-12);

        // loss split: ||X beta - y||^2 = ||d||^2, d = trailing entries of Q^T y
        let full = qr_householder(&x).unwrap();
        let qty = full.q.tr_matvec(&y).unwrap();
        let d2: f64 = qty[3..].iter().map(|v| v * v).sum();
        assert!((fit.sse - d2).abs() <= 1e-9 * f64::max(1.0, d2));
    }

    #[test]
    fn ols_qr_agrees_with_normal_on_random_instances() {
        let mut rng = RngStream::new(64);
        for _ in 0..100 {
            let n = 6 + rng.below(10);
            let p = 1 + rng.below(4.min(n - 1));
            let x = random(n, p, &mut rng);
            let y = rng.normal_vec(n);
            let a = ols_normal(&x, &y).unwrap();
            let b = ols_qr(&x, &y).unwrap();
            let scale = 1.0 + norm2(&a.beta_hat);
            assert!(norm2(&sub_vec(&a.beta_hat, &b.beta_hat)) <= 1e-9 * scale);
        }
    }

    #[test]
    fn residuals_are_orthogonal_to_columns_and_pythagorean() {
        let mut rng = RngStream::new(65);
        let x = random(12, 4, &mut rng);
        let y = rng.normal_vec(12);
        let fit = ols_qr(&x, &y).unwrap();
        let xte = x.tr_matvec(&fit.residuals).unwrap();
        assert!(norm_inf(&xte) <= 1e-8 * x.frobenius_norm() * norm2(&y));
        // ||y||^2 = ||y_hat||^2 + ||e||^2
        let y2 = dot(&y, &y);
        let split = dot(&fit.fitted, &fit.fitted) + fit.sse;
        assert!((y2 - split).abs() <= 1e-9 * y2);
        assert!(dot(&fit.fitted, &fit.residuals).abs() <= 1e-9 * y2);
    }

    #[test]
    fn utv_duplicated_column_splits_weight_evenly() {
        let mut rng = RngStream::new(66);
        let base = random(10, 3, &mut rng);
        let x = base.hcat(&base.take_cols(&[2])).unwrap();
        let y = rng.normal_vec(10);
        let fit = ols_utv(&x, &y).unwrap();
        assert_eq!(fit.rank, 3);
        // minimal-norm solution puts equal weight on the duplicates
        assert!((fit.beta_hat[2] - fit.beta_hat[3]).abs() <= 1e-9);
        // agrees with the SVD route
        let sv = ols_svd(&x, &y).unwrap();
        assert!(
            norm2(&sub_vec(&fit.beta_hat, &sv.beta_hat)) <= 1e-8 * (1.0 + norm2(&sv.beta_hat))
        );
    }

    #[test]
    fn utv_equals_qr_on_full_rank() {
        let mut rng = RngStream::new(67);
        let x = random(9, 4, &mut rng);
        let y = rng.normal_vec(9);
        let a = ols_utv(&x, &y).unwrap();
        let b = ols_qr(&x, &y).unwrap();
        assert!(norm2(&sub_vec(&a.beta_hat, &b.beta_hat)) <= 1e-9 * (1.0 + norm2(&b.beta_hat)));
    }

    #[test]
    fn svd_route_kills_left_nullspace_response() {
        let mut rng = RngStream::new(68);
        // rank-1 X = sigma u v^T; y = u maps to v / sigma, y in null(X^T) maps to 0
        let u_raw = rng.normal_vec(5);
        let nu = norm2(&u_raw);
        let u: Vec<f64> = u_raw.iter().map(|t| t / nu).collect();
        let v_raw = rng.normal_vec(3);
        let nv = norm2(&v_raw);
        let v: Vec<f64> = v_raw.iter().map(|t| t / nv).collect();
        let sigma = 2.5;
        let mut x = Matrix::zeros(5, 3);
        for i in 0..5 {
            for j in 0..3 {
                x.set(i, j, sigma * u[i] * v[j]);
            }
        }
        let fit = ols_svd(&x, &u).unwrap();
        let expect: Vec<f64> = v.iter().map(|t| t / sigma).collect();
        let diff: Vec<f64> = sub_vec(&fit.beta_hat, &expect);
        assert!(norm2(&diff) <= 1e-9, "beta = v / sigma");

        // y orthogonal to u: estimator is zero
        let mut w = rng.normal_vec(5);
        let c = dot(&w, &u);
        for (wi, ui) in w.iter_mut().zip(&u) {
            *wi -= c * ui;
        }
        let fit0 = ols_svd(&x, &w).unwrap();
        assert!(norm2(&fit0.beta_hat) <= 1e-9 * norm2(&w));
    }

    #[test]
    fn svd_estimator_lies_in_row_space() {
        let mut rng = RngStream::new(69);
        // rank-2 6x4
        let mut x = Matrix::zeros(6, 4);
        for _ in 0..2 {
            let a = rng.normal_vec(6);
            let b = rng.normal_vec(4);
            for i in 0..6 {
                for j in 0..4 {
                    x.set(i, j, x.get(i, j) + a[i] * b[j]);
                }
            }
        }
        let y = rng.normal_vec(6);
        let fit = ols_svd(&x, &y).unwrap();
        let f = svd(&x, SvdMode::Full).unwrap();
        // projection onto the null-space basis vanishes
        let mut null_mass = 0.0;
        for i in f.rank..4 {
            null_mass += dot(&f.v.col(i), &fit.beta_hat).powi(2);
        }
        assert!(null_mass.sqrt() <= 1e-9 * f64::max(1e-30, norm2(&fit.beta_hat)));
    }

    #[test]
    fn hat_matrix_basics() {
        // X = first p columns of I: H = diag(1,...,1,0,...,0)
        let x = Matrix::identity(5).take_cols(&[0, 1]);
        let h = hat_matrix(&x).unwrap();
        let expect = Matrix::diag(&[1.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(h.h.sub(&expect).unwrap().frobenius_norm() <= 1e-12);

        let mut rng = RngStream::new(70);
        let x = random(10, 4, &mut rng);
        let proj = hat_matrix(&x).unwrap();
        // trace = p, idempotent, symmetric
        assert!((proj.h.trace().unwrap() - 4.0).abs() <= 1e-8);
        let h2 = proj.h.matmul(&proj.h).unwrap();
        assert!(h2.sub(&proj.h).unwrap().frobenius_norm() <= 1e-9 * 10.0);
        assert!(proj.h.sub(&proj.h.transpose()).unwrap().frobenius_norm() <= 1e-10);
        // equals Q1 Q1^T from the reduced QR
        let q1 = crate::decomp::qr_gram_schmidt(&x, crate::decomp::QrMode::Reduced)
            .unwrap()
            .q;
        let qqt = q1.matmul(&q1.transpose()).unwrap();
        assert!(proj.h.sub(&qqt).unwrap().frobenius_norm() <= 1e-9);
        // rank-deficient designs are rejected
        let xd = x.hcat(&x.take_cols(&[0])).unwrap();
        assert!(hat_matrix(&xd).is_err());
    }

    #[test]
    fn pinv_of_invertible_matrix_is_inverse() {
        let mut rng = RngStream::new(71);
        let x = random(4, 4, &mut rng);
        let p = pinv(&x).unwrap();
        let prod = p.x_plus.matmul(&x).unwrap();
        assert!(prod.sub(&Matrix::identity(4)).unwrap().frobenius_norm() <= 1e-9);
        for r in p.penrose_residuals {
            assert!(r <= 1e-8 * x.frobenius_norm());
        }
    }

    #[test]
    fn pinv_full_column_rank_closed_form_and_cr_route() {
        let mut rng = RngStream::new(72);
        let x = random(7, 3, &mut rng);
        let p = pinv(&x).unwrap();
        // left pseudo-inverse (X^T X)^{-1} X^T
        let closed = inv_via_qr(&x.gram())
            .unwrap()
            .matmul(&x.transpose())
            .unwrap();
        assert!(p.x_plus.sub(&closed).unwrap().frobenius_norm() <= 1e-9);
        // CR route agrees (uniqueness)
        let via_cr = pinv_cr(&x).unwrap();
        assert!(p.x_plus.sub(&via_cr).unwrap().frobenius_norm() <= 1e-8);
    }

    #[test]
    fn pinv_projects_onto_column_and_row_spaces() {
        let mut rng = RngStream::new(73);
        let mut x = Matrix::zeros(6, 4);
        for _ in 0..2 {
            let a = rng.normal_vec(6);
            let b = rng.normal_vec(4);
            for i in 0..6 {
                for j in 0..4 {
                    x.set(i, j, x.get(i, j) + a[i] * b[j]);
                }
            }
        }
        let p = pinv(&x).unwrap();
        for r in p.penrose_residuals {
            assert!(r <= 1e-8 * x.frobenius_norm());
        }
        let xxp = x.matmul(&p.x_plus).unwrap();
        let pxx = p.x_plus.matmul(&x).unwrap();
        for m in [&xxp, &pxx] {
            let idem = m.matmul(m).unwrap().sub(m).unwrap().frobenius_norm();
            let sym = m.sub(&m.transpose()).unwrap().frobenius_norm();
            assert!(idem <= 1e-8);
            assert!(sym <= 1e-8);
        }
        let via_cr = pinv_cr(&x).unwrap();
        assert!(
            p.x_plus.sub(&via_cr).unwrap().frobenius_norm()
                <= 1e-8 * f64::max(1.0, p.x_plus.frobenius_norm())
        );
    }

    #[test]
    fn gls_with_identity_covariance_is_ols() {
        let mut rng = RngStream::new(74);
        let x = random(9, 3, &mut rng);
        let y = rng.normal_vec(9);
        let g = gls(&x, &y, &Matrix::identity(9)).unwrap();
        let o = ols_qr(&x, &y).unwrap();
        assert!(norm2(&sub_vec(g.beta_hat(), &o.beta_hat)) <= 1e-10 * (1.0 + norm2(&o.beta_hat)));
        assert!((g.sigma2_mle - o.sse / 9.0).abs() <= 1e-12 * (1.0 + o.sse));
    }

    #[test]
    fn wls_diagonal_covariance_matches_explicit_weighting() {
        let mut rng = RngStream::new(75);
        let x = random(8, 2, &mut rng);
        let y = rng.normal_vec(8);
        let weights: Vec<f64> = (0..8).map(|i| 0.5 + 0.25 * i as f64).collect();
        let sigma = Matrix::diag(&weights);
        let g = gls(&x, &y, &sigma).unwrap();
        // explicit closed form (X^T S^{-1} X)^{-1} X^T S^{-1} y
        let si = Matrix::diag(&weights.iter().map(|w| 1.0 / w).collect::<Vec<_>>());
        let xtsi = x.transpose().matmul(&si).unwrap();
        let beta = solve_via_qr(&xtsi.matmul(&x).unwrap(), &xtsi.matvec(&y).unwrap()).unwrap();
        assert!(norm2(&sub_vec(g.beta_hat(), &beta)) <= 1e-9 * (1.0 + norm2(&beta)));
    }

    #[test]
    fn gls_equals_ols_when_sigma_preserves_column_space() {
        let mut rng = RngStream::new(76);
        let x = random(8, 3, &mut rng);
        let full = qr_householder(&x).unwrap();
        // Sigma = Q1 D Q1^T + Q2 Q2^T preserves C(X)
        let q1 = full.q.take_cols(&[0, 1, 2]);
        let q2 = full.q.take_cols(&[3, 4, 5, 6, 7]);
        let d = Matrix::diag(&[2.0, 0.5, 1.5]);
        let sigma = q1
            .matmul(&d)
            .unwrap()
            .matmul(&q1.transpose())
            .unwrap()
            .add(&q2.matmul(&q2.transpose()).unwrap())
            .unwrap()
            .symmetrized();
        let y = rng.normal_vec(8);
        let g = gls(&x, &y, &sigma).unwrap();
        let o = ols_qr(&x, &y).unwrap();
        assert!(norm2(&sub_vec(g.beta_hat(), &o.beta_hat)) <= 1e-8 * (1.0 + norm2(&o.beta_hat)));
    }

    #[test]
    fn gls_rejects_indefinite_covariance() {
        let x = Matrix::from_rows(&[vec![1.0], vec![1.0]]);
        let sigma = Matrix::diag(&[1.0, -1.0]);
        assert!(matches!(
            gls(&x, &[1.0, 2.0], &sigma),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn generalized_projector_identities() {
        let mut rng = RngStream::new(77);
        let x = random(7, 2, &mut rng);
        // Sigma = I reduces to the hat matrix
        let p_id = generalized_projector(&x, &Matrix::identity(7)).unwrap();
        let h = hat_matrix(&x).unwrap();
        assert!(p_id.h.sub(&h.h).unwrap().frobenius_norm() <= 1e-9);

        // random PD Sigma
        let b = random(7, 7, &mut rng);
        let sigma = b
            .gram()
            .add(&Matrix::identity(7).scale(0.5))
            .unwrap()
            .symmetrized();
        let proj = generalized_projector(&x, &sigma).unwrap();
        let h2 = &proj.h;
        // idempotent, trace p
        let idem = h2.matmul(h2).unwrap().sub(h2).unwrap().frobenius_norm();
        assert!(idem <= 1e-9 * 7.0);
        assert!((h2.trace().unwrap() - 2.0).abs() <= 1e-8);
        // Sigma^{-1}-symmetric
        let si = match &proj.metric {
            ProjectorMetric::InverseCovariance(m) => m.clone(),
            _ => unreachable!(),
        };
        let lhs = si.matmul(h2).unwrap();
        let rhs = h2.transpose().matmul(&si).unwrap();
        assert!(
            lhs.sub(&rhs).unwrap().frobenius_norm() <= 1e-9 * f64::max(1.0, lhs.frobenius_norm())
        );

        // generalized Pythagoras and minimal generalized distance
        let y = rng.normal_vec(7);
        let norm_w = |v: &[f64]| dot(v, &si.matvec(v).unwrap());
        let hy = h2.matvec(&y).unwrap();
        let ry = sub_vec(&y, &hy);
        let total = norm_w(&y);
        assert!((total - (norm_w(&hy) + norm_w(&ry))).abs() <= 1e-9 * total.abs());
        let d0 = norm_w(&ry);
        for _ in 0..100 {
            let v = x.matvec(&rng.normal_vec(2)).unwrap();
            assert!(d0 <= norm_w(&sub_vec(&y, &v)) + 1e-12);
        }
    }

    #[test]
    fn ridge_shrinkage_and_limits() {
        let mut rng = RngStream::new(78);
        // identity design: beta = y / (1 + lambda)
        let y = rng.normal_vec(4);
        let beta = ridge(&Matrix::identity(4), &y, 0.5).unwrap();
        for (b, yi) in beta.iter().zip(&y) {
            assert!((b - yi / 1.5).abs() <= 1e-12);
        }
        // lambda -> 0+ approaches OLS on a full-rank design
        let x = random(10, 3, &mut rng);
        let y = rng.normal_vec(10);
        let near = ridge(&x, &y, 1e-12).unwrap();
        let o = ols_qr(&x, &y).unwrap();
        assert!(norm2(&sub_vec(&near, &o.beta_hat)) <= 1e-6 * (1.0 + norm2(&o.beta_hat)));
        // invalid penalty
        assert!(ridge(&x, &y, 0.0).is_err());
        assert!(ridge(&x, &y, -1.0).is_err());
    }

    #[test]
    fn projector_properties_nested_unique_psd_gauss_markov() {
        let mut rng = RngStream::new(79);
        let x = random(9, 4, &mut rng);
        let h = hat_matrix(&x).unwrap().h;
        let x1 = x.take_cols(&[0, 1]);
        let h1 = hat_matrix(&x1).unwrap().h;
        // nested projections: H H1 = H1 and H - H1 idempotent symmetric
        let hh1 = h.matmul(&h1).unwrap();
        assert!(hh1.sub(&h1).unwrap().frobenius_norm() <= 1e-9);
        let diff = h.sub(&h1).unwrap();
        let idem = diff
            .matmul(&diff)
            .unwrap()
            .sub(&diff)
            .unwrap()
            .frobenius_norm();
        assert!(idem <= 1e-9);
        assert!(diff.sub(&diff.transpose()).unwrap().frobenius_norm() <= 1e-9);
        // H (I - H) = 0
        let n = 9;
        let complement = Matrix::identity(n).sub(&h).unwrap();
        assert!(h.matmul(&complement).unwrap().frobenius_norm() <= 1e-9);
        // projector PSD: v^T H v >= 0
        for _ in 0..50 {
            let v = rng.normal_vec(n);
            let quad = dot(&v, &h.matvec(&v).unwrap());
            assert!(quad >= -1e-10 * dot(&v, &v));
        }
        // same column space, same projector: hat(X M) = hat(X)
        let m = random(4, 4, &mut rng);
        let xm = x.matmul(&m).unwrap();
        let hm = hat_matrix(&xm).unwrap().h;
        assert!(hm.sub(&h).unwrap().frobenius_norm() <= 1e-9);
        // Gauss-Markov: Q (sigma^2 I) Q^T - sigma^2 (X^T X)^{-1} is PSD for Q X = I
        let sigma2 = 1.7;
        let g_inv = inv_via_qr(&x.gram()).unwrap();
        let pinv_x = g_inv.matmul(&x.transpose()).unwrap();
        // Q = X^+ + Z (I - X X^+) satisfies Q X = I for any Z
        let z = random(4, 9, &mut rng);
        let xxp = x.matmul(&pinv_x).unwrap();
        let annihilator = Matrix::identity(9).sub(&xxp).unwrap();
        let q = pinv_x.add(&z.matmul(&annihilator).unwrap()).unwrap();
        let qx = q.matmul(&x).unwrap();
        assert!(qx.sub(&Matrix::identity(4)).unwrap().frobenius_norm() <= 1e-8);
        let gap = q
            .matmul(&q.transpose())
            .unwrap()
            .scale(sigma2)
            .sub(&g_inv.scale(sigma2))
            .unwrap()
            .symmetrized();
        let spec = spectral_symmetric(&gap).unwrap();
        assert!(spec.lambda.last().unwrap() >= &(-1e-8 * sigma2));
    }
}
