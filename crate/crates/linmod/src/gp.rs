//! Gaussian-process regression: kernels, Gram matrices, posteriors for
//! noise-free, homoskedastic, and per-point noise models, and the
//! weight-space/kernel-form equivalence check.

use serde::Serialize;

use crate::bayes::posterior_zero_mean;
use crate::decomp::spectral_symmetric;
use crate::error::{Error, Result};
use crate::matrix::{dot, sub_vec, Matrix};

/// Covariance functions on row-vector inputs.
#[derive(Clone, Debug, Serialize)]
pub enum Kernel {
    /// `k(x, x') = x^T x'`
    Linear,
    /// `k(x, x') = (eta + gamma x^T x')^degree` with `gamma > 0`, `eta >= 0`
    Polynomial { eta: f64, gamma: f64, degree: u32 },
    /// `k(x, x') = exp(-gamma ||x - x'||^2)` with `gamma > 0`
    Gaussian { gamma: f64 },
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Linear => Ok(()),
            Kernel::Polynomial { eta, gamma, degree } => {
                if eta < 0.0 || !(gamma > 0.0) || degree < 1 {
                    Err(Error::invalid(format!(
                        "polynomial kernel needs eta >= 0, gamma > 0, degree >= 1; got eta={eta}, gamma={gamma}, degree={degree}"
                    )))
                } else {
                    Ok(())
                }
            }
            Kernel::Gaussian { gamma } => {
                if gamma > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("gaussian kernel gamma {gamma} must be > 0")))
                }
            }
        }
    }
}

/// Kernel value for a pair of equal-dimension points.
pub fn kernel_eval(kernel: &Kernel, x: &[f64], x2: &[f64]) -> Result<f64> {
    kernel.validate()?;
    if x.len() != x2.len() {
        return Err(Error::shape(
            "kernel_eval",
            format!("points of dimension {} vs {}", x.len(), x2.len()),
        ));
    }
    Ok(match *kernel {
        Kernel::Linear => dot(x, x2),
        Kernel::Polynomial { eta, gamma, degree } => {
            (eta + gamma * dot(x, x2)).powi(degree as i32)
        }
        Kernel::Gaussian { gamma } => {
            let d = sub_vec(x, x2);
            (-gamma * dot(&d, &d)).exp()
        }
    })
}

/// Gram matrix of a point set (rows of `xs`); symmetric by construction.
pub fn gram(kernel: &Kernel, xs: &Matrix) -> Result<Matrix> {
    kernel.validate()?;
    let n = xs.rows;
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel_eval(kernel, xs.row(i), xs.row(j))?;
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    Ok(k)
}

/// Cross-Gram matrix `K(A, B)` with `A` rows against `B` rows.
pub fn cross_gram(kernel: &Kernel, a: &Matrix, b: &Matrix) -> Result<Matrix> {
    kernel.validate()?;
    let mut k = Matrix::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        for j in 0..b.rows {
            k.set(i, j, kernel_eval(kernel, a.row(i), b.row(j))?);
        }
    }
    Ok(k)
}

/// Observation noise attached to the training responses.
#[derive(Clone, Debug, Serialize)]
pub enum Noise {
    /// Common variance `sigma2 >= 0` on every observation.
    Homoskedastic(f64),
    /// Per-observation variances (the diagonal of `sigma^2 Lambda`).
    PerPoint(Vec<f64>),
}

/// Posterior mean and covariance over test outputs.
#[derive(Clone, Debug, Serialize)]
pub struct GpPosterior {
    pub mean: Vec<f64>,
    pub cov: Matrix,
    pub train_count: usize,
    pub test_count: usize,
}

impl GpPosterior {
    pub fn variances(&self) -> Vec<f64> {
        (0..self.cov.rows).map(|i| self.cov.get(i, i)).collect()
    }
}

/// GP posterior at the test points:
/// `mean = K(X*, X) (K(X, X) + noise)^{-1} y`,
/// `cov = K(X*, X*) - K(X*, X) (K(X, X) + noise)^{-1} K(X, X*)`.
/// The symmetric system is solved through its spectral decomposition; a
/// noise-free Gram matrix must be numerically invertible unless `jitter`
/// allows a `1e-10 * mean(diag)` ridge.
pub fn gp_posterior(
    kernel: &Kernel,
    x_train: &Matrix,
    y_train: &[f64],
    x_test: &Matrix,
    noise: &Noise,
    jitter: bool,
) -> Result<GpPosterior> {
    kernel.validate()?;
    let n = x_train.rows;
    let m = x_test.rows;
    if y_train.len() != n {
        return Err(Error::shape(
            "gp_posterior",
            format!("{} responses for {n} training rows", y_train.len()),
        ));
    }
    if n > 0 && x_test.cols != x_train.cols {
        return Err(Error::shape(
            "gp_posterior",
            format!("test dimension {} vs train {}", x_test.cols, x_train.cols),
        ));
    }
    let prior = gram(kernel, x_test)?;
    if n == 0 {
        // no data: the posterior is the prior
        return Ok(GpPosterior {
            mean: vec![0.0; m],
            cov: prior,
            train_count: 0,
            test_count: m,
        });
    }
    let mut kxx = gram(kernel, x_train)?;
    match noise {
        Noise::Homoskedastic(s2) => {
            if *s2 < 0.0 {
                return Err(Error::invalid(format!("noise variance {s2} must be >= 0")));
            }
            for i in 0..n {
                kxx.set(i, i, kxx.get(i, i) + s2);
            }
        }
        Noise::PerPoint(vars) => {
            if vars.len() != n {
                return Err(Error::shape(
                    "gp_posterior",
                    format!("{} noise entries for {n} training rows", vars.len()),
                ));
            }
            if vars.iter().any(|v| *v < 0.0) {
                return Err(Error::invalid("per-point noise variances must be >= 0"));
            }
            for i in 0..n {
                kxx.set(i, i, kxx.get(i, i) + vars[i]);
            }
        }
    }
    let bump = if jitter {
        let mean_diag = (0..n).map(|i| kxx.get(i, i)).sum::<f64>() / n as f64;
        let bump = 1e-10 * mean_diag;
        for i in 0..n {
            kxx.set(i, i, kxx.get(i, i) + bump);
        }
        bump
    } else {
        0.0
    };
    let spec = spectral_symmetric(&kxx.symmetrized())?;
    let max = spec.lambda.first().copied().unwrap_or(0.0);
    let min = spec.lambda.last().copied().unwrap_or(0.0);
    if !jitter && (!(max > 0.0) || min <= 1e-10 * max) {
        return Err(Error::invalid(format!(
            "training Gram matrix is numerically singular (min/max eigenvalue {:.3e}); add observation noise or enable jitter",
            if max > 0.0 { min / max } else { 0.0 }
        )));
    }
    // with jitter the spectrum is bounded below by the ridge
    let inv = if jitter {
        let floor = 0.5 * bump.max(f64::MIN_POSITIVE);
        spec.reassemble(|l| 1.0 / l.max(floor))
    } else {
        spec.reassemble(|l| 1.0 / l)
    };
    let kstar = cross_gram(kernel, x_test, x_train)?;
    let mean = kstar.matmul(&inv)?.matvec(y_train)?;
    let shrink = kstar.matmul(&inv)?.matmul(&kstar.transpose())?;
    let cov = prior.sub(&shrink)?.symmetrized();
    Ok(GpPosterior {
        mean,
        cov,
        train_count: n,
        test_count: m,
    })
}

/// Largest absolute discrepancy in predictive means and variances between
/// the weight-space posterior (explicit features, prior `N(0, Sigma_0)`)
/// and the kernel-form posterior with `k(x, x') = x^T Sigma_0 x'`.
pub fn weight_space_equivalence(
    x_train: &Matrix,
    y_train: &[f64],
    x_test: &Matrix,
    sigma0: &Matrix,
    sigma2: f64,
) -> Result<f64> {
    let n = x_train.rows;
    // weight-space route
    let post = posterior_zero_mean(x_train, y_train, sigma2, sigma0)?;
    // kernel-form route with the weighted linear kernel
    let phi_sigma = x_train.matmul(sigma0)?;
    let mut kxx = phi_sigma.matmul(&x_train.transpose())?;
    for i in 0..n {
        kxx.set(i, i, kxx.get(i, i) + sigma2);
    }
    let spec = spectral_symmetric(&kxx.symmetrized())?;
    let inv = spec.reassemble(|l| 1.0 / l);
    let k_star = x_test.matmul(sigma0)?.matmul(&x_train.transpose())?;
    let kernel_mean = k_star.matmul(&inv)?.matvec(y_train)?;
    let k_star_star = x_test.matmul(sigma0)?.matmul(&x_test.transpose())?;
    let shrink = k_star.matmul(&inv)?.matmul(&k_star.transpose())?;

    let mut worst = 0.0_f64;
    for t in 0..x_test.rows {
        let xt = x_test.row(t);
        let weight_mean = dot(xt, &post.mean);
        let weight_var = dot(xt, &post.cov.matvec(xt)?);
        let kernel_var = k_star_star.get(t, t) - shrink.get(t, t);
        worst = worst
            .max((weight_mean - kernel_mean[t]).abs())
            .max((weight_var - kernel_var).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ls::ols_qr;
    use crate::rng::RngStream;

    fn random(n: usize, p: usize, rng: &mut RngStream) -> Matrix {
        Matrix::new(n, p, rng.normal_vec(n * p)).unwrap()
    }

    #[test]
    fn kernel_closed_forms() {
        let e1 = [1.0, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0];
        assert_eq!(kernel_eval(&Kernel::Linear, &e1, &e2).unwrap(), 0.0);
        assert_eq!(kernel_eval(&Kernel::Linear, &e1, &e1).unwrap(), 1.0);
        let g = Kernel::Gaussian { gamma: 0.7 };
        for x in [[0.3, -2.0], [5.0, 5.0]] {
            assert_eq!(kernel_eval(&g, &x, &x).unwrap(), 1.0);
        }
        // gaussian values stay in (0, 1]
        let v = kernel_eval(&g, &[0.0, 0.0], &[3.0, 1.0]).unwrap();
        assert!(v > 0.0 && v <= 1.0);
        let poly = Kernel::Polynomial {
            eta: 1.0,
            gamma: 1.0,
            degree: 2,
        };
        assert_eq!(kernel_eval(&poly, &[1.0], &[1.0]).unwrap(), 4.0);
        // parameter and shape validation
        assert!(kernel_eval(&Kernel::Gaussian { gamma: 0.0 }, &e1, &e1).is_err());
        assert!(kernel_eval(&Kernel::Linear, &e1, &[1.0]).is_err());
        // symmetry
        let mut rng = RngStream::new(111);
        for _ in 0..20 {
            let a = rng.normal_vec(3);
            let b = rng.normal_vec(3);
            for k in [
                Kernel::Linear,
                Kernel::Polynomial { eta: 0.5, gamma: 2.0, degree: 3 },
                Kernel::Gaussian { gamma: 1.3 },
            ] {
                let ab = kernel_eval(&k, &a, &b).unwrap();
                let ba = kernel_eval(&k, &b, &a).unwrap();
                assert!((ab - ba).abs() <= 1e-15 * (1.0 + ab.abs()));
            }
        }
    }

    #[test]
    fn gram_is_psd_and_exchangeable() {
        let mut rng = RngStream::new(112);
        let xs = random(20, 3, &mut rng);
        for kernel in [
            Kernel::Linear,
            Kernel::Polynomial { eta: 1.0, gamma: 0.5, degree: 2 },
            Kernel::Gaussian { gamma: 0.8 },
        ] {
            let k = gram(&kernel, &xs).unwrap();
            assert!(k.sub(&k.transpose()).unwrap().frobenius_norm() == 0.0);
            let spec = spectral_symmetric(&k).unwrap();
            let max = spec.lambda[0];
            assert!(spec.lambda.last().unwrap() >= &(-1e-8 * max.max(1.0)));
            // random-direction probe
            for _ in 0..100 {
                let t = rng.normal_vec(20);
                let q = dot(&t, &k.matvec(&t).unwrap());
                assert!(q >= -1e-8 * dot(&t, &t).max(1.0));
            }
            // permuting the points permutes the Gram consistently
            let order = rng.shuffled_indices(20);
            let perm = crate::matrix::PermutationSpec::new(order.clone()).unwrap();
            let xs_perm = crate::matrix::permute(&xs, &perm, crate::matrix::Axis::Rows).unwrap();
            let k_perm = gram(&kernel, &xs_perm).unwrap();
            for i in 0..20 {
                for j in 0..20 {
                    assert_eq!(k_perm.get(i, j), k.get(order[i], order[j]));
                }
            }
        }
        // single point
        let single = Matrix::from_rows(&[vec![0.3, 1.0]]);
        let k = gram(&Kernel::Gaussian { gamma: 1.0 }, &single).unwrap();
        assert_eq!((k.rows, k.cols), (1, 1));
        assert_eq!(k.get(0, 0), 1.0);
    }

    #[test]
    fn duplicated_points_make_the_gram_singular() {
        let mut rng = RngStream::new(113);
        let base = random(4, 2, &mut rng);
        let xs = base.vcat(&base.take_rows(&[0])).unwrap();
        let k = gram(&Kernel::Gaussian { gamma: 1.0 }, &xs).unwrap();
        let spec = spectral_symmetric(&k).unwrap();
        assert!(spec.lambda.last().unwrap().abs() <= 1e-10 * spec.lambda[0]);
        // noiseless solve rejects it, pointing at noise or jitter
        let err = gp_posterior(
            &Kernel::Gaussian { gamma: 1.0 },
            &xs,
            &[1.0; 5],
            &base,
            &Noise::Homoskedastic(0.0),
            false,
        )
        .unwrap_err();
        assert!(err.to_string().contains("jitter"));
        // jitter or noise rescues the solve
        assert!(gp_posterior(
            &Kernel::Gaussian { gamma: 1.0 },
            &xs,
            &[1.0; 5],
            &base,
            &Noise::Homoskedastic(0.0),
            true,
        )
        .is_ok());
    }

    #[test]
    fn noise_free_posterior_interpolates() {
        let mut rng = RngStream::new(114);
        let xs = random(6, 2, &mut rng);
        let y = rng.normal_vec(6);
        let post = gp_posterior(
            &Kernel::Gaussian { gamma: 0.4 },
            &xs,
            &y,
            &xs,
            &Noise::Homoskedastic(0.0),
            false,
        )
        .unwrap();
        for i in 0..6 {
            assert!((post.mean[i] - y[i]).abs() <= 1e-8 * (1.0 + y[i].abs()));
            assert!(post.cov.get(i, i) <= 1e-8);
        }
    }

    #[test]
    fn empty_training_set_returns_prior() {
        let xs = Matrix::zeros(0, 2);
        let test = Matrix::from_rows(&[vec![0.1, 0.2], vec![1.0, -1.0]]);
        let kernel = Kernel::Gaussian { gamma: 1.0 };
        let post = gp_posterior(&kernel, &xs, &[], &test, &Noise::Homoskedastic(0.5), false)
            .unwrap();
        assert_eq!(post.mean, vec![0.0, 0.0]);
        let prior = gram(&kernel, &test).unwrap();
        assert!(post.cov.sub(&prior).unwrap().frobenius_norm() == 0.0);
    }

    #[test]
    fn posterior_variance_never_exceeds_prior_and_noise_widens_it() {
        let mut rng = RngStream::new(115);
        let xs = random(12, 2, &mut rng);
        let y = rng.normal_vec(12);
        let test = random(7, 2, &mut rng);
        let kernel = Kernel::Gaussian { gamma: 0.6 };
        let prior = gram(&kernel, &test).unwrap();
        let clean =
            gp_posterior(&kernel, &xs, &y, &test, &Noise::Homoskedastic(1e-8), false).unwrap();
        let noisy =
            gp_posterior(&kernel, &xs, &y, &test, &Noise::Homoskedastic(0.4), false).unwrap();
        for i in 0..7 {
            assert!(clean.cov.get(i, i) <= prior.get(i, i) + 1e-8);
            assert!(noisy.cov.get(i, i) <= prior.get(i, i) + 1e-8);
            assert!(noisy.cov.get(i, i) + 1e-10 >= clean.cov.get(i, i));
        }
        // per-point noise with equal entries matches the scalar form
        let per = gp_posterior(
            &kernel,
            &xs,
            &y,
            &test,
            &Noise::PerPoint(vec![0.4; 12]),
            false,
        )
        .unwrap();
        assert!(per.cov.sub(&noisy.cov).unwrap().frobenius_norm() <= 1e-12);
    }

    #[test]
    fn weight_space_and_kernel_form_agree() {
        let mut rng = RngStream::new(116);
        for _ in 0..10 {
            let n = 5 + rng.below(20);
            let p = 1 + rng.below(5);
            let x = random(n, p, &mut rng);
            let y = rng.normal_vec(n);
            let test = random(4, p, &mut rng);
            let b = random(p, p, &mut rng);
            let sigma0 = b.gram().add(&Matrix::identity(p).scale(0.4)).unwrap().symmetrized();
            let gap = weight_space_equivalence(&x, &y, &test, &sigma0, 0.6).unwrap();
            assert!(gap <= 1e-8, "discrepancy {gap}");
        }
    }

    #[test]
    fn scalar_instance_matches_closed_form() {
        // one training point, one test point, Sigma_0 = I in one dimension:
        // posterior var = (1/sigma2 x^2 + 1)^{-1}, mean = var * x y / sigma2
        let x = Matrix::from_rows(&[vec![2.0]]);
        let y = [1.5];
        let test = Matrix::from_rows(&[vec![0.8]]);
        let sigma2 = 0.5;
        let var_beta = 1.0 / (4.0 / sigma2 + 1.0);
        let mean_beta = var_beta * 2.0 * 1.5 / sigma2;
        let expected_mean = 0.8 * mean_beta;
        let expected_var = 0.64 * var_beta;

        let gap = weight_space_equivalence(&x, &y, &test, &Matrix::identity(1), sigma2).unwrap();
        assert!(gap <= 1e-10);
        let post = posterior_zero_mean(&x, &y, sigma2, &Matrix::identity(1)).unwrap();
        assert!((dot(test.row(0), &post.mean) - expected_mean).abs() <= 1e-12);
        let var = dot(test.row(0), &post.cov.matvec(test.row(0)).unwrap());
        assert!((var - expected_var).abs() <= 1e-12);
    }

    #[test]
    fn dataset_duplication_shrinks_gp_variance_but_not_ols() {
        let mut rng = RngStream::new(117);
        let x = random(8, 2, &mut rng);
        let y = rng.normal_vec(8);
        let test = random(3, 2, &mut rng);
        let sigma2 = 0.3;
        let kernel = Kernel::Linear;

        let base_beta = ols_qr(&x, &y).unwrap().beta_hat;
        let mut prev_var: Option<Vec<f64>> = None;
        let mut xk = x.clone();
        let mut yk = y.clone();
        for _ in 0..4 {
            // OLS is blind to duplication
            let beta = ols_qr(&xk, &yk).unwrap().beta_hat;
            assert!(
                crate::matrix::norm2(&sub_vec(&beta, &base_beta))
                    <= 1e-9 * (1.0 + crate::matrix::norm2(&base_beta))
            );
            // the GP posterior variance strictly decreases
            let post = gp_posterior(
                &kernel,
                &xk,
                &yk,
                &test,
                &Noise::Homoskedastic(sigma2),
                false,
            )
            .unwrap();
            let vars = post.variances();
            if let Some(prev) = prev_var {
                for (now, before) in vars.iter().zip(&prev) {
                    assert!(now < before, "variance must shrink: {now} !< {before}");
                }
            }
            prev_var = Some(vars);
            xk = xk.vcat(&x).unwrap();
            yk.extend_from_slice(&y);
        }
    }
}
