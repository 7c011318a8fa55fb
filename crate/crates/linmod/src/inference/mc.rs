//! Monte Carlo harnesses for the sampling-distribution results and the
//! quadratic-expectation identity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ls::ols_qr;
use crate::matrix::{dot, Matrix};
use crate::rng::RngStream;

/// `E[b^T A b] = trace(A Sigma) + mu^T A mu` for `b` with mean `mu` and
/// covariance `Sigma`.
pub fn quadratic_expectation(a: &Matrix, mu: &[f64], sigma: &Matrix) -> Result<f64> {
    let n = a.rows;
    if !a.is_square() || sigma.rows != n || sigma.cols != n || mu.len() != n {
        return Err(Error::shape(
            "quadratic_expectation",
            format!(
                "A is {}x{}, Sigma is {}x{}, mu has length {}",
                a.rows,
                a.cols,
                sigma.rows,
                sigma.cols,
                mu.len()
            ),
        ));
    }
    let trace_term = a.matmul(sigma)?.trace()?;
    let mean_term = dot(mu, &a.matvec(mu)?);
    Ok(trace_term + mean_term)
}

/// Simulates Gaussian-design regressions and reports the Monte Carlo means
/// of the in-sample error `||e||^2 / n` and the squared error at a fresh
/// design point.
pub fn learning_curve_mc(
    n: usize,
    p: usize,
    sigma2: f64,
    trials: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    if p < 1 || n <= p {
        return Err(Error::invalid(format!(
            "learning curve needs n > p >= 1, got n={n}, p={p}"
        )));
    }
    if trials < 1000 {
        return Err(Error::invalid(format!(
            "learning curve needs >= 1000 trials, got {trials}"
        )));
    }
    let sd = sigma2.sqrt();
    let beta = vec![1.0; p];
    let mut sum_in = 0.0;
    let mut sum_out = 0.0;
    for _ in 0..trials {
        let x = Matrix::new(n, p, rng.normal_vec(n * p))?;
        let mean = x.matvec(&beta)?;
        let y: Vec<f64> = mean.iter().map(|m| m + sd * rng.normal()).collect();
        let fit = ols_qr(&x, &y)?;
        sum_in += fit.sse / n as f64;
        // fresh point with fresh noise
        let x_star = rng.normal_vec(p);
        let y_star = dot(&x_star, &beta) + sd * rng.normal();
        let err = y_star - dot(&x_star, &fit.beta_hat);
        sum_out += err * err;
    }
    Ok((sum_in / trials as f64, sum_out / trials as f64))
}

/// Empirical sampling moments of the estimator, the error sum of squares,
/// and the residual/fitted cross-correlations at a fixed design.
#[derive(Clone, Debug, Serialize)]
pub struct SamplingDistReport {
    pub beta_mean: Vec<f64>,
    pub beta_cov: Matrix,
    pub sse_mean: f64,
    pub sse_var: f64,
    /// Largest `|corr(e_i, yhat_j)|` over all pairs.
    pub max_abs_corr: f64,
    pub trials: usize,
}

/// Repeatedly redraws the noise at a fixed design, fits, and accumulates
/// empirical moments of `beta_hat`, `SSE`, and the residual/fitted
/// correlations.
pub fn sampling_dist_mc(
    x: &Matrix,
    beta: &[f64],
    sigma2: f64,
    trials: usize,
    rng: &mut RngStream,
) -> Result<SamplingDistReport> {
    let n = x.rows;
    let p = x.cols;
    if beta.len() != p {
        return Err(Error::shape(
            "sampling_dist_mc",
            format!("beta length {} vs {p} columns", beta.len()),
        ));
    }
    if trials < 5000 {
        return Err(Error::invalid(format!(
            "sampling_dist_mc needs >= 5000 trials, got {trials}"
        )));
    }
    let sd = sigma2.sqrt();
    let mean = x.matvec(beta)?;
    let mut beta_sum = vec![0.0; p];
    let mut beta_outer = Matrix::zeros(p, p);
    let mut sse_sum = 0.0;
    let mut sse_sq = 0.0;
    // streaming moments for the e / yhat correlation matrix
    let mut e_sum = vec![0.0; n];
    let mut e_sq = vec![0.0; n];
    let mut f_sum = vec![0.0; n];
    let mut f_sq = vec![0.0; n];
    let mut cross = Matrix::zeros(n, n);
    for _ in 0..trials {
        let y: Vec<f64> = mean.iter().map(|m| m + sd * rng.normal()).collect();
        let fit = ols_qr(x, &y)?;
        for i in 0..p {
            beta_sum[i] += fit.beta_hat[i];
            for j in 0..p {
                beta_outer.set(i, j, beta_outer.get(i, j) + fit.beta_hat[i] * fit.beta_hat[j]);
            }
        }
        sse_sum += fit.sse;
        sse_sq += fit.sse * fit.sse;
        for i in 0..n {
            e_sum[i] += fit.residuals[i];
            e_sq[i] += fit.residuals[i] * fit.residuals[i];
            f_sum[i] += fit.fitted[i];
            f_sq[i] += fit.fitted[i] * fit.fitted[i];
            for j in 0..n {
                cross.set(i, j, cross.get(i, j) + fit.residuals[i] * fit.fitted[j]);
            }
        }
    }
    let t = trials as f64;
    let beta_mean: Vec<f64> = beta_sum.iter().map(|s| s / t).collect();
    let mut beta_cov = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            beta_cov.set(
                i,
                j,
                beta_outer.get(i, j) / t - beta_mean[i] * beta_mean[j],
            );
        }
    }
    let sse_mean = sse_sum / t;
    let sse_var = sse_sq / t - sse_mean * sse_mean;
    let mut max_abs_corr = 0.0_f64;
    for i in 0..n {
        let var_e = e_sq[i] / t - (e_sum[i] / t) * (e_sum[i] / t);
        for j in 0..n {
            let var_f = f_sq[j] / t - (f_sum[j] / t) * (f_sum[j] / t);
            let cov = cross.get(i, j) / t - (e_sum[i] / t) * (f_sum[j] / t);
            let denom = (var_e * var_f).sqrt();
            if denom > 0.0 {
                max_abs_corr = max_abs_corr.max((cov / denom).abs());
            }
        }
    }
    Ok(SamplingDistReport {
        beta_mean,
        beta_cov,
        sse_mean,
        sse_var,
        max_abs_corr,
        trials,
    })
}

/// Variance of the slope estimator under N-fold replication of a fixed
/// one-dimensional design, against the information-bound target
/// `sigma^2 / (N x^T x)`.
#[derive(Clone, Debug, Serialize)]
pub struct CrlbReport {
    pub empirical_var: f64,
    pub target_var: f64,
    /// Standard error of the variance estimate itself.
    pub var_stderr: f64,
    pub trials: usize,
}

pub fn crlb_check_1d(
    x: &[f64],
    beta: f64,
    sigma2: f64,
    n_repeats: usize,
    trials: usize,
    rng: &mut RngStream,
) -> Result<CrlbReport> {
    if x.is_empty() || n_repeats == 0 || trials < 2 {
        return Err(Error::invalid(
            "crlb_check_1d needs a nonempty design, repeats >= 1, trials >= 2",
        ));
    }
    let xtx = dot(x, x);
    if xtx <= 0.0 {
        return Err(Error::invalid("design vector must be nonzero"));
    }
    let sd = sigma2.sqrt();
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..trials {
        // estimator over N stacked realizations of the same design
        let mut num = 0.0;
        for _ in 0..n_repeats {
            for &xi in x {
                let yi = xi * beta + sd * rng.normal();
                num += xi * yi;
            }
        }
        let est = num / (n_repeats as f64 * xtx);
        sum += est;
        sumsq += est * est;
    }
    let t = trials as f64;
    let mean = sum / t;
    let empirical_var = (sumsq / t - mean * mean) * t / (t - 1.0);
    let target_var = sigma2 / (n_repeats as f64 * xtx);
    // Var[S^2] = 2 sigma^4 / (t - 1) for Gaussian samples
    let var_stderr = empirical_var * (2.0 / (t - 1.0)).sqrt();
    Ok(CrlbReport {
        empirical_var,
        target_var,
        var_stderr,
        trials,
    })
}
