#![allow(clippy::needless_range_loop)]

//! Monte Carlo oracle tests for the sampling-distribution results: the
//! estimator moments at a fixed small design and the bias of the
//! noise-variance estimators.

use linmod::inference::{sampling_dist_mc, sigma2_estimates};
use linmod::ls::{inv_via_qr, ols_qr};
use linmod::matrix::Matrix;
use linmod::rng::RngStream;

#[test]
fn sampling_distribution_at_fixed_20x3_design() {
    let mut rng = RngStream::new(2024);
    let (n, p, trials) = (20usize, 3usize, 20_000usize);
    let x = Matrix::new(n, p, rng.normal_vec(n * p)).unwrap();
    let beta = vec![0.8, -1.3, 0.4];
    let sigma2 = 1.0;
    let report = sampling_dist_mc(&x, &beta, sigma2, trials, &mut rng).unwrap();

    // E[beta_hat] = beta coordinatewise
    for j in 0..p {
        let stderr = (report.beta_cov.get(j, j) / trials as f64).sqrt();
        assert!(
            (report.beta_mean[j] - beta[j]).abs() <= 3.0 * stderr,
            "coordinate {j}: {} vs {} (stderr {stderr})",
            report.beta_mean[j],
            beta[j]
        );
    }
    // Cov[beta_hat] = sigma^2 (X^T X)^{-1}
    let target = inv_via_qr(&x.gram()).unwrap().scale(sigma2);
    let gap = report.beta_cov.sub(&target).unwrap().frobenius_norm();
    assert!(gap <= 0.10 * target.frobenius_norm(), "cov gap {gap}");
    // E[SSE] = sigma^2 (n - p) = 17
    let stderr_sse = (report.sse_var / trials as f64).sqrt();
    assert!(
        (report.sse_mean - 17.0).abs() <= 3.0 * stderr_sse,
        "SSE mean {} (stderr {stderr_sse})",
        report.sse_mean
    );
    // residuals and fitted values decorrelate
    assert!(report.max_abs_corr <= 4.0 / (trials as f64).sqrt());
}

#[test]
fn noise_variance_estimator_means() {
    let mut rng = RngStream::new(2025);
    let (n, p, trials) = (30usize, 5usize, 20_000usize);
    let sigma2 = 1.0;
    let x = Matrix::new(n, p, rng.normal_vec(n * p)).unwrap();
    let beta = rng.normal_vec(p);
    let mean = x.matvec(&beta).unwrap();
    let mut sum_unbiased = 0.0;
    let mut sum_mle = 0.0;
    let mut sq_unbiased = 0.0;
    let mut sq_mle = 0.0;
    for _ in 0..trials {
        let y: Vec<f64> = mean.iter().map(|m| m + rng.normal()).collect();
        let est = sigma2_estimates(&ols_qr(&x, &y).unwrap()).unwrap();
        sum_unbiased += est.unbiased;
        sq_unbiased += est.unbiased * est.unbiased;
        sum_mle += est.mle;
        sq_mle += est.mle * est.mle;
        assert!(est.mle <= est.min_mse && est.min_mse <= est.unbiased);
    }
    let t = trials as f64;
    let mean_unbiased = sum_unbiased / t;
    let stderr_unbiased = ((sq_unbiased / t - mean_unbiased * mean_unbiased) / t).sqrt();
    assert!(
        (mean_unbiased - sigma2).abs() <= 3.0 * stderr_unbiased,
        "unbiased estimator mean {mean_unbiased}"
    );
    let mean_mle = sum_mle / t;
    let stderr_mle = ((sq_mle / t - mean_mle * mean_mle) / t).sqrt();
    let mle_target = sigma2 * (n - p) as f64 / n as f64;
    assert!(
        (mean_mle - mle_target).abs() <= 3.0 * stderr_mle,
        "mle mean {mean_mle} vs {mle_target}"
    );
}
