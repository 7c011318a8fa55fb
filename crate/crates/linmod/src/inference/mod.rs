//! Distribution functions, noise-variance estimators, the ANOVA
//! decomposition, F-test variable selection, the Cochran condition check,
//! and Monte Carlo harnesses for the sampling-distribution results.

mod dist;
mod mc;

pub use dist::{cdf_f, ln_gamma, pdf_chi2, pdf_f, pdf_t, regularized_incomplete_beta};
pub use mc::{
    crlb_check_1d, learning_curve_mc, quadratic_expectation, sampling_dist_mc, CrlbReport,
    SamplingDistReport,
};

use serde::Serialize;

use crate::decomp::{qr_gram_schmidt, spectral_symmetric, QrMode};
use crate::error::{Error, Result};
use crate::ls::{ols_qr, LsFit};
use crate::matrix::{dot, rank, Matrix};

pub use crate::rng::RngStream;

/// The three classical estimators of the noise variance, each a quotient of
/// the sum of squared errors.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SigmaEstimates {
    /// `SSE / n`, the maximum-likelihood estimator (biased low).
    pub mle: f64,
    /// `SSE / (n - p)`, unbiased.
    pub unbiased: f64,
    /// `SSE / (n - p + 2)`, the divisor minimizing mean squared error.
    pub min_mse: f64,
}

pub fn sigma2_estimates(fit: &LsFit) -> Result<SigmaEstimates> {
    if fit.dof < 3 {
        return Err(Error::invalid(format!(
            "need residual dof >= 3, got {}",
            fit.dof
        )));
    }
    let n = fit.n() as f64;
    Ok(SigmaEstimates {
        mle: fit.sse / n,
        unbiased: fit.sse / fit.dof as f64,
        min_mse: fit.sse / (fit.dof + 2) as f64,
    })
}

/// Closed-form mean squared error of the estimator `SSE / k` when
/// `SSE ~ sigma^2 chi^2_m`: `sigma^4 [(m - k)^2 + 2m] / k^2`.
pub fn sigma2_divisor_mse(m: usize, k: usize, sigma2: f64) -> f64 {
    let (m, k) = (m as f64, k as f64);
    sigma2 * sigma2 * ((m - k) * (m - k) + 2.0 * m) / (k * k)
}

/// ANOVA decomposition of a fit with an intercept column.
#[derive(Clone, Debug, Serialize)]
pub struct AnovaTable {
    pub sst: f64,
    pub sse: f64,
    pub ssr: f64,
    /// Degrees of freedom `(n - 1, n - p, p - 1)` for SST, SSE, SSR.
    pub df: (usize, usize, usize),
    pub r2: f64,
    pub adj_r2: f64,
    /// `(SSE / (n-p)) / (SSR / (p-1))`, referred to `F(n-p, p-1)`.
    pub f_stat: f64,
    pub p_value: f64,
    /// Set when SST vanishes (constant response); the ratios are then
    /// reported as zero rather than NaN.
    pub degenerate: bool,
}

/// ANOVA for a design whose first column is the all-ones intercept:
/// `SST = SSE + SSR` with defining projectors `I - H_1`, `I - H`, `H - H_1`.
pub fn anova(x: &Matrix, y: &[f64]) -> Result<AnovaTable> {
    let n = x.rows;
    let p = x.cols;
    if p < 2 || n <= p {
        return Err(Error::invalid(format!(
            "anova needs n > p >= 2, got n={n}, p={p}"
        )));
    }
    for i in 0..n {
        if (x.get(i, 0) - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "anova requires an all-ones intercept in the first column",
            ));
        }
    }
    let fit = ols_qr(x, y)?;
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sse = fit.sse;
    let ssr: f64 = fit.fitted.iter().map(|v| (v - mean) * (v - mean)).sum();
    let df = (n - 1, n - p, p - 1);
    let degenerate = sst <= 1e-12 * f64::max(1.0, dot(y, y));
    let (r2, adj_r2, f_stat, p_value) = if degenerate {
        (0.0, 0.0, 0.0, 1.0)
    } else {
        let r2 = 1.0 - sse / sst;
        let adj = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / ((n - p) as f64);
        let f_stat = (sse / df.1 as f64) / (ssr / df.2 as f64);
        let p_value = 1.0 - cdf_f(f_stat, df.1 as u64, df.2 as u64)?;
        (r2, adj, f_stat, p_value)
    };
    Ok(AnovaTable {
        sst,
        sse,
        ssr,
        df,
        r2,
        adj_r2,
        f_stat,
        p_value,
        degenerate,
    })
}

/// Result of the submodel F-test.
#[derive(Clone, Debug, Serialize)]
pub struct FTestResult {
    pub statistic: f64,
    pub df_num: usize,
    pub df_den: usize,
    pub p_value: f64,
}

/// Tests the submodel keeping only `subset` of the columns against the full
/// design: `T = ((RSS_1 - RSS) / (p - q)) / (RSS / (n - p)) ~ F(p-q, n-p)`.
/// Residual sums of squares come from the reduced-QR inner-product shortcut
/// `RSS = y^T y - ||Q^T y||^2`.
pub fn f_test_submodel(x: &Matrix, y: &[f64], subset: &[usize]) -> Result<FTestResult> {
    let n = x.rows;
    let p = x.cols;
    if y.len() != n {
        return Err(Error::shape(
            "f_test_submodel",
            format!("response length {} vs {n} rows", y.len()),
        ));
    }
    let mut seen = vec![false; p];
    for &j in subset {
        if j >= p || seen[j] {
            return Err(Error::invalid(format!(
                "subset index {j} out of range or repeated"
            )));
        }
        seen[j] = true;
    }
    let q = subset.len();
    if q == p {
        // the submodel is the whole model
        return Ok(FTestResult {
            statistic: 0.0,
            df_num: 0,
            df_den: n - p,
            p_value: 1.0,
        });
    }
    if n <= p {
        return Err(Error::invalid(format!(
            "f_test_submodel needs n > p, got n={n}, p={p}"
        )));
    }
    if rank(x) < p {
        return Err(Error::RankDeficient {
            rank: rank(x),
            cols: p,
            hint: "f_test_submodel needs a full-column-rank design",
        });
    }
    let yty = dot(y, y);
    let rss = yty - projected_mass(x, y)?;
    let rss1 = if q == 0 {
        yty
    } else {
        let x1 = x.take_cols(subset);
        if rank(&x1) < q {
            return Err(Error::RankDeficient {
                rank: rank(&x1),
                cols: q,
                hint: "submodel design is rank deficient",
            });
        }
        yty - projected_mass(&x1, y)?
    };
    let df_num = p - q;
    let df_den = n - p;
    let scale = yty.max(1e-300);
    let (statistic, p_value) = if rss <= 1e-12 * scale {
        // perfect full-model fit: the test degenerates
        if rss1 - rss <= 1e-12 * scale {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let stat = f64::max(0.0, (rss1 - rss) / df_num as f64) / (rss / df_den as f64);
        (stat, 1.0 - cdf_f(stat, df_num as u64, df_den as u64)?)
    };
    Ok(FTestResult {
        statistic,
        df_num,
        df_den,
        p_value,
    })
}

/// `||Q^T y||^2` for the reduced QR basis of the column space.
fn projected_mass(x: &Matrix, y: &[f64]) -> Result<f64> {
    let q = qr_gram_schmidt(x, QrMode::Reduced)?.q;
    let qty = q.tr_matvec(y)?;
    Ok(dot(&qty, &qty))
}

/// Outcome of the backward-elimination variable selection procedure.
#[derive(Clone, Debug, Serialize)]
pub struct SelectionReport {
    /// Original column indices that survive.
    pub kept: Vec<usize>,
    /// `(original column index, p-value at removal)` in drop order.
    pub dropped: Vec<(usize, f64)>,
    pub alpha: f64,
}

/// Backward elimination: each round tests every remaining variable against
/// the rest, drops the one with the largest p-value at or above `alpha`
/// (ties to the lowest column index), refits, and stops when every p-value
/// is below the cutoff. An empty kept set is a valid outcome.
pub fn variable_selection(x: &Matrix, y: &[f64], alpha: f64) -> Result<SelectionReport> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} must be in (0, 1)")));
    }
    let p = x.cols;
    if rank(x) < p {
        return Err(Error::RankDeficient {
            rank: rank(x),
            cols: p,
            hint: "variable selection needs a full-column-rank design",
        });
    }
    let mut kept: Vec<usize> = (0..p).collect();
    let mut dropped = Vec::new();
    loop {
        if kept.is_empty() {
            break;
        }
        let current = x.take_cols(&kept);
        let mut worst: Option<(usize, f64)> = None;
        for (pos, _) in kept.iter().enumerate() {
            // submodel = all current columns except this one
            let subset: Vec<usize> = (0..kept.len()).filter(|&j| j != pos).collect();
            let test = f_test_submodel(&current, y, &subset)?;
            let better = match worst {
                None => true,
                // strict > keeps ties resolved toward the lowest index
                Some((_, wp)) => test.p_value > wp,
            };
            if better {
                worst = Some((pos, test.p_value));
            }
        }
        match worst {
            Some((pos, p_value)) if p_value >= alpha => {
                dropped.push((kept[pos], p_value));
                kept.remove(pos);
            }
            _ => break,
        }
    }
    Ok(SelectionReport {
        kept,
        dropped,
        alpha,
    })
}

/// Per-condition outcome of the quadratic-form decomposition check.
#[derive(Clone, Debug, Serialize)]
pub struct CochranReport {
    pub sum_is_identity: bool,
    pub sum_residual: f64,
    pub all_psd: bool,
    pub min_eigenvalues: Vec<f64>,
    pub ranks: Vec<usize>,
    pub rank_additive: bool,
    pub pairwise_orthogonal: bool,
    pub max_pairwise_residual: f64,
    pub pass: bool,
}

/// Verifies the hypotheses under which quadratic forms split into
/// independent chi-squares: the matrices sum to the identity, each is PSD,
/// ranks (traces) add to `n`, and pairwise products vanish.
pub fn cochran_check(projectors: &[Matrix]) -> Result<CochranReport> {
    let first = projectors
        .first()
        .ok_or_else(|| Error::invalid("cochran_check needs at least one matrix"))?;
    let n = first.rows;
    for a in projectors {
        if !a.is_square() || a.rows != n {
            return Err(Error::shape(
                "cochran_check",
                "all matrices must be square with a common size",
            ));
        }
    }
    let mut sum = Matrix::zeros(n, n);
    for a in projectors {
        sum = sum.add(a)?;
    }
    let sum_residual = sum.sub(&Matrix::identity(n))?.frobenius_norm();
    let sum_is_identity = sum_residual <= 1e-9 * n as f64;

    let mut min_eigenvalues = Vec::new();
    let mut ranks = Vec::new();
    let mut all_psd = true;
    for a in projectors {
        let spec = spectral_symmetric(&a.symmetrized())?;
        let min = spec.lambda.last().copied().unwrap_or(0.0);
        let scale = f64::max(1.0, a.frobenius_norm());
        if min < -1e-9 * scale {
            all_psd = false;
        }
        min_eigenvalues.push(min);
        // idempotent matrices carry their rank on the trace
        ranks.push(a.trace()?.round().max(0.0) as usize);
    }
    let rank_additive = ranks.iter().sum::<usize>() == n;

    let mut max_pairwise_residual = 0.0_f64;
    for (i, a) in projectors.iter().enumerate() {
        for b in projectors.iter().skip(i + 1) {
            let prod = a.matmul(b)?.frobenius_norm();
            max_pairwise_residual = max_pairwise_residual.max(prod);
        }
    }
    let pairwise_orthogonal = max_pairwise_residual <= 1e-9 * n as f64;

    Ok(CochranReport {
        sum_is_identity,
        sum_residual,
        all_psd,
        min_eigenvalues,
        ranks,
        rank_additive,
        pairwise_orthogonal,
        max_pairwise_residual,
        pass: sum_is_identity && all_psd && rank_additive && pairwise_orthogonal,
    })
}
