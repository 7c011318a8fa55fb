//! Bayesian linear regression: the Beta-Bernoulli conjugate update,
//! closed-form Gaussian posteriors (zero-mean, g-prior, normal-inverse-gamma),
//! the semiconjugate Gibbs sampler, and Gibbs-based variable selection driven
//! by g-prior marginal likelihoods.

use serde::Serialize;

use crate::decomp::spectral_symmetric;
use crate::error::{Error, Result};
use crate::ls::spectral_pd;
use crate::matrix::{add_vec, dot, rank, sub_vec, Matrix};
use crate::rng::RngStream;

/// Beta posterior for a Bernoulli success probability.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BetaBernoulliPosterior {
    pub a: f64,
    pub b: f64,
}

impl BetaBernoulliPosterior {
    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}

/// Conjugate update: `(a0 + successes, b0 + n - successes)`.
pub fn beta_bernoulli_update(
    a0: f64,
    b0: f64,
    successes: u64,
    n: u64,
) -> Result<BetaBernoulliPosterior> {
    if !(a0 > 0.0) || !(b0 > 0.0) {
        return Err(Error::invalid(format!(
            "beta prior parameters must be positive, got a0={a0}, b0={b0}"
        )));
    }
    if successes > n {
        return Err(Error::invalid(format!(
            "successes {successes} exceed trials {n}"
        )));
    }
    Ok(BetaBernoulliPosterior {
        a: a0 + successes as f64,
        b: b0 + (n - successes) as f64,
    })
}

/// Gaussian posterior over the weights.
#[derive(Clone, Debug, Serialize)]
pub struct GaussianPosterior {
    pub mean: Vec<f64>,
    pub cov: Matrix,
}

/// Symmetric positive (semi)definite inverse via the spectral route.
fn inv_pd(m: &Matrix) -> Result<Matrix> {
    Ok(spectral_pd(m)?.reassemble(|l| 1.0 / l))
}

/// Posterior for the zero-mean Gaussian prior `beta ~ N(0, Sigma_0)` at
/// fixed noise variance: `Sigma_1 = (X^T X / sigma2 + Sigma_0^{-1})^{-1}`,
/// `mean = Sigma_1 X^T y / sigma2`.
pub fn posterior_zero_mean(
    x: &Matrix,
    y: &[f64],
    sigma2: f64,
    sigma0: &Matrix,
) -> Result<GaussianPosterior> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid(format!("sigma2 {sigma2} must be > 0")));
    }
    if sigma0.rows != x.cols {
        return Err(Error::shape(
            "posterior_zero_mean",
            format!("prior is {}x{} for {} columns", sigma0.rows, sigma0.cols, x.cols),
        ));
    }
    let prior_precision = inv_pd(sigma0)?;
    let precision = x
        .gram()
        .scale(1.0 / sigma2)
        .add(&prior_precision)?
        .symmetrized();
    let cov = inv_pd(&precision)?;
    let xty = x.tr_matvec(y)?;
    let mean = cov.matvec(&xty.iter().map(|v| v / sigma2).collect::<Vec<_>>())?;
    Ok(GaussianPosterior { mean, cov })
}

/// Posterior under Zellner's g-prior `beta ~ N(0, g sigma2 (X^T X)^{-1})`:
/// `mean = g/(g+1) (X^T X)^{-1} X^T y`,
/// `cov = g sigma2/(g+1) (X^T X)^{-1}`.
pub fn posterior_g_prior(
    x: &Matrix,
    y: &[f64],
    sigma2: f64,
    g: f64,
) -> Result<GaussianPosterior> {
    if !(sigma2 > 0.0) || !(g > 0.0) {
        return Err(Error::invalid(format!(
            "sigma2 {sigma2} and g {g} must be > 0"
        )));
    }
    let r = rank(x);
    if r < x.cols {
        return Err(Error::RankDeficient {
            rank: r,
            cols: x.cols,
            hint: "the g-prior needs a full-column-rank design",
        });
    }
    let shrink = g / (g + 1.0);
    let gram_inv = inv_pd(&x.gram())?;
    let mean = gram_inv
        .matvec(&x.tr_matvec(y)?)?
        .iter()
        .map(|v| shrink * v)
        .collect();
    let cov = gram_inv.scale(shrink * sigma2).symmetrized();
    Ok(GaussianPosterior { mean, cov })
}

/// One retained state of a Gibbs chain. The inclusion mask is present only
/// for the variable-selection sampler.
#[derive(Clone, Debug, Serialize)]
pub struct GibbsDraw {
    pub z: Option<Vec<bool>>,
    pub beta: Vec<f64>,
    pub gamma: f64,
}

/// A Gibbs sampler trace; `draws` holds every iteration, and the retained
/// portion starts after `burn_in`.
#[derive(Clone, Debug, Serialize)]
pub struct GibbsTrace {
    pub draws: Vec<GibbsDraw>,
    pub burn_in: usize,
    pub seed: u64,
    /// Inclusion flips rejected because the candidate design was singular.
    pub rejected_flips: u64,
}

impl GibbsTrace {
    pub fn retained(&self) -> &[GibbsDraw] {
        &self.draws[self.burn_in.min(self.draws.len())..]
    }

    /// CSV export of the retained draws: z bits (if any), beta entries,
    /// then gamma, with a header row.
    pub fn export_csv(&self) -> String {
        let mut out = String::new();
        if let Some(first) = self.retained().first() {
            let mut header = Vec::new();
            if let Some(z) = &first.z {
                header.extend((0..z.len()).map(|j| format!("z{j}")));
            }
            header.extend((0..first.beta.len()).map(|j| format!("beta{j}")));
            header.push("gamma".into());
            out.push_str(&header.join(","));
            out.push('\n');
            for draw in self.retained() {
                let mut fields = Vec::new();
                if let Some(z) = &draw.z {
                    fields.extend(z.iter().map(|&b| if b { "1".into() } else { "0".to_string() }));
                }
                fields.extend(draw.beta.iter().map(|v| format!("{v:.16e}")));
                fields.push(format!("{:.16e}", draw.gamma));
                out.push_str(&fields.join(","));
                out.push('\n');
            }
        }
        out
    }
}

/// Gamma draw (shape-rate) by Marsaglia-Tsang squeeze, with the standard
/// `U^{1/a}` boost for shape < 1.
pub fn sample_gamma(shape: f64, rate: f64, rng: &mut RngStream) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) {
        return Err(Error::invalid(format!(
            "gamma parameters must be positive, got shape={shape}, rate={rate}"
        )));
    }
    if shape < 1.0 {
        let boosted = sample_gamma(shape + 1.0, 1.0, rng)?;
        let u = rng.uniform_open();
        return Ok(boosted * u.powf(1.0 / shape) / rate);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let z = rng.normal();
        let t = 1.0 + c * z;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = rng.uniform_open();
        if u.ln() < 0.5 * z * z + d - d * v + d * v.ln() {
            return Ok(d * v / rate);
        }
    }
}

/// Multivariate normal draw through the spectral square root
/// `Q Lambda^{1/2} z`. Mildly negative eigenvalues within the PSD tolerance
/// are clamped to zero.
pub fn sample_mvn(mean: &[f64], cov: &Matrix, rng: &mut RngStream) -> Result<Vec<f64>> {
    if cov.rows != mean.len() {
        return Err(Error::shape(
            "sample_mvn",
            format!("mean length {} vs {}x{} covariance", mean.len(), cov.rows, cov.cols),
        ));
    }
    let spec = spectral_symmetric(cov)?;
    let max = spec.lambda.first().copied().unwrap_or(0.0).max(0.0);
    if let Some(&min) = spec.lambda.last() {
        if min < -1e-9 * f64::max(max, 1e-300) {
            return Err(Error::NotPositiveDefinite { ratio: min / max });
        }
    }
    let root = spec.reassemble(|l| l.max(0.0).sqrt());
    let z = rng.normal_vec(mean.len());
    Ok(add_vec(mean, &root.matvec(&z)?))
}

/// Semiconjugate-prior Gibbs sampler alternating
/// `beta | gamma ~ N(beta_2(gamma), Sigma_2(gamma))` and
/// `gamma | beta ~ Gamma(a0 + n/2, b0 + ||y - X beta||^2 / 2)`.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_semiconjugate(
    x: &Matrix,
    y: &[f64],
    beta0: &[f64],
    sigma0: &Matrix,
    a0: f64,
    b0: f64,
    iters: usize,
    burn_in: usize,
    rng: &mut RngStream,
) -> Result<GibbsTrace> {
    let n = x.rows;
    let p = x.cols;
    if beta0.len() != p || sigma0.rows != p {
        return Err(Error::shape(
            "gibbs_semiconjugate",
            format!("prior dimensions must match {p} columns"),
        ));
    }
    if !(a0 > 0.0) || !(b0 > 0.0) {
        return Err(Error::invalid(format!(
            "gamma prior parameters must be positive, got a0={a0}, b0={b0}"
        )));
    }
    if iters <= burn_in {
        return Err(Error::invalid(format!(
            "iters {iters} must exceed burn_in {burn_in}"
        )));
    }
    let prior_precision = inv_pd(sigma0)?;
    let prior_pull = prior_precision.matvec(beta0)?;
    let gram = x.gram();
    let xty = x.tr_matvec(y)?;
    let mut gamma = a0 / b0; // prior mean of the precision
    let mut draws = Vec::with_capacity(iters);
    for _ in 0..iters {
        // beta | gamma
        let precision = gram.scale(gamma).add(&prior_precision)?.symmetrized();
        let cov = inv_pd(&precision)?;
        let rhs: Vec<f64> = prior_pull
            .iter()
            .zip(&xty)
            .map(|(pp, xv)| pp + gamma * xv)
            .collect();
        let mean = cov.matvec(&rhs)?;
        let beta = sample_mvn(&mean, &cov, rng)?;
        // gamma | beta
        let resid = sub_vec(y, &x.matvec(&beta)?);
        let ssr = dot(&resid, &resid);
        gamma = sample_gamma(a0 + 0.5 * n as f64, b0 + 0.5 * ssr, rng)?;
        draws.push(GibbsDraw {
            z: None,
            beta,
            gamma,
        });
    }
    Ok(GibbsTrace {
        draws,
        burn_in,
        seed: rng.seed(),
        rejected_flips: 0,
    })
}

/// Normal-inverse-gamma posterior for the full conjugate prior.
#[derive(Clone, Debug, Serialize)]
pub struct NigPosterior {
    pub beta3: Vec<f64>,
    pub sigma3: Matrix,
    pub a_n: f64,
    pub b_n: f64,
}

/// Full-conjugate update: `Sigma_3 = (X^T X + Sigma_0^{-1})^{-1}`,
/// `beta_3 = Sigma_3 (Sigma_0^{-1} beta_0 + X^T y)`, `a_n = a_0 + n/2 + 1`,
/// `b_n = b_0 + (y^T y + beta_0^T Sigma_0^{-1} beta_0
///               - beta_3^T Sigma_3^{-1} beta_3) / 2`.
///
/// Note the `+1` in `a_n`, which counts the inverse-gamma exponent itself;
/// the semiconjugate gamma conditional uses the plain `a_0 + n/2` update.
pub fn posterior_nig(
    x: &Matrix,
    y: &[f64],
    beta0: &[f64],
    sigma0: &Matrix,
    a0: f64,
    b0: f64,
) -> Result<NigPosterior> {
    let n = x.rows;
    let p = x.cols;
    if beta0.len() != p || sigma0.rows != p {
        return Err(Error::shape(
            "posterior_nig",
            format!("prior dimensions must match {p} columns"),
        ));
    }
    if !(a0 > 0.0) || !(b0 > 0.0) {
        return Err(Error::invalid(format!(
            "inverse-gamma prior parameters must be positive, got a0={a0}, b0={b0}"
        )));
    }
    let prior_precision = inv_pd(sigma0)?;
    let posterior_precision = x.gram().add(&prior_precision)?.symmetrized();
    let sigma3 = inv_pd(&posterior_precision)?;
    let rhs = add_vec(&prior_precision.matvec(beta0)?, &x.tr_matvec(y)?);
    let beta3 = sigma3.matvec(&rhs)?;
    let a_n = a0 + 0.5 * n as f64 + 1.0;
    let quad_prior = dot(beta0, &prior_precision.matvec(beta0)?);
    let quad_post = dot(&beta3, &posterior_precision.matvec(&beta3)?);
    let b_n = b0 + 0.5 * (dot(y, y) + quad_prior - quad_post);
    if !(b_n > 0.0) {
        return Err(Error::invalid(format!(
            "posterior scale b_n = {b_n} is not positive; inputs are ill-conditioned"
        )));
    }
    Ok(NigPosterior {
        beta3,
        sigma3,
        a_n,
        b_n,
    })
}

/// Log marginal likelihood of the response under the g-prior at fixed noise
/// variance: `log (2 pi sigma2)^{-n/2} (g+1)^{-p/2} exp(-r / (2 sigma2))`
/// with `r = y^T y - g/(g+1) y^T H y`.
pub fn marginal_likelihood_g(x: &Matrix, y: &[f64], sigma2: f64, g: f64) -> Result<f64> {
    if !(sigma2 > 0.0) || !(g > 0.0) {
        return Err(Error::invalid(format!(
            "sigma2 {sigma2} and g {g} must be > 0"
        )));
    }
    let n = x.rows;
    let p = x.cols;
    let r = rank(x);
    if r < p {
        return Err(Error::RankDeficient {
            rank: r,
            cols: p,
            hint: "the g-prior marginal needs a full-column-rank design",
        });
    }
    let yty = dot(y, y);
    let projected = if p == 0 {
        0.0
    } else {
        let q = crate::decomp::qr_gram_schmidt(x, crate::decomp::QrMode::Reduced)?.q;
        let qty = q.tr_matvec(y)?;
        dot(&qty, &qty)
    };
    let residual = (yty - g / (g + 1.0) * projected).max(0.0);
    Ok(-0.5 * n as f64 * (2.0 * std::f64::consts::PI * sigma2).ln()
        - 0.5 * p as f64 * (g + 1.0).ln()
        - residual / (2.0 * sigma2))
}

/// Per-model quantities for the selection sampler: the g-prior residual
/// `r_z` and the MLE residual variance that seeds the per-model gamma prior.
fn model_stats(x: &Matrix, y: &[f64], z: &[bool], g: f64) -> Result<Option<(f64, f64, usize)>> {
    let cols: Vec<usize> = (0..z.len()).filter(|&j| z[j]).collect();
    let n = x.rows as f64;
    let yty = dot(y, y);
    if cols.is_empty() {
        // the empty model regresses on nothing
        return Ok(Some((yty, yty / n, 0)));
    }
    let xz = x.take_cols(&cols);
    if rank(&xz) < cols.len() {
        return Ok(None);
    }
    let q = crate::decomp::qr_gram_schmidt(&xz, crate::decomp::QrMode::Reduced)?.q;
    let qty = q.tr_matvec(y)?;
    let projected = dot(&qty, &qty);
    let r_z = (yty - g / (g + 1.0) * projected).max(0.0);
    let sse = (yty - projected).max(0.0);
    Ok(Some((r_z, sse / n, cols.len())))
}

/// Log of the collapsed model evidence used by the selection sampler, with
/// the per-model hyperparameters `a0 = 1/2`, `b0 = sigma_hat^2_z / 2`:
/// `log p(y | X, z) = -(n/2) log 2 pi - (p_z/2) log(g+1)
///                    + a0 log b0 - log Gamma(a0)
///                    + log Gamma(a_n) - a_n log b_n`,
/// `a_n = a0 + n/2`, `b_n = b0 + r_z / 2`.
fn log_model_evidence(n: usize, g: f64, r_z: f64, sigma2_mle: f64, p_z: usize) -> f64 {
    use crate::inference::ln_gamma;
    let a0 = 0.5;
    let b0 = 0.5 * sigma2_mle;
    let a_n = a0 + 0.5 * n as f64;
    let b_n = b0 + 0.5 * r_z;
    -0.5 * (n as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * (p_z as f64) * (g + 1.0).ln()
        + a0 * b0.ln()
        - ln_gamma(a0)
        + ln_gamma(a_n)
        - a_n * b_n.ln()
}

/// Gibbs-based Bayesian variable selection under the g-prior with uniform
/// inclusion priors `p(z_j = 1) = 1/2`. Each sweep revisits the mask in
/// random order, flipping `z_j` with probability `o_j / (1 + o_j)` from the
/// collapsed odds, then draws `beta | z, gamma` from the g-prior posterior
/// on the active columns and `gamma | beta, z` from its gamma conditional.
/// Flips that would produce a singular active design are rejected and
/// counted on the trace.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_variable_selection(
    x: &Matrix,
    y: &[f64],
    g: f64,
    iters: usize,
    burn_in: usize,
    rng: &mut RngStream,
) -> Result<GibbsTrace> {
    let n = x.rows;
    let p = x.cols;
    if y.len() != n {
        return Err(Error::shape(
            "gibbs_variable_selection",
            format!("response length {} vs {n} rows", y.len()),
        ));
    }
    if !(g > 0.0) {
        return Err(Error::invalid(format!("g {g} must be > 0")));
    }
    if iters <= burn_in {
        return Err(Error::invalid(format!(
            "iters {iters} must exceed burn_in {burn_in}"
        )));
    }
    let mut z = vec![true; p];
    // start from a full-rank active set
    if model_stats(x, y, &z, g)?.is_none() {
        let pivots = crate::matrix::rref(x).pivot_cols;
        z = (0..p).map(|j| pivots.contains(&j)).collect();
    }
    let mut stats = model_stats(x, y, &z, g)?
        .ok_or_else(|| Error::invalid("no full-rank starting model found"))?;
    let mut gamma = 1.0;
    let mut rejected_flips = 0u64;
    let mut draws = Vec::with_capacity(iters);
    for _ in 0..iters {
        // update the mask in random order via collapsed odds
        for j in rng.shuffled_indices(p) {
            let mut z_on = z.clone();
            z_on[j] = true;
            let mut z_off = z.clone();
            z_off[j] = false;
            let on = model_stats(x, y, &z_on, g)?;
            let off = model_stats(x, y, &z_off, g)?;
            match (on, off) {
                (Some(on), Some(off)) => {
                    let log_on = log_model_evidence(n, g, on.0, on.1, on.2);
                    let log_off = log_model_evidence(n, g, off.0, off.1, off.2);
                    // p(z_j = 1 | rest) = o / (1 + o) computed stably in logs
                    let p_on = 1.0 / (1.0 + (log_off - log_on).exp());
                    let new = rng.uniform() < p_on;
                    if z[j] != new {
                        z[j] = new;
                        stats = if new { on } else { off };
                    } else {
                        stats = if z[j] { on } else { off };
                    }
                }
                _ => {
                    // candidate flip would be singular: keep the current mask
                    rejected_flips += 1;
                }
            }
        }
        // beta | z, gamma from the g-prior posterior on the active columns
        let cols: Vec<usize> = (0..p).filter(|&j| z[j]).collect();
        let mut beta = vec![0.0; p];
        let mut resid = y.to_vec();
        if !cols.is_empty() {
            let xz = x.take_cols(&cols);
            let shrink = g / (g + 1.0);
            let gram_inv = inv_pd(&xz.gram())?;
            let mean: Vec<f64> = gram_inv
                .matvec(&xz.tr_matvec(y)?)?
                .iter()
                .map(|v| shrink * v)
                .collect();
            let cov = gram_inv.scale(shrink / gamma).symmetrized();
            let active = sample_mvn(&mean, &cov, rng)?;
            for (slot, value) in cols.iter().zip(&active) {
                beta[*slot] = *value;
            }
            resid = sub_vec(y, &xz.matvec(&active)?);
        }
        // gamma | beta, z with the per-model prior a0 = 1/2, b0 = mle/2
        let a0 = 0.5;
        let b0 = 0.5 * stats.1.max(1e-300);
        let ssr = dot(&resid, &resid);
        gamma = sample_gamma(a0 + 0.5 * n as f64, b0 + 0.5 * ssr, rng)?;
        draws.push(GibbsDraw {
            z: Some(z.clone()),
            beta,
            gamma,
        });
    }
    Ok(GibbsTrace {
        draws,
        burn_in,
        seed: rng.seed(),
        rejected_flips,
    })
}

/// Direct enumeration of the mask posterior for small `p`, integrating the
/// fixed-variance marginal over the per-model gamma prior by quadrature.
/// This is the brute-force oracle for the selection sampler.
pub fn enumerate_mask_posterior(x: &Matrix, y: &[f64], g: f64) -> Result<Vec<(Vec<bool>, f64)>> {
    let p = x.cols;
    if p > 12 {
        return Err(Error::invalid(format!(
            "enumeration over 2^{p} masks is not sensible"
        )));
    }
    let n = x.rows;
    let mut logs = Vec::new();
    for bits in 0..(1usize << p) {
        let z: Vec<bool> = (0..p).map(|j| bits >> j & 1 == 1).collect();
        let Some((_, sigma2_mle, _)) = model_stats(x, y, &z, g)? else {
            continue;
        };
        let a0 = 0.5;
        let b0 = 0.5 * sigma2_mle.max(1e-300);
        let cols: Vec<usize> = (0..p).filter(|&j| z[j]).collect();
        let xz = x.take_cols(&cols);
        // integrate p(y | X_z, sigma2 = 1/gamma) Gamma(gamma | a0, b0) dgamma
        // on a log-spaced grid wide enough to cover the integrand
        let mut log_terms = Vec::new();
        let lo = (a0 / b0 / 1e6_f64).ln();
        let hi = (a0 / b0 * 1e6_f64).ln();
        let steps = 4000;
        let dt = (hi - lo) / steps as f64;
        for s in 0..=steps {
            let t = lo + s as f64 * dt; // t = ln gamma
            let gamma = t.exp();
            let loglik = if cols.is_empty() {
                let sigma2 = 1.0 / gamma;
                -0.5 * n as f64 * (2.0 * std::f64::consts::PI * sigma2).ln()
                    - dot(y, y) / (2.0 * sigma2)
            } else {
                marginal_likelihood_g(&xz, y, 1.0 / gamma, g)?
            };
            let log_prior = a0 * b0.ln() - crate::inference::ln_gamma(a0)
                + (a0 - 1.0) * gamma.ln()
                - b0 * gamma;
            // substitute gamma = e^t: the Jacobian contributes +t
            log_terms.push(loglik + log_prior + t);
        }
        let max = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = log_terms.iter().map(|l| (l - max).exp()).sum();
        let log_evidence = max + (sum * dt).ln();
        logs.push((z, log_evidence));
    }
    // uniform mask prior: normalize the evidences
    let max = logs
        .iter()
        .map(|(_, l)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logs.iter().map(|(_, l)| (l - max).exp()).sum();
    Ok(logs
        .into_iter()
        .map(|(z, l)| (z, (l - max).exp() / total))
        .collect())
}
