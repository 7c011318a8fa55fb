//! Command implementations for the `linmod` binary: CSV ingestion, model
//! fitting and reporting, and the verification harness entry point.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use serde::Serialize;
use serde_json::json;

use linmod::bayes::{
    gibbs_semiconjugate, gibbs_variable_selection, posterior_g_prior, posterior_nig,
    posterior_zero_mean, GibbsTrace,
};
use linmod::decomp::{
    cr, lq, qr_givens, qr_gram_schmidt, qr_householder, spectral_symmetric, svd, ulv, urv, QrMode,
    SvdMode,
};
use linmod::gp::{gp_posterior, Kernel, Noise};
use linmod::inference::{anova, sigma2_estimates, variable_selection};
use linmod::ls::{ols_normal, ols_qr, ols_svd, ols_utv, LsFit};
use linmod::matrix::Matrix;
use linmod::rng::RngStream;

pub const SCHEMA_VERSION: u32 = 1;

/// Tabular regression data: design matrix, response, and column names.
#[derive(Clone, Debug, Serialize)]
pub struct Dataset {
    pub design: Matrix,
    pub response: Vec<f64>,
    pub column_names: Vec<String>,
    pub has_intercept: bool,
}

/// Run-wide knobs: seed, tolerances, cutoff, and iteration budget.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    /// Entry tolerance scale for rank decisions.
    pub rank_tolerance: f64,
    /// Relative reconstruction tolerance used by the verification suites.
    pub reconstruction_tolerance: f64,
    /// Monte Carlo acceptance band in standard errors.
    pub mc_band: f64,
    pub alpha: f64,
    pub iters: usize,
    pub burn_in: Option<usize>,
    pub format: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            rank_tolerance: 1e-10,
            reconstruction_tolerance: 1e-9,
            mc_band: 3.0,
            alpha: 0.05,
            iters: 5000,
            burn_in: None,
            format: "text".to_string(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        let positive = [
            self.rank_tolerance,
            self.reconstruction_tolerance,
            self.mc_band,
        ];
        if positive.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            bail!("all tolerances must be positive");
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            bail!("alpha {} must be in (0, 1)", self.alpha);
        }
        if let Some(b) = self.burn_in {
            if b >= self.iters {
                bail!("burn-in {b} must be below the iteration count {}", self.iters);
            }
        }
        if self.format != "text" && self.format != "json" {
            bail!("format {:?} must be text or json", self.format);
        }
        Ok(())
    }
}

/// Loads an RFC-style CSV with a header row, extracting the named response
/// column and optionally prepending an all-ones intercept.
pub fn load_csv(
    path: &Path,
    response_column: &str,
    add_intercept: bool,
) -> anyhow::Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let headers: Vec<String> = reader
        .headers()
        .context("missing header row")?
        .iter()
        .map(|h| h.to_string())
        .collect();
    if headers.is_empty() {
        bail!("{}: empty file (no header row)", path.display());
    }
    {
        let mut seen = std::collections::BTreeSet::new();
        for h in &headers {
            if !seen.insert(h) {
                bail!("duplicate column name {h:?}");
            }
        }
    }
    let response_idx = headers
        .iter()
        .position(|h| h == response_column)
        .ok_or_else(|| {
            anyhow!(
                "response column {:?} not found; available columns: {}",
                response_column,
                headers.join(", ")
            )
        })?;
    let mut response = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("row {}", row_idx + 2))?;
        let mut row = Vec::with_capacity(headers.len().saturating_sub(1));
        for (col_idx, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                anyhow!(
                    "non-numeric cell {:?} at row {}, column {:?}",
                    cell,
                    row_idx + 2,
                    headers.get(col_idx).map(String::as_str).unwrap_or("?")
                )
            })?;
            if col_idx == response_idx {
                response.push(value);
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    let n = rows.len();
    let p_raw = headers.len() - 1;
    let mut column_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != response_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let mut data = Vec::with_capacity(n * (p_raw + usize::from(add_intercept)));
    for row in &rows {
        if add_intercept {
            data.push(1.0);
        }
        data.extend_from_slice(row);
    }
    if add_intercept {
        column_names.insert(0, "(intercept)".to_string());
    }
    let design = Matrix::new(n, p_raw + usize::from(add_intercept), data)
        .map_err(|e| anyhow!("{e}"))?;
    Ok(Dataset {
        design,
        response,
        column_names,
        has_intercept: add_intercept,
    })
}

/// Writes a dataset back to CSV with 17 significant digits, making the
/// save/load round trip bit-exact.
pub fn save_csv(dataset: &Dataset, response_name: &str, path: &Path) -> anyhow::Result<()> {
    let mut out = String::new();
    let start = usize::from(dataset.has_intercept);
    let mut names: Vec<&str> = dataset.column_names[start..]
        .iter()
        .map(String::as_str)
        .collect();
    names.push(response_name);
    out.push_str(&names.join(","));
    out.push('\n');
    for i in 0..dataset.design.rows {
        let mut fields: Vec<String> = (start..dataset.design.cols)
            .map(|j| format!("{:.16e}", dataset.design.get(i, j)))
            .collect();
        fields.push(format!("{:.16e}", dataset.response[i]));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Text,
    Json,
}

/// Formats a p-value (or any probability) with 6 significant digits.
pub fn fmt_p(v: f64) -> String {
    format!("{v:.5e}")
}

/// Text rendering of a matrix, elided past 12x12.
fn matrix_text(m: &Matrix) -> String {
    if m.rows > 12 || m.cols > 12 {
        format!("[{}x{} matrix elided; use --format json for full data]\n", m.rows, m.cols)
    } else {
        m.to_text()
    }
}

fn json_report(command: &str, seed: Option<u64>, payload: serde_json::Value) -> String {
    let mut root = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
    });
    if let Some(seed) = seed {
        root["seed"] = json!(seed);
    }
    root["result"] = payload;
    let mut s = serde_json::to_string_pretty(&root).expect("serializable");
    s.push('\n');
    s
}

fn fit_payload(fit: &LsFit, names: &[String]) -> serde_json::Value {
    let coeffs: Vec<serde_json::Value> = names
        .iter()
        .zip(&fit.beta_hat)
        .map(|(n, b)| json!({"name": n, "estimate": b}))
        .collect();
    let mut payload = json!({
        "method": format!("{:?}", fit.method).to_lowercase(),
        "coefficients": coeffs,
        "sse": fit.sse,
        "rank": fit.rank,
        "dof": fit.dof,
        "n": fit.n(),
    });
    if let Ok(est) = sigma2_estimates(fit) {
        payload["sigma2"] = json!({
            "mle": est.mle,
            "unbiased": est.unbiased,
            "min_mse": est.min_mse,
        });
    }
    payload
}

fn fit_text(fit: &LsFit, names: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "least squares fit ({:?})", fit.method);
    let width = names.iter().map(|n| n.len()).max().unwrap_or(4).max(4);
    for (n, b) in names.iter().zip(&fit.beta_hat) {
        let _ = writeln!(out, "  {n:width$}  {b:+.10e}");
    }
    let _ = writeln!(out, "  n = {}, rank = {}, dof = {}", fit.n(), fit.rank, fit.dof);
    let _ = writeln!(out, "  sse = {:.10e}", fit.sse);
    if let Ok(est) = sigma2_estimates(fit) {
        let _ = writeln!(
            out,
            "  sigma2: mle = {:.10e}, unbiased = {:.10e}, min-mse = {:.10e}",
            est.mle, est.unbiased, est.min_mse
        );
    }
    out
}

/// `fit` subcommand.
pub fn run_fit(dataset: &Dataset, method: &str, format: OutputFormat) -> anyhow::Result<String> {
    let x = &dataset.design;
    let y = &dataset.response;
    let fit = match method {
        "normal" => ols_normal(x, y),
        "qr" => ols_qr(x, y),
        "utv" => ols_utv(x, y),
        "svd" => ols_svd(x, y),
        other => bail!("unknown fit method {other:?}; expected normal|qr|utv|svd"),
    }
    .map_err(|e| anyhow!("{e}"))?;
    Ok(match format {
        OutputFormat::Text => fit_text(&fit, &dataset.column_names),
        OutputFormat::Json => json_report("fit", None, fit_payload(&fit, &dataset.column_names)),
    })
}

/// `anova` subcommand; requires an intercept as the first design column.
pub fn run_anova(dataset: &Dataset, format: OutputFormat) -> anyhow::Result<String> {
    let table = anova(&dataset.design, &dataset.response).map_err(|e| anyhow!("{e}"))?;
    Ok(match format {
        OutputFormat::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "analysis of variance");
            let _ = writeln!(out, "  source      sum of squares     df");
            let _ = writeln!(out, "  regression  {:>16.10e}  {:>5}", table.ssr, table.df.2);
            let _ = writeln!(out, "  error       {:>16.10e}  {:>5}", table.sse, table.df.1);
            let _ = writeln!(out, "  total       {:>16.10e}  {:>5}", table.sst, table.df.0);
            let _ = writeln!(out, "  r2 = {:.10}, adjusted r2 = {:.10}", table.r2, table.adj_r2);
            let _ = writeln!(
                out,
                "  F = {:.10e} on ({}, {}) dof, p-value = {}",
                table.f_stat,
                table.df.1,
                table.df.2,
                fmt_p(table.p_value)
            );
            if table.degenerate {
                let _ = writeln!(out, "  note: constant response; ratios reported as zero");
            }
            out
        }
        OutputFormat::Json => json_report(
            "anova",
            None,
            json!({
                "sst": table.sst,
                "sse": table.sse,
                "ssr": table.ssr,
                "df": {"total": table.df.0, "error": table.df.1, "regression": table.df.2},
                "r2": table.r2,
                "adj_r2": table.adj_r2,
                "f_stat": table.f_stat,
                "p_value": table.p_value,
                "degenerate": table.degenerate,
            }),
        ),
    })
}

/// `select` subcommand: backward elimination at the given cutoff.
pub fn run_select(dataset: &Dataset, alpha: f64, format: OutputFormat) -> anyhow::Result<String> {
    let report =
        variable_selection(&dataset.design, &dataset.response, alpha).map_err(|e| anyhow!("{e}"))?;
    let name = |j: usize| {
        dataset
            .column_names
            .get(j)
            .cloned()
            .unwrap_or_else(|| format!("x{j}"))
    };
    Ok(match format {
        OutputFormat::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "backward elimination at alpha = {alpha}");
            for (j, p) in &report.dropped {
                let _ = writeln!(out, "  dropped {} (p-value {})", name(*j), fmt_p(*p));
            }
            if report.kept.is_empty() {
                let _ = writeln!(out, "  kept: none");
            } else {
                let kept: Vec<String> = report.kept.iter().map(|&j| name(j)).collect();
                let _ = writeln!(out, "  kept: {}", kept.join(", "));
            }
            out
        }
        OutputFormat::Json => json_report(
            "select",
            None,
            json!({
                "alpha": report.alpha,
                "kept": report.kept.iter().map(|&j| json!({"index": j, "name": name(j)})).collect::<Vec<_>>(),
                "dropped": report
                    .dropped
                    .iter()
                    .map(|(j, p)| json!({"index": j, "name": name(*j), "p_value": p}))
                    .collect::<Vec<_>>(),
            }),
        ),
    })
}

/// Options shared by the Bayesian subcommand.
#[derive(Clone, Debug)]
pub struct BayesOptions {
    pub prior: String,
    pub sigma2: f64,
    pub g: f64,
    pub iters: usize,
    pub burn_in: Option<usize>,
    pub seed: u64,
    pub trace_out: Option<std::path::PathBuf>,
}

fn trace_summary(trace: &GibbsTrace, p: usize) -> serde_json::Value {
    let retained = trace.retained();
    let m = retained.len().max(1) as f64;
    let beta_mean: Vec<f64> = (0..p)
        .map(|j| retained.iter().map(|d| d.beta[j]).sum::<f64>() / m)
        .collect();
    let gamma_mean = retained.iter().map(|d| d.gamma).sum::<f64>() / m;
    let inclusion: Option<Vec<f64>> = retained.first().and_then(|d| d.z.as_ref()).map(|_| {
        (0..p)
            .map(|j| {
                retained
                    .iter()
                    .filter(|d| d.z.as_ref().map(|z| z[j]).unwrap_or(false))
                    .count() as f64
                    / m
            })
            .collect()
    });
    json!({
        "retained_draws": retained.len(),
        "burn_in": trace.burn_in,
        "beta_mean": beta_mean,
        "gamma_mean": gamma_mean,
        "sigma2_mean_of_inverse_gamma": 1.0 / gamma_mean,
        "inclusion_probability": inclusion,
        "rejected_flips": trace.rejected_flips,
    })
}

/// `bayes` subcommand: closed-form posteriors or Gibbs traces.
pub fn run_bayes(
    dataset: &Dataset,
    opts: &BayesOptions,
    format: OutputFormat,
) -> anyhow::Result<String> {
    let x = &dataset.design;
    let y = &dataset.response;
    let p = x.cols;
    let mut rng = RngStream::new(opts.seed);
    let burn_in = opts.burn_in.unwrap_or(opts.iters / 5);
    let payload = match opts.prior.as_str() {
        "zero-mean" => {
            let post = posterior_zero_mean(x, y, opts.sigma2, &Matrix::identity(p))
                .map_err(|e| anyhow!("{e}"))?;
            json!({"prior": "zero-mean", "mean": post.mean, "cov": post.cov})
        }
        "g-prior" => {
            let post =
                posterior_g_prior(x, y, opts.sigma2, opts.g).map_err(|e| anyhow!("{e}"))?;
            json!({"prior": "g-prior", "g": opts.g, "mean": post.mean, "cov": post.cov})
        }
        "nig" => {
            let post = posterior_nig(x, y, &vec![0.0; p], &Matrix::identity(p), 1.0, 1.0)
                .map_err(|e| anyhow!("{e}"))?;
            json!({
                "prior": "nig",
                "beta3": post.beta3,
                "sigma3": post.sigma3,
                "a_n": post.a_n,
                "b_n": post.b_n,
            })
        }
        "gibbs" => {
            let trace = gibbs_semiconjugate(
                x,
                y,
                &vec![0.0; p],
                &Matrix::identity(p),
                1.0,
                1.0,
                opts.iters,
                burn_in,
                &mut rng,
            )
            .map_err(|e| anyhow!("{e}"))?;
            if let Some(path) = &opts.trace_out {
                std::fs::write(path, trace.export_csv())
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            let mut payload = trace_summary(&trace, p);
            payload["prior"] = json!("semiconjugate-gibbs");
            payload
        }
        "select" => {
            let trace = gibbs_variable_selection(x, y, opts.g, opts.iters, burn_in, &mut rng)
                .map_err(|e| anyhow!("{e}"))?;
            if let Some(path) = &opts.trace_out {
                std::fs::write(path, trace.export_csv())
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            let mut payload = trace_summary(&trace, p);
            payload["prior"] = json!("g-prior-selection-gibbs");
            payload["g"] = json!(opts.g);
            payload
        }
        other => bail!("unknown prior {other:?}; expected zero-mean|g-prior|nig|gibbs|select"),
    };
    Ok(match format {
        OutputFormat::Json => json_report("bayes", Some(opts.seed), payload),
        OutputFormat::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "bayesian posterior ({})", opts.prior);
            render_json_text(&mut out, &payload, 1);
            out
        }
    })
}

/// Compact text rendering of a JSON payload, eliding large matrices.
fn render_json_text(out: &mut String, value: &serde_json::Value, depth: usize) {
    let pad = "  ".repeat(depth);
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                if let Some(matrix) = as_matrix(v) {
                    let _ = writeln!(out, "{pad}{k}:");
                    for line in matrix_text(&matrix).lines() {
                        let _ = writeln!(out, "{pad}  {line}");
                    }
                } else if v.is_object() {
                    let _ = writeln!(out, "{pad}{k}:");
                    render_json_text(out, v, depth + 1);
                } else {
                    let _ = writeln!(out, "{pad}{k}: {v}");
                }
            }
        }
        other => {
            let _ = writeln!(out, "{pad}{other}");
        }
    }
}

fn as_matrix(value: &serde_json::Value) -> Option<Matrix> {
    let obj = value.as_object()?;
    let rows = obj.get("rows")?.as_u64()? as usize;
    let cols = obj.get("cols")?.as_u64()? as usize;
    let data: Vec<f64> = obj
        .get("data")?
        .as_array()?
        .iter()
        .map(|v| v.as_f64())
        .collect::<Option<_>>()?;
    Matrix::new(rows, cols, data).ok()
}

/// Options for the GP subcommand.
#[derive(Clone, Debug)]
pub struct GpOptions {
    pub kernel: String,
    pub gamma: f64,
    pub eta: f64,
    pub degree: u32,
    pub noise: f64,
    pub jitter: bool,
    pub test_data: Option<std::path::PathBuf>,
}

/// `gp` subcommand: per-test-point mean, variance, and 95% band as CSV.
pub fn run_gp(
    dataset: &Dataset,
    opts: &GpOptions,
    format: OutputFormat,
) -> anyhow::Result<String> {
    let kernel = match opts.kernel.as_str() {
        "linear" => Kernel::Linear,
        "polynomial" => Kernel::Polynomial {
            eta: opts.eta,
            gamma: opts.gamma,
            degree: opts.degree,
        },
        "gaussian" => Kernel::Gaussian { gamma: opts.gamma },
        other => bail!("unknown kernel {other:?}; expected linear|polynomial|gaussian"),
    };
    let x_test = match &opts.test_data {
        Some(path) => read_matrix_csv(path)?,
        None => dataset.design.clone(),
    };
    let post = gp_posterior(
        &kernel,
        &dataset.design,
        &dataset.response,
        &x_test,
        &Noise::Homoskedastic(opts.noise),
        opts.jitter,
    )
    .map_err(|e| anyhow!("{e}"))?;
    let rows: Vec<(f64, f64, f64, f64)> = (0..post.test_count)
        .map(|i| {
            let mean = post.mean[i];
            let var = post.cov.get(i, i).max(0.0);
            let half = 1.96 * var.sqrt();
            (mean, var, mean - half, mean + half)
        })
        .collect();
    Ok(match format {
        OutputFormat::Text => {
            let mut out = String::from("mean,variance,lower95,upper95\n");
            for (mean, var, lo, hi) in rows {
                let _ = writeln!(out, "{mean:.16e},{var:.16e},{lo:.16e},{hi:.16e}");
            }
            out
        }
        OutputFormat::Json => json_report(
            "gp",
            None,
            json!({
                "kernel": opts.kernel,
                "noise": opts.noise,
                "points": rows
                    .iter()
                    .map(|(m, v, lo, hi)| json!({"mean": m, "variance": v, "lower95": lo, "upper95": hi}))
                    .collect::<Vec<_>>(),
            }),
        ),
    })
}

/// Reads a header-bearing all-numeric CSV as a plain matrix.
pub fn read_matrix_csv(path: &Path) -> anyhow::Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let width = reader.headers().context("missing header row")?.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        for (col_idx, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                anyhow!("non-numeric cell {cell:?} at row {}, column {col_idx}", row_idx + 2)
            })?;
            data.push(v);
        }
        rows += 1;
    }
    Matrix::new(rows, width, data).map_err(|e| anyhow!("{e}"))
}

/// `decomp` subcommand: factor the design matrix and print the factors in
/// the plain matrix text format.
pub fn run_decomp(x: &Matrix, factor: &str) -> anyhow::Result<String> {
    let mut out = String::new();
    let mut emit = |label: &str, m: &Matrix| {
        let _ = writeln!(out, "# {label}");
        out.push_str(&m.to_text());
    };
    match factor {
        "qr-gs" => {
            let f = qr_gram_schmidt(x, QrMode::Reduced).map_err(|e| anyhow!("{e}"))?;
            emit("Q", &f.q);
            emit("R", &f.r);
        }
        "qr-householder" => {
            let f = qr_householder(x).map_err(|e| anyhow!("{e}"))?;
            emit("Q", &f.q);
            emit("R", &f.r);
        }
        "qr-givens" => {
            let f = qr_givens(x).map_err(|e| anyhow!("{e}"))?;
            emit("Q", &f.q);
            emit("R", &f.r);
        }
        "lq" => {
            let f = lq(x, QrMode::Reduced).map_err(|e| anyhow!("{e}"))?;
            emit("L", &f.l);
            emit("Q", &f.q);
        }
        "ulv" => {
            let f = ulv(x).map_err(|e| anyhow!("{e}"))?;
            emit("U", &f.u);
            emit("T", &f.t);
            emit("V", &f.v);
        }
        "urv" => {
            let f = urv(x).map_err(|e| anyhow!("{e}"))?;
            emit("U", &f.u);
            emit("T", &f.t);
            emit("V", &f.v);
        }
        "cr" => {
            let f = cr(x).map_err(|e| anyhow!("{e}"))?;
            emit("C", &f.c);
            emit("R", &f.r_factor);
        }
        "spectral" => {
            let f = spectral_symmetric(x).map_err(|e| anyhow!("{e}"))?;
            emit("Q", &f.q);
            emit("lambda", &Matrix::new(1, f.lambda.len(), f.lambda.clone()).unwrap());
        }
        "svd" => {
            let f = svd(x, SvdMode::Full).map_err(|e| anyhow!("{e}"))?;
            emit("U", &f.u);
            emit("sigma", &Matrix::new(1, f.sigma.len(), f.sigma.clone()).unwrap());
            emit("V", &f.v);
        }
        other => bail!(
            "unknown factorization {other:?}; expected qr-gs|qr-householder|qr-givens|lq|ulv|urv|cr|spectral|svd"
        ),
    }
    Ok(out)
}

/// `verify` subcommand; the report's `all_passed` drives the exit code.
pub fn run_verify(seed: u64, format: OutputFormat) -> anyhow::Result<(String, bool)> {
    let report = linmod::verify::run(seed).map_err(|e| anyhow!("{e}"))?;
    let rendered = match format {
        OutputFormat::Text => report.render_text(),
        OutputFormat::Json => {
            let mut s =
                serde_json::to_string_pretty(&json!({
                    "schema_version": SCHEMA_VERSION,
                    "command": "verify",
                    "result": serde_json::to_value(&report)?,
                }))?;
            s.push('\n');
            s
        }
    };
    Ok((rendered, report.all_passed))
}
