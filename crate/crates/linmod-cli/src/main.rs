//! `linmod`: fit linear models on CSV data, run ANOVA and variable
//! selection, sample Bayesian posteriors, run Gaussian-process regression,
//! factor matrices, and verify the numerical suites.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use linmod_cli::{
    load_csv, run_anova, run_bayes, run_decomp, run_fit, run_gp, run_select, run_verify,
    BayesOptions, GpOptions, OutputFormat, RunConfig,
};

#[derive(Parser)]
#[command(name = "linmod", version, about = "Linear-models toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// CSV file with a header row
    #[arg(long)]
    data: PathBuf,
    /// Name of the response column
    #[arg(long)]
    response: String,
    /// Prepend an all-ones intercept column
    #[arg(long)]
    intercept: bool,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Report format
    #[arg(long, default_value = "text", value_parser = ["text", "json"])]
    format: String,
    /// Write the report to this path instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

impl OutputArgs {
    fn format(&self) -> OutputFormat {
        if self.format == "json" {
            OutputFormat::Json
        } else {
            OutputFormat::Text
        }
    }

    fn emit(&self, report: &str) -> anyhow::Result<()> {
        match &self.output {
            Some(path) => std::fs::write(path, report)
                .with_context(|| format!("cannot write {}", path.display())),
            None => {
                print!("{report}");
                Ok(())
            }
        }
    }
}

/// `LINMOD_SEED` in the environment overrides `--seed`.
fn effective_seed(flag: u64) -> anyhow::Result<u64> {
    match std::env::var("LINMOD_SEED") {
        Ok(text) => text
            .parse()
            .with_context(|| format!("LINMOD_SEED={text:?} is not a valid seed")),
        Err(_) => Ok(flag),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Ordinary least squares fit
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Solver route
        #[arg(long, default_value = "qr", value_parser = ["normal", "qr", "utv", "svd"])]
        method: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Analysis of variance (the design must start with an intercept)
    Anova {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Backward-elimination variable selection by F-tests
    Select {
        #[command(flatten)]
        data: DataArgs,
        /// p-value cutoff
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Bayesian posteriors and Gibbs samplers
    Bayes {
        #[command(flatten)]
        data: DataArgs,
        /// Prior family
        #[arg(long, default_value = "zero-mean",
              value_parser = ["zero-mean", "g-prior", "nig", "gibbs", "select"])]
        prior: String,
        /// Noise variance for the fixed-variance priors
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        /// g-prior scale
        #[arg(long, default_value_t = 10.0)]
        g: f64,
        /// Gibbs iterations
        #[arg(long, default_value_t = 5000)]
        iters: usize,
        /// Burn-in (default iters / 5)
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Write the retained trace as CSV
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Gaussian-process regression
    Gp {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "gaussian", value_parser = ["linear", "polynomial", "gaussian"])]
        kernel: String,
        /// Kernel scale (gaussian and polynomial)
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Polynomial offset
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// Polynomial degree
        #[arg(long, default_value_t = 2)]
        degree: u32,
        /// Observation noise variance
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Allow a tiny diagonal ridge on a singular noiseless Gram matrix
        #[arg(long)]
        jitter: bool,
        /// CSV of test inputs (defaults to the training inputs)
        #[arg(long)]
        test_data: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Factor a matrix and print the factors in plain text
    Decomp {
        /// CSV file of numeric columns (no response)
        #[arg(long)]
        data: PathBuf,
        /// Read the file as the plain matrix text format instead of CSV
        #[arg(long)]
        matrix_text: bool,
        #[arg(long, value_parser = ["qr-gs", "qr-householder", "qr-givens", "lq", "ulv", "urv", "cr", "spectral", "svd"])]
        factor: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run the numerical verification suites
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Fit {
            data,
            method,
            output,
        } => {
            let dataset = load_csv(&data.data, &data.response, data.intercept)?;
            let report = run_fit(&dataset, &method, output.format())?;
            output.emit(&report)?;
            Ok(0)
        }
        Command::Anova { data, output } => {
            let dataset = load_csv(&data.data, &data.response, data.intercept)?;
            let report = run_anova(&dataset, output.format())?;
            output.emit(&report)?;
            Ok(0)
        }
        Command::Select {
            data,
            alpha,
            output,
        } => {
            let config = RunConfig {
                alpha,
                format: output.format.clone(),
                ..RunConfig::default()
            };
            config.validate()?;
            let dataset = load_csv(&data.data, &data.response, data.intercept)?;
            let report = run_select(&dataset, config.alpha, output.format())?;
            output.emit(&report)?;
            Ok(0)
        }
        Command::Bayes {
            data,
            prior,
            sigma2,
            g,
            iters,
            burn_in,
            seed,
            trace_out,
            output,
        } => {
            let config = RunConfig {
                seed: effective_seed(seed)?,
                iters,
                burn_in,
                format: output.format.clone(),
                ..RunConfig::default()
            };
            config.validate()?;
            let dataset = load_csv(&data.data, &data.response, data.intercept)?;
            let opts = BayesOptions {
                prior,
                sigma2,
                g,
                iters: config.iters,
                burn_in: config.burn_in,
                seed: config.seed,
                trace_out,
            };
            let report = run_bayes(&dataset, &opts, output.format())?;
            output.emit(&report)?;
            Ok(0)
        }
        Command::Gp {
            data,
            kernel,
            gamma,
            eta,
            degree,
            noise,
            jitter,
            test_data,
            output,
        } => {
            let dataset = load_csv(&data.data, &data.response, data.intercept)?;
            let opts = GpOptions {
                kernel,
                gamma,
                eta,
                degree,
                noise,
                jitter,
                test_data,
            };
            let report = run_gp(&dataset, &opts, output.format())?;
            output.emit(&report)?;
            Ok(0)
        }
        Command::Decomp {
            data,
            matrix_text,
            factor,
            output,
        } => {
            let matrix = if matrix_text {
                let text = std::fs::read_to_string(&data)
                    .with_context(|| format!("cannot read {}", data.display()))?;
                linmod::Matrix::from_text(&text).map_err(|e| anyhow::anyhow!("{e}"))?
            } else {
                linmod_cli::read_matrix_csv(&data)?
            };
            let report = run_decomp(&matrix, &factor)?;
            output.emit(&report)?;
            Ok(0)
        }
        Command::Verify { seed, output } => {
            let (report, all_passed) = run_verify(effective_seed(seed)?, output.format())?;
            output.emit(&report)?;
            Ok(if all_passed { 0 } else { 1 })
        }
    }
}
