//! A self-contained linear-models toolkit.
//!
//! Everything is built from first principles on top of a dense row-major
//! [`matrix::Matrix`]: matrix factorizations (three QR algorithms, LQ,
//! ULV/URV, CR, symmetric spectral decomposition, SVD), least-squares
//! solvers with projection theory and the Moore-Penrose pseudo-inverse,
//! classical distribution theory (chi-square/t/F, ANOVA, F-test variable
//! selection, Monte Carlo harnesses), conjugate Bayesian linear regression
//! with Gibbs samplers, and Gaussian-process regression.
//!
//! The [`verify`] module bundles the numerical verification suites that the
//! `linmod` CLI exposes as `linmod verify`.

// index loops mirror the matrix algebra; negated comparisons are NaN guards
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod decomp;
pub mod error;
pub mod gp;
pub mod inference;
pub mod ls;
pub mod matrix;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::RngStream;
