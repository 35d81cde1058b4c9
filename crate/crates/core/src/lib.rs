//! Kalman filtering for systems whose process noise covariance depends on the
//! state.
//!
//! The filters recompute `G(x̂) Σv G(x̂)` from the posterior estimate at every
//! time update. Modules:
//!
//! - [`model`]: linear and nonlinear models with diagonal gains, hypothesis
//!   checks, and conversion from chemical Langevin reaction networks.
//! - [`filter_discrete`]: the discrete recursion and the fixed-β Kalman filter.
//! - [`filter_cd`]: continuous dynamics with discrete samples, and the Euler
//!   limit check.
//! - [`filter_nonlinear`]: nonlinear drift.
//! - [`wls_oracle`]: the same estimates obtained by minimizing a stacked
//!   weighted least-squares cost with one Newton step.
//! - [`sim`]: seeded simulation, Monte Carlo comparisons and statistics.
//! - [`cli`]: the `sdkf` command-line driver.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod filter_cd;
pub mod filter_discrete;
pub mod filter_nonlinear;
pub mod linalg;
pub mod model;
pub mod model_file;
pub mod sim;
pub mod wls_oracle;

pub use error::{Error, Result};
pub use estimate::{FilterTrace, StateEstimate, TraceStep};
