//! Nonparametric relative-entropy (RlEn) complexity scores for collections of
//! equal-length time series, with change-point detection on the resulting
//! score sequence.
//!
//! The processing chain is:
//!
//! 1. [`lag::select_lag`] picks a common lag order `m` by a BIC criterion built
//!    on leave-one-out Nadaraya-Watson regression.
//! 2. [`entropy::entropy_profile`] estimates the relative entropy of every
//!    series with boundary-corrected kernel densities.
//! 3. [`cpd::pelt_detect`] segments the entropy sequence.
//!
//! [`pipeline::run_pipeline`] wires the three together.

pub mod apen;
pub mod ar;
pub mod cpd;
pub mod density;
pub mod entropy;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod lag;
pub mod matrix;
pub mod pipeline;
pub mod quad;
pub mod simulate;
pub mod theory;

pub use error::{Result, RlenError};
pub use kernels::{BaseKernel, KernelSpec};
pub use matrix::SeriesMatrix;

/// Library version recorded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
