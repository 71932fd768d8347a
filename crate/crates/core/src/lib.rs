//! Differentially private chi-square hypothesis tests on histogram data.
//!
//! The crate releases counts through the Gaussian mechanism (zCDP) or
//! the Laplace mechanism (pure DP) and then runs goodness-of-fit,
//! independence, or GWAS case/control tests that account for the noise
//! in their reference distributions. A simulation harness measures Type I
//! error and power over a grid of sample sizes.

pub mod covariance;
pub mod error;
pub mod gof;
pub mod gwas;
pub mod harness;
pub mod mechanisms;
pub mod minchi;
pub mod report;
pub mod rng;
pub mod specfun;
pub mod table;

pub use error::{Error, Result};
pub use mechanisms::{
    gaussian_mechanism, laplace_mechanism, sample_multinomial, Histogram, Mechanism,
    NoisyHistogram, PrivacyBudget,
};
pub use report::{Decision, GofStatistic, StatKind, TestReport};
pub use rng::RngStream;
