//! Shared result types for all hypothesis tests.

use std::fmt;

/// Which quadratic form a test uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatKind {
    Unprojected,
    Projected,
}

impl fmt::Display for StatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatKind::Unprojected => write!(f, "unprojected"),
            StatKind::Projected => write!(f, "projected"),
        }
    }
}

/// A computed test statistic together with its reference distribution's
/// degrees of freedom and the centered vector it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct GofStatistic {
    pub kind: StatKind,
    pub value: f64,
    pub df: u32,
    pub centered: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Reject,
    FailToReject,
    /// Reserved for the independence small-cell rule.
    Inconclusive,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Reject => write!(f, "reject"),
            Decision::FailToReject => write!(f, "fail-to-reject"),
            Decision::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

/// Outcome of a single hypothesis test. `decision` is Reject exactly when
/// `statistic.value > threshold` (strict), unless the small-cell rule made
/// the run Inconclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub statistic: GofStatistic,
    pub threshold: f64,
    pub alpha: f64,
    pub decision: Decision,
    /// Set for Monte-Carlo tests: number of null replicates used.
    pub mc_samples_used: Option<usize>,
    /// False when a numerical minimization stopped on its evaluation
    /// budget; the reported value is best-so-far.
    pub minimizer_converged: bool,
}

impl TestReport {
    pub(crate) fn from_comparison(
        statistic: GofStatistic,
        threshold: f64,
        alpha: f64,
        mc_samples_used: Option<usize>,
    ) -> Self {
        let decision = if statistic.value > threshold {
            Decision::Reject
        } else {
            Decision::FailToReject
        };
        TestReport {
            statistic,
            threshold,
            alpha,
            decision,
            mc_samples_used,
            minimizer_converged: true,
        }
    }
}
