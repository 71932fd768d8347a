//! Goodness-of-fit tests on privatized histograms.
//!
//! Two deployment modes share the same statistics:
//! - asymptotic: Gaussian noise calibrated to a zCDP budget, decision
//!   against a chi-square quantile;
//! - Monte Carlo: Laplace noise calibrated to a pure-DP budget, decision
//!   against an order statistic of null replicates.
//!
//! The statistic inverts the noise-regularized covariance Sigma + sI in
//! closed form, so evaluation is O(d). The projected variant removes the
//! direction spanned by the all-ones vector, which carries pure noise
//! (counts always sum to n, noisy counts do not).

use crate::error::{Error, Result};
use crate::covariance::validate_null;
use crate::mechanisms::{
    gaussian_mechanism, laplace_mechanism_with_variance, laplace_variance, sample_multinomial,
    Histogram, NoisyHistogram,
};
use crate::report::{GofStatistic, StatKind, TestReport};
use crate::rng::RngStream;
use crate::specfun::{chi2_quantile, ChiSquareSpec};

/// U = sqrt(n) (values/n - p0), the centered and scaled noisy frequency
/// vector. Its entries sum to (n_tilde - n)/sqrt(n), not zero.
pub fn centered_vector(nh: &NoisyHistogram, p0: &[f64]) -> Result<Vec<f64>> {
    validate_null(p0)?;
    if nh.values.len() != p0.len() {
        return Err(Error::Shape(format!(
            "histogram has {} cells but the null has {}",
            nh.values.len(),
            p0.len()
        )));
    }
    if nh.n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    let n = nh.n as f64;
    let root_n = n.sqrt();
    Ok(nh
        .values
        .iter()
        .zip(p0)
        .map(|(&x, &p)| root_n * (x / n - p))
        .collect())
}

/// The closed-form value of u^T (Diag(p0) - p0 p0^T + s I)^-1 u:
/// sum u_i^2/(p0_i + s) + (sum omega_i u_i)^2 / (s sum omega_i) with
/// omega_i = p0_i/(p0_i + s). Shared by every test in the crate.
pub(crate) fn closed_form_quadratic(u: &[f64], p0: &[f64], s: f64) -> f64 {
    let mut diag_term = 0.0;
    let mut omega_dot_u = 0.0;
    let mut omega_sum = 0.0;
    for i in 0..u.len() {
        let omega = p0[i] / (p0[i] + s);
        diag_term += u[i] * u[i] / (p0[i] + s);
        omega_dot_u += omega * u[i];
        omega_sum += omega;
    }
    diag_term + omega_dot_u * omega_dot_u / (s * omega_sum)
}

/// Projected correction: the projected statistic equals the unprojected
/// one minus (sum u_i)^2 / (s d).
pub(crate) fn projection_correction(u: &[f64], s: f64) -> f64 {
    let total: f64 = u.iter().sum();
    total * total / (s * u.len() as f64)
}

fn scaled_variance(nh: &NoisyHistogram) -> Result<f64> {
    if !(nh.noise_variance > 0.0) {
        return Err(Error::domain("noise variance must be positive"));
    }
    Ok(nh.noise_variance / nh.n as f64)
}

/// Q = U^T (Sigma + sI)^-1 U with s = noise_variance/n; asymptotically
/// chi-square with d degrees of freedom under the null.
pub fn unprojected_statistic(nh: &NoisyHistogram, p0: &[f64]) -> Result<GofStatistic> {
    let u = centered_vector(nh, p0)?;
    let s = scaled_variance(nh)?;
    Ok(GofStatistic {
        kind: StatKind::Unprojected,
        value: closed_form_quadratic(&u, p0, s),
        df: p0.len() as u32,
        centered: u,
    })
}

/// Q with the all-ones direction projected out; asymptotically chi-square
/// with d-1 degrees of freedom under the null.
pub fn projected_statistic(nh: &NoisyHistogram, p0: &[f64]) -> Result<GofStatistic> {
    let u = centered_vector(nh, p0)?;
    let s = scaled_variance(nh)?;
    let value = closed_form_quadratic(&u, p0, s) - projection_correction(&u, s);
    Ok(GofStatistic {
        kind: StatKind::Projected,
        // The subtraction is exact in theory; clip rounding residue.
        value: value.max(0.0),
        df: p0.len() as u32 - 1,
        centered: u,
    })
}

pub fn statistic(nh: &NoisyHistogram, p0: &[f64], kind: StatKind) -> Result<GofStatistic> {
    match kind {
        StatKind::Unprojected => unprojected_statistic(nh, p0),
        StatKind::Projected => projected_statistic(nh, p0),
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("alpha must lie in (0, 1)"));
    }
    Ok(())
}

/// Asymptotic goodness-of-fit test under zCDP: privatize the histogram
/// with Gaussian noise of per-cell variance 1/rho, then compare the
/// chosen statistic to the matching chi-square quantile.
pub fn zcdp_gof_test(
    h: &Histogram,
    rho: f64,
    alpha: f64,
    p0: &[f64],
    kind: StatKind,
    rng: &mut RngStream,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let nh = gaussian_mechanism(h, rho, rng, false)?;
    let stat = statistic(&nh, p0, kind)?;
    let threshold = chi2_quantile(ChiSquareSpec::central(stat.df)?, 1.0 - alpha)?;
    Ok(TestReport::from_comparison(stat, threshold, alpha, None))
}

/// Critical value from m null replicates: the k-th smallest sample with
/// k = ceil((m+1)(1-alpha)). For m=59, alpha=0.05 this is the 3rd-largest
/// sample. Requires m >= ceil(1/alpha) - 1 so that k <= m.
pub fn mc_critical_value(samples: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let m = samples.len();
    let needed = (1.0 / alpha).ceil() as usize - 1;
    if m < needed {
        return Err(Error::InsufficientSamples { needed, got: m });
    }
    // The epsilon absorbs FP residue in (m+1)(1-alpha): 60 * 0.95
    // evaluates just above 57 and must not round the index up.
    let k = (((m + 1) as f64) * (1.0 - alpha) - 1e-9).ceil() as usize;
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("statistic samples must not be NaN"));
    Ok(sorted[k - 1])
}

/// Monte-Carlo goodness-of-fit test under pure DP with Laplace noise of
/// variance 8/epsilon^2.
pub fn dp_mc_gof_test(
    h: &Histogram,
    epsilon: f64,
    alpha: f64,
    p0: &[f64],
    kind: StatKind,
    m: usize,
    rng: &mut RngStream,
) -> Result<TestReport> {
    dp_mc_gof_test_with_variance(h, laplace_variance(epsilon)?, alpha, p0, kind, m, rng)
}

/// Monte-Carlo test with an explicit per-cell Laplace noise variance,
/// for callers who calibrate the mechanism themselves.
///
/// RNG contract: the observed noise consumes the main stream; replicate i
/// runs entirely on `rng.substream(i)` (multinomial draw, then noise), so
/// replicates may be evaluated in any order.
pub fn dp_mc_gof_test_with_variance(
    h: &Histogram,
    noise_variance: f64,
    alpha: f64,
    p0: &[f64],
    kind: StatKind,
    m: usize,
    rng: &mut RngStream,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    validate_null(p0)?;
    let needed = (1.0 / alpha).ceil() as usize - 1;
    if m < needed {
        return Err(Error::InsufficientSamples { needed, got: m });
    }
    let nh = laplace_mechanism_with_variance(h, noise_variance, rng, false)?;
    let observed = statistic(&nh, p0, kind)?;

    let n = h.n();
    let mut replicates = Vec::with_capacity(m);
    for i in 0..m {
        let mut sub = rng.substream(i as u64);
        let counts = sample_multinomial(n, p0, &mut sub)?;
        let rep = laplace_mechanism_with_variance(&counts, noise_variance, &mut sub, false)?;
        replicates.push(statistic(&rep, p0, kind)?.value);
    }
    let threshold = mc_critical_value(&replicates, alpha)?;
    Ok(TestReport::from_comparison(observed, threshold, alpha, Some(m)))
}
