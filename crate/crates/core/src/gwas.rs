//! Case/control association testing on 3x2 tables with an even split:
//! n/2 cases and n/2 controls. The classical Pearson statistic has global
//! sensitivity 4n/(n+2) under that shape, so a single draw of Gaussian
//! noise on the statistic itself gives a zCDP release (output
//! perturbation). The reference distribution of the noisy statistic is
//! the independent sum of a chi-square and the added Gaussian.

use crate::error::{Error, Result};
use crate::report::{Decision, GofStatistic, StatKind, TestReport};
use crate::rng::RngStream;
use crate::specfun::{chi2_cdf, chi2_quantile, ChiSquareSpec};
use crate::table::ContingencyTable;
use rand_distr::{Distribution, Normal};

/// Pearson chi-square statistic: sum (X_ij - E_ij)^2 / E_ij with
/// E_ij = (row margin * column margin) / n.
pub fn pearson_statistic(table: &ContingencyTable) -> Result<f64> {
    let rows = table.row_margins();
    let cols = table.col_margins();
    if rows.iter().chain(&cols).any(|&m| m == 0) {
        return Err(Error::DegenerateTable(
            "every row and column margin must be positive".into(),
        ));
    }
    let n = table.n() as f64;
    let mut q = 0.0;
    for i in 0..table.rows() {
        for j in 0..table.cols() {
            let e = rows[i] as f64 * cols[j] as f64 / n;
            let diff = table.get(i, j) as f64 - e;
            q += diff * diff / e;
        }
    }
    Ok(q)
}

/// Global sensitivity (both l1 and l2) of the Pearson statistic on 3x2
/// tables with exactly n/2 cases and n/2 controls: 4n/(n+2).
pub fn gwas_sensitivity(n: u64) -> Result<f64> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::domain(
            "the sensitivity bound requires an even total of at least 2",
        ));
    }
    let n = n as f64;
    Ok(4.0 * n / (n + 2.0))
}

/// Upper tail of chi2_df + N(0, sigma^2) at tau, by Simpson quadrature of
/// the Gaussian-smoothed chi-square survival function over 8 sigma.
fn mixture_tail(df: u32, sigma: f64, tau: f64) -> Result<f64> {
    let spec = ChiSquareSpec::central(df)?;
    if sigma == 0.0 {
        return Ok(if tau <= 0.0 { 1.0 } else { 1.0 - chi2_cdf(spec, tau)? });
    }
    // integrand(z) = P[chi2 > tau - z] phi_sigma(z); tails beyond 8 sigma
    // carry < 1e-15 mass.
    let steps = 4000usize;
    let lo = -8.0 * sigma;
    let h = 16.0 * sigma / steps as f64;
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let f = |z: f64| -> Result<f64> {
        let x = tau - z;
        let surv = if x <= 0.0 { 1.0 } else { 1.0 - chi2_cdf(spec, x)? };
        Ok(surv * norm * (-z * z / (2.0 * sigma * sigma)).exp())
    };
    let mut acc = f(lo)? + f(lo + 16.0 * sigma)?;
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h)?;
    }
    Ok(acc * h / 3.0)
}

/// Critical value tau solving P[chi2_df + N(0, sigma^2) > tau] = alpha,
/// to 1e-6 in probability.
pub fn gauss_mixture_critical_value(df: u32, sigma: f64, alpha: f64) -> Result<f64> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::domain("sigma must be nonnegative"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("alpha must lie in (0, 1)"));
    }
    let quantile = chi2_quantile(ChiSquareSpec::central(df)?, 1.0 - alpha)?;
    if sigma == 0.0 {
        return Ok(quantile);
    }
    // The tail is strictly decreasing in tau; bracket around the
    // noise-free quantile and bisect.
    let mut lo = -9.0 * sigma;
    let mut hi = quantile + 9.0 * sigma;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mixture_tail(df, sigma, mid)? > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * (1.0 + hi.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn validate_case_control(table: &ContingencyTable) -> Result<u64> {
    if table.rows() != 3 || table.cols() != 2 {
        return Err(Error::Shape("expected a 3x2 case/control table".into()));
    }
    let n = table.n();
    let cols = table.col_margins();
    if n % 2 != 0 || cols[0] != n / 2 || cols[1] != n / 2 {
        return Err(Error::domain(
            "the sensitivity bound requires exactly n/2 cases and n/2 controls",
        ));
    }
    Ok(n)
}

/// Output perturbation under rho-zCDP: release q + N(0, sigma^2) with
/// sigma^2 = sensitivity^2 / (2 rho), and reject when the noisy statistic
/// exceeds the alpha critical value of chi2_2 + N(0, sigma^2).
pub fn output_perturbation_test(
    table: &ContingencyTable,
    rho: f64,
    alpha: f64,
    rng: &mut RngStream,
) -> Result<TestReport> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain("rho must be positive"));
    }
    let n = validate_case_control(table)?;
    let sigma2 = gwas_sensitivity(n)?.powi(2) / (2.0 * rho);
    let sigma = sigma2.sqrt();
    let threshold = gauss_mixture_critical_value(2, sigma, alpha)?;
    output_perturbation_with_threshold(table, sigma, threshold, alpha, rng)
}

/// Same test with the critical value supplied by the caller, so sweeps
/// over many tables at one (n, rho, alpha) can compute it once.
pub fn output_perturbation_with_threshold(
    table: &ContingencyTable,
    sigma: f64,
    threshold: f64,
    alpha: f64,
    rng: &mut RngStream,
) -> Result<TestReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("alpha must lie in (0, 1)"));
    }
    validate_case_control(table)?;
    let q = pearson_statistic(table)?;
    let noise = Normal::new(0.0, sigma)
        .map_err(|_| Error::domain("sigma must be nonnegative"))?
        .sample(rng);
    let value = q + noise;
    let statistic = GofStatistic {
        // The released value is not a quadratic form and can go negative;
        // df refers to the chi-square part of the reference mixture.
        kind: StatKind::Unprojected,
        value,
        df: 2,
        centered: vec![],
    };
    let decision = if value > threshold {
        Decision::Reject
    } else {
        Decision::FailToReject
    };
    Ok(TestReport {
        statistic,
        threshold,
        alpha,
        decision,
        mc_samples_used: None,
        minimizer_converged: true,
    })
}
