//! Minimum chi-square tests for composite nulls: the null is a parametric
//! family p(theta), the statistic is the noisy quadratic form minimized
//! over theta with the middle matrix held fixed at a plug-in estimate,
//! and the reference distribution loses one degree of freedom per free
//! parameter.
//!
//! Shipped models: the zero-parameter constant null (which makes every
//! operation here reduce exactly to the goodness-of-fit module) and the
//! r x c independence model.

use crate::covariance::validate_null;
use crate::error::{Error, Result};
use crate::gof::{closed_form_quadratic, mc_critical_value, projection_correction};
use crate::mechanisms::{
    gaussian_mechanism, laplace_mechanism_with_variance, laplace_variance, sample_multinomial,
    Histogram, NoisyHistogram,
};
use crate::report::{Decision, GofStatistic, StatKind, TestReport};
use crate::rng::RngStream;
use crate::specfun::{chi2_quantile, ChiSquareSpec};

const MARGINAL_FLOOR: f64 = 1e-6;

/// Naive parameter estimate from the noisy histogram, used both as the
/// plug-in for the middle matrix and as the minimizer's starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveEstimate {
    pub theta: Vec<f64>,
    /// True when any pre-clamp value fell outside (0, 1); the
    /// independence small-cell rule then reports Inconclusive.
    pub floor_hit: bool,
}

type ProbMap = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type NaiveEstimator = Box<dyn Fn(&NoisyHistogram) -> NaiveEstimate + Send + Sync>;
type InconclusiveCheck = Box<dyn Fn(u64, &NaiveEstimate) -> bool + Send + Sync>;

/// A parametric null family: theta in a box maps to a probability vector
/// over d cells through `prob_map`; `naive_estimator` produces the
/// plug-in theta from the noisy data.
pub struct ParametricModel {
    d: usize,
    k: usize,
    label: String,
    prob_map: ProbMap,
    naive_estimator: NaiveEstimator,
    bounds: Vec<(f64, f64)>,
    inconclusive_check: Option<InconclusiveCheck>,
}

impl ParametricModel {
    pub fn new(
        d: usize,
        k: usize,
        label: impl Into<String>,
        prob_map: ProbMap,
        naive_estimator: NaiveEstimator,
        bounds: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if k >= d {
            return Err(Error::domain("model must have fewer parameters than cells"));
        }
        if bounds.len() != k {
            return Err(Error::Shape("one bound pair per free parameter".into()));
        }
        Ok(ParametricModel {
            d,
            k,
            label: label.into(),
            prob_map,
            naive_estimator,
            bounds,
            inconclusive_check: None,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn probabilities(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.k {
            return Err(Error::Shape(format!(
                "model {} takes {} parameters, got {}",
                self.label,
                self.k,
                theta.len()
            )));
        }
        let p = (self.prob_map)(theta);
        debug_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        Ok(p)
    }

    pub fn naive_estimate(&self, nh: &NoisyHistogram) -> NaiveEstimate {
        let mut est = (self.naive_estimator)(nh);
        for (t, &(lo, hi)) in est.theta.iter_mut().zip(&self.bounds) {
            *t = t.clamp(lo, hi);
        }
        est
    }

    fn clamp(&self, theta: &mut [f64]) {
        for (t, &(lo, hi)) in theta.iter_mut().zip(&self.bounds) {
            *t = t.clamp(lo, hi);
        }
    }

    fn is_inconclusive(&self, n: u64, est: &NaiveEstimate) -> bool {
        self.inconclusive_check
            .as_ref()
            .is_some_and(|check| check(n, est))
    }
}

impl std::fmt::Debug for ParametricModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParametricModel")
            .field("d", &self.d)
            .field("k", &self.k)
            .field("label", &self.label)
            .finish()
    }
}

/// The zero-parameter model fixing the null at p0. The naive estimator
/// is constant and the minimization is a no-op, so tests built on this
/// model coincide with the goodness-of-fit tests.
pub fn constant_model(p0: &[f64]) -> Result<ParametricModel> {
    validate_null(p0)?;
    let p = p0.to_vec();
    ParametricModel::new(
        p0.len(),
        0,
        "constant",
        Box::new(move |_| p.clone()),
        Box::new(|_| NaiveEstimate {
            theta: vec![],
            floor_hit: false,
        }),
        vec![],
    )
}

/// True when any expected cell count n * pi1_i * pi2_j is at most 5.
pub fn small_cell_check(n: u64, pi1: &[f64], pi2: &[f64]) -> bool {
    pi1.iter()
        .any(|&a| pi2.iter().any(|&b| n as f64 * a * b <= 5.0))
}

/// Rebuild a full marginal from its first len-1 entries, enforcing the
/// floor and a unit sum.
fn complete_marginal(free: &[f64]) -> Vec<f64> {
    let mut full: Vec<f64> = free.to_vec();
    full.push(1.0 - free.iter().sum::<f64>());
    if full.iter().any(|&v| v < MARGINAL_FLOOR) {
        for v in full.iter_mut() {
            *v = v.max(MARGINAL_FLOOR);
        }
        let sum: f64 = full.iter().sum();
        for v in full.iter_mut() {
            *v /= sum;
        }
    }
    full
}

pub(crate) fn independence_marginals(theta: &[f64], r: usize, c: usize) -> (Vec<f64>, Vec<f64>) {
    (
        complete_marginal(&theta[..r - 1]),
        complete_marginal(&theta[r - 1..r + c - 2]),
    )
}

/// Clamp a noisy marginal into [floor, 1-floor] and renormalize;
/// reports whether any raw value was already outside (0, 1).
fn clamp_marginal(raw: &[f64]) -> (Vec<f64>, bool) {
    let hit = raw.iter().any(|&v| v <= 0.0 || v >= 1.0);
    let mut clamped: Vec<f64> = raw
        .iter()
        .map(|&v| v.clamp(MARGINAL_FLOOR, 1.0 - MARGINAL_FLOOR))
        .collect();
    let sum: f64 = clamped.iter().sum();
    for v in clamped.iter_mut() {
        *v /= sum;
    }
    (clamped, hit)
}

/// The r x c independence model: theta holds the first r-1 row-marginal
/// and c-1 column-marginal probabilities, p(theta) is their outer product
/// flattened row-major, and the naive estimator reads noisy marginals
/// over the noisy total.
pub fn independence_model(r: usize, c: usize) -> Result<ParametricModel> {
    if r < 2 || c < 2 {
        return Err(Error::domain("independence model needs r >= 2 and c >= 2"));
    }
    let d = r * c;
    let k = r + c - 2;
    let prob_map: ProbMap = Box::new(move |theta: &[f64]| {
        let (pi1, pi2) = independence_marginals(theta, r, c);
        let mut p = Vec::with_capacity(d);
        for &a in &pi1 {
            for &b in &pi2 {
                p.push(a * b);
            }
        }
        p
    });
    let naive: NaiveEstimator = Box::new(move |nh: &NoisyHistogram| {
        let total = nh.noisy_total;
        // A nonpositive noisy total leaves no usable marginals; fall back
        // to uniform and let the floor flag force Inconclusive.
        if !(total > 0.0) {
            let mut theta = vec![1.0 / r as f64; r - 1];
            theta.extend(vec![1.0 / c as f64; c - 1]);
            return NaiveEstimate {
                theta,
                floor_hit: true,
            };
        }
        let mut row = vec![0.0; r];
        let mut col = vec![0.0; c];
        for i in 0..r {
            for j in 0..c {
                row[i] += nh.values[i * c + j];
                col[j] += nh.values[i * c + j];
            }
        }
        for v in row.iter_mut().chain(col.iter_mut()) {
            *v /= total;
        }
        let (pi1, hit1) = clamp_marginal(&row);
        let (pi2, hit2) = clamp_marginal(&col);
        let mut theta = pi1[..r - 1].to_vec();
        theta.extend_from_slice(&pi2[..c - 1]);
        NaiveEstimate {
            theta,
            floor_hit: hit1 || hit2,
        }
    });
    let mut model = ParametricModel::new(
        d,
        k,
        format!("independence-{r}x{c}"),
        prob_map,
        naive,
        vec![(MARGINAL_FLOOR, 1.0 - MARGINAL_FLOOR); k],
    )?;
    model.inconclusive_check = Some(Box::new(move |n, est: &NaiveEstimate| {
        let (pi1, pi2) = independence_marginals(&est.theta, r, c);
        est.floor_hit || small_cell_check(n, &pi1, &pi2)
    }));
    Ok(model)
}

/// Statistic value at a given theta, with the middle matrix fixed at the
/// plug-in probabilities q = p(naive theta). When q equals p(theta) and
/// the model is constant this is exactly the goodness-of-fit statistic.
fn statistic_at(nh: &NoisyHistogram, q: &[f64], p_theta: &[f64], kind: StatKind) -> f64 {
    let n = nh.n as f64;
    let root_n = n.sqrt();
    let s = nh.noise_variance / n;
    let u: Vec<f64> = nh
        .values
        .iter()
        .zip(p_theta)
        .map(|(&x, &p)| root_n * (x / n - p))
        .collect();
    let value = closed_form_quadratic(&u, q, s);
    match kind {
        StatKind::Unprojected => value,
        StatKind::Projected => (value - projection_correction(&u, s)).max(0.0),
    }
}

/// R(theta) = U(theta)^T M U(theta) with M the plug-in inverse of
/// Sigma(p(phi(X))) + (v/n) I, optionally sandwiched by the centering
/// projection.
pub fn general_statistic(
    nh: &NoisyHistogram,
    model: &ParametricModel,
    theta: &[f64],
    kind: StatKind,
) -> Result<f64> {
    if nh.values.len() != model.d() {
        return Err(Error::Shape(format!(
            "model {} has {} cells, histogram {}",
            model.label(),
            model.d(),
            nh.values.len()
        )));
    }
    if !(nh.noise_variance > 0.0) {
        return Err(Error::domain("noise variance must be positive"));
    }
    let plug = model.naive_estimate(nh);
    let q = model.probabilities(&plug.theta)?;
    let p_theta = model.probabilities(theta)?;
    Ok(statistic_at(nh, &q, &p_theta, kind))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizationResult {
    pub theta_hat: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const NM_MAX_EVALS: usize = 10_000;
const NM_DIAMETER_TOL: f64 = 1e-10;

/// Derivative-free Nelder-Mead minimization over the model's box, every
/// candidate clamped into feasibility before evaluation. Deterministic.
fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
) -> MinimizationResult {
    let k = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &mut Vec<f64>, evals: &mut usize| {
        for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
            *v = v.clamp(lo, hi);
        }
        *evals += 1;
        f(x)
    };

    // Initial simplex: x0 plus a step along each axis, stepping inward
    // when the box edge is close.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    let mut start = x0.to_vec();
    let f0 = eval(&mut start, &mut evals);
    simplex.push((start.clone(), f0));
    for i in 0..k {
        let mut x = start.clone();
        let step = 0.05f64.min((bounds[i].1 - bounds[i].0) / 4.0);
        x[i] = if x[i] + step <= bounds[i].1 {
            x[i] + step
        } else {
            x[i] - step
        };
        let fx = eval(&mut x, &mut evals);
        simplex.push((x, fx));
    }

    let mut best = simplex[0].clone();
    loop {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        if simplex[0].1 < best.1 {
            best = simplex[0].clone();
        }
        let diameter = simplex
            .iter()
            .flat_map(|(x, _)| {
                simplex.iter().map(move |(y, _)| {
                    x.iter()
                        .zip(y)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
            })
            .fold(0.0, f64::max);
        if diameter < NM_DIAMETER_TOL {
            return MinimizationResult {
                theta_hat: best.0,
                value: best.1,
                iterations: evals,
                converged: true,
            };
        }
        if evals >= NM_MAX_EVALS {
            return MinimizationResult {
                theta_hat: best.0,
                value: best.1,
                iterations: evals,
                converged: false,
            };
        }

        let centroid: Vec<f64> = (0..k)
            .map(|i| simplex[..k].iter().map(|(x, _)| x[i]).sum::<f64>() / k as f64)
            .collect();
        let worst = simplex[k].clone();

        let mut reflect: Vec<f64> = centroid
            .iter()
            .zip(&worst.0)
            .map(|(c, w)| c + (c - w))
            .collect();
        let fr = eval(&mut reflect, &mut evals);

        if fr < simplex[0].1 {
            let mut expand: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + 2.0 * (c - w))
                .collect();
            let fe = eval(&mut expand, &mut evals);
            simplex[k] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[k - 1].1 {
            simplex[k] = (reflect, fr);
        } else {
            let mut contract: Vec<f64> = if fr < worst.1 {
                centroid
                    .iter()
                    .zip(&reflect)
                    .map(|(c, r)| c + 0.5 * (r - c))
                    .collect()
            } else {
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| c + 0.5 * (w - c))
                    .collect()
            };
            let fc = eval(&mut contract, &mut evals);
            if fc < worst.1.min(fr) {
                simplex[k] = (contract, fc);
            } else {
                // Shrink toward the best vertex.
                let anchor = simplex[0].0.clone();
                for (x, fx) in simplex.iter_mut().skip(1) {
                    for (v, a) in x.iter_mut().zip(&anchor) {
                        *v = a + 0.5 * (*v - a);
                    }
                    *fx = eval(x, &mut evals);
                }
            }
        }
    }
}

/// Minimize the statistic over theta starting from the naive estimate.
/// The returned value never exceeds the starting value.
pub fn minimize_statistic(
    nh: &NoisyHistogram,
    model: &ParametricModel,
    kind: StatKind,
) -> Result<MinimizationResult> {
    let plug = model.naive_estimate(nh);
    let q = model.probabilities(&plug.theta)?;
    if model.k() == 0 {
        return Ok(MinimizationResult {
            theta_hat: vec![],
            value: statistic_at(nh, &q, &q, kind),
            iterations: 1,
            converged: true,
        });
    }
    let objective = |theta: &[f64]| {
        let p_theta = (model.prob_map)(theta);
        statistic_at(nh, &q, &p_theta, kind)
    };
    let mut result = nelder_mead(objective, &plug.theta, &model.bounds);
    model.clamp(&mut result.theta_hat);
    Ok(result)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("alpha must lie in (0, 1)"));
    }
    Ok(())
}

fn df_for(model: &ParametricModel, kind: StatKind) -> u32 {
    let base = (model.d() - model.k()) as u32;
    match kind {
        StatKind::Unprojected => base,
        StatKind::Projected => base - 1,
    }
}

fn build_report(
    value: f64,
    df: u32,
    kind: StatKind,
    threshold: f64,
    alpha: f64,
    inconclusive: bool,
    mc_samples: Option<usize>,
    converged: bool,
) -> TestReport {
    let statistic = GofStatistic {
        kind,
        value,
        df,
        centered: vec![],
    };
    let mut report = TestReport::from_comparison(statistic, threshold, alpha, mc_samples);
    if inconclusive {
        report.decision = Decision::Inconclusive;
    }
    report.minimizer_converged = converged;
    report
}

/// Asymptotic minimum chi-square test under zCDP: Gaussian noise,
/// minimized statistic against the chi-square quantile on d-k (or
/// d-k-1 projected) degrees of freedom. Independence models report
/// Inconclusive when the small-cell rule fires.
pub fn zcdp_min_chi2_test(
    h: &Histogram,
    rho: f64,
    alpha: f64,
    model: &ParametricModel,
    kind: StatKind,
    rng: &mut RngStream,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let nh = gaussian_mechanism(h, rho, rng, false)?;
    let plug = model.naive_estimate(&nh);
    let inconclusive = model.is_inconclusive(nh.n, &plug);
    let min = minimize_statistic(&nh, model, kind)?;
    let df = df_for(model, kind);
    let threshold = chi2_quantile(ChiSquareSpec::central(df)?, 1.0 - alpha)?;
    Ok(build_report(
        min.value,
        df,
        kind,
        threshold,
        alpha,
        inconclusive,
        None,
        min.converged,
    ))
}

/// Knobs for the Monte-Carlo test. `reestimate` controls whether each
/// null replicate re-runs the full estimate-and-minimize pipeline
/// (default) or evaluates at the observed theta-hat. `noise_variance`
/// overrides the Laplace variance implied by epsilon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub reestimate: bool,
    pub noise_variance: Option<f64>,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            reestimate: true,
            noise_variance: None,
        }
    }
}

/// Monte-Carlo minimum chi-square test under pure DP: Laplace noise of
/// variance 8/epsilon^2, threshold from m null replicates drawn at the
/// fitted theta-hat, strict-inequality rejection.
pub fn dp_mc_min_test(
    h: &Histogram,
    epsilon: f64,
    alpha: f64,
    model: &ParametricModel,
    kind: StatKind,
    m: usize,
    rng: &mut RngStream,
) -> Result<TestReport> {
    dp_mc_min_test_with_options(h, epsilon, alpha, model, kind, m, rng, McOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn dp_mc_min_test_with_options(
    h: &Histogram,
    epsilon: f64,
    alpha: f64,
    model: &ParametricModel,
    kind: StatKind,
    m: usize,
    rng: &mut RngStream,
    options: McOptions,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let needed = (1.0 / alpha).ceil() as usize - 1;
    if m < needed {
        return Err(Error::InsufficientSamples { needed, got: m });
    }
    let variance = match options.noise_variance {
        Some(v) if v > 0.0 && v.is_finite() => v,
        Some(_) => return Err(Error::domain("noise variance override must be positive")),
        None => laplace_variance(epsilon)?,
    };
    let nh = laplace_mechanism_with_variance(h, variance, rng, false)?;
    let plug = model.naive_estimate(&nh);
    let inconclusive = model.is_inconclusive(nh.n, &plug);
    let min = minimize_statistic(&nh, model, kind)?;
    let p_hat = model.probabilities(&min.theta_hat)?;

    let n = h.n();
    let mut converged = min.converged;
    let mut replicates = Vec::with_capacity(m);
    for i in 0..m {
        let mut sub = rng.substream(i as u64);
        let counts = sample_multinomial(n, &p_hat, &mut sub)?;
        let rep = laplace_mechanism_with_variance(&counts, variance, &mut sub, false)?;
        let value = if options.reestimate {
            let rep_min = minimize_statistic(&rep, model, kind)?;
            converged &= rep_min.converged;
            rep_min.value
        } else {
            general_statistic(&rep, model, &min.theta_hat, kind)?
        };
        replicates.push(value);
    }
    let threshold = mc_critical_value(&replicates, alpha)?;
    Ok(build_report(
        min.value,
        df_for(model, kind),
        kind,
        threshold,
        alpha,
        inconclusive,
        Some(m),
        converged,
    ))
}
