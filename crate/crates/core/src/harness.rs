//! Simulation engine: sweep a test over a grid of sample sizes, run many
//! independent trials per size, and report rejection rates with standard
//! errors, optionally next to the analytic power prediction.
//!
//! Each trial owns a dedicated RNG stream keyed by (master seed, grid
//! index, trial index), so results are independent of worker count and
//! evaluation order.

use crate::error::{Error, Result};
use crate::gof::{self, closed_form_quadratic};
use crate::gwas;
use crate::mechanisms::{sample_multinomial, Histogram, PrivacyBudget};
use crate::minchi::{self, independence_model, ParametricModel};
use crate::report::{Decision, StatKind};
use crate::rng::RngStream;
use crate::specfun::{chi2_cdf, chi2_quantile, ChiSquareSpec};
use crate::table::ContingencyTable;
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestId {
    ZcdpGof,
    McGof,
    ZcdpIndep,
    McIndep,
    GwasOutputPert,
    GwasProj,
}

impl TestId {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "zcdp-gof" => TestId::ZcdpGof,
            "mc-gof" => TestId::McGof,
            "zcdp-indep" => TestId::ZcdpIndep,
            "mc-indep" => TestId::McIndep,
            "gwas-output-pert" => TestId::GwasOutputPert,
            "gwas-proj" => TestId::GwasProj,
            other => return Err(Error::Config(format!("unknown test id `{other}`"))),
        })
    }
}

/// Which statistic variant an experiment arm runs. The classical arm is
/// the noise-free Pearson test, the reference curve private tests are
/// compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    Projected,
    Unprojected,
    NonPrivateClassical,
}

impl Arm {
    fn stat_kind(self) -> Option<StatKind> {
        match self {
            Arm::Projected => Some(StatKind::Projected),
            Arm::Unprojected => Some(StatKind::Unprojected),
            Arm::NonPrivateClassical => None,
        }
    }
}

/// The null hypothesis a sweep tests against. Case/control fixes an even
/// split with per-column category distributions, as in the GWAS setting.
#[derive(Debug, Clone, PartialEq)]
pub enum NullSpec {
    Multinomial(Vec<f64>),
    Independence { pi1: Vec<f64>, pi2: Vec<f64> },
    CaseControl { case: Vec<f64>, control: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub test_id: TestId,
    pub arm: Arm,
    pub null: NullSpec,
    /// Added to the sampling distribution (to the case column for
    /// case/control nulls); must sum to zero. All-zero reproduces H0.
    pub alternative_offset: Vec<f64>,
    pub n_grid: Vec<u64>,
    pub trials: u64,
    pub alpha: f64,
    pub budget: PrivacyBudget,
    /// Monte-Carlo replicates for the MC tests.
    pub m: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub n: u64,
    pub trials: u64,
    pub rejections: u64,
    pub inconclusive: u64,
    pub rate: f64,
    pub se: f64,
    pub analytic_power: Option<f64>,
}

impl ExperimentConfig {
    fn rho(&self) -> f64 {
        match self.budget {
            PrivacyBudget::Zcdp { rho } => rho,
            PrivacyBudget::PureDp { epsilon } => epsilon * epsilon / 2.0,
        }
    }

    fn epsilon(&self) -> f64 {
        match self.budget {
            PrivacyBudget::PureDp { epsilon } => epsilon,
            PrivacyBudget::Zcdp { rho } => (2.0 * rho).sqrt(),
        }
    }

    /// Flattened null probability vector (row-major for tables).
    fn null_probabilities(&self) -> Vec<f64> {
        match &self.null {
            NullSpec::Multinomial(p) => p.clone(),
            NullSpec::Independence { pi1, pi2 } => {
                let mut p = Vec::with_capacity(pi1.len() * pi2.len());
                for &a in pi1 {
                    for &b in pi2 {
                        p.push(a * b);
                    }
                }
                p
            }
            NullSpec::CaseControl { case, control } => {
                // Cell (i, j): category i, column j; each column holds
                // half the mass.
                let mut p = Vec::with_capacity(case.len() * 2);
                for i in 0..case.len() {
                    p.push(0.5 * case[i]);
                    p.push(0.5 * control[i]);
                }
                p
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.iter().any(|&n| n == 0) {
            return Err(Error::Config("n grid must hold positive sizes".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("alpha must lie in (0, 1)".into()));
        }
        let dist = |p: &[f64], label: &str| -> Result<()> {
            if p.iter().any(|&v| !(v > 0.0) || !v.is_finite())
                || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9
            {
                return Err(Error::Config(format!(
                    "{label} must be a strictly positive distribution"
                )));
            }
            Ok(())
        };
        let offset_len = match &self.null {
            NullSpec::Multinomial(p) => {
                dist(p, "null")?;
                p.len()
            }
            NullSpec::Independence { pi1, pi2 } => {
                dist(pi1, "row marginal")?;
                dist(pi2, "column marginal")?;
                pi1.len() * pi2.len()
            }
            NullSpec::CaseControl { case, control } => {
                dist(case, "case column")?;
                dist(control, "control column")?;
                if case.len() != control.len() {
                    return Err(Error::Config("case and control need equal length".into()));
                }
                case.len()
            }
        };
        if self.alternative_offset.len() != offset_len {
            return Err(Error::Config(format!(
                "offset length {} does not match the null ({offset_len})",
                self.alternative_offset.len()
            )));
        }
        if self.alternative_offset.iter().sum::<f64>().abs() > 1e-9 {
            return Err(Error::Config("alternative offset must sum to zero".into()));
        }
        let shifted: Vec<f64> = match &self.null {
            NullSpec::CaseControl { case, .. } => case
                .iter()
                .zip(&self.alternative_offset)
                .map(|(a, b)| a + b)
                .collect(),
            _ => self
                .null_probabilities()
                .iter()
                .zip(&self.alternative_offset)
                .map(|(a, b)| a + b)
                .collect(),
        };
        if shifted.iter().any(|&v| v < 0.0 || v > 1.0) {
            return Err(Error::Config(
                "null plus offset leaves the probability simplex".into(),
            ));
        }
        match self.test_id {
            TestId::ZcdpIndep | TestId::McIndep => {
                if !matches!(self.null, NullSpec::Independence { .. }) {
                    return Err(Error::Config(
                        "independence tests need an independence null".into(),
                    ));
                }
            }
            TestId::GwasOutputPert | TestId::GwasProj => {
                match &self.null {
                    NullSpec::CaseControl { case, .. } if case.len() == 3 => {}
                    _ => {
                        return Err(Error::Config(
                            "GWAS tests need a 3-category case/control null".into(),
                        ))
                    }
                }
                if self.n_grid.iter().any(|&n| n % 2 != 0) {
                    return Err(Error::Config("GWAS grid sizes must be even".into()));
                }
            }
            TestId::ZcdpGof | TestId::McGof => {
                if !matches!(self.null, NullSpec::Multinomial(_)) {
                    return Err(Error::Config("GOF tests need a multinomial null".into()));
                }
            }
        }
        Ok(())
    }
}

/// Classical Pearson goodness-of-fit statistic on raw counts.
fn classical_gof_statistic(h: &Histogram, p0: &[f64]) -> f64 {
    let n = h.n() as f64;
    h.counts()
        .iter()
        .zip(p0)
        .map(|(&x, &p)| {
            let e = n * p;
            let diff = x as f64 - e;
            diff * diff / e
        })
        .sum()
}

/// Per-grid-size constants computed once and shared across trials.
struct TrialContext<'a> {
    cfg: &'a ExperimentConfig,
    n: u64,
    sampling: Vec<f64>,
    null_p: Vec<f64>,
    model: Option<ParametricModel>,
    classical_threshold: f64,
    /// Output-perturbation noise level and critical value (GWAS only).
    gwas_sigma: f64,
    gwas_threshold: f64,
}

fn trial_outcome(ctx: &TrialContext<'_>, rng: &mut RngStream) -> Result<Decision> {
    let cfg = ctx.cfg;
    let alpha = cfg.alpha;

    // Case/control draws fix the two column totals at n/2.
    let histogram = match &cfg.null {
        NullSpec::CaseControl { control, .. } => {
            let case_col = sample_multinomial(ctx.n / 2, &ctx.sampling, rng)?;
            let control_col = sample_multinomial(ctx.n / 2, control, rng)?;
            let mut cells = Vec::with_capacity(ctx.sampling.len() * 2);
            for i in 0..ctx.sampling.len() {
                cells.push(case_col.counts()[i]);
                cells.push(control_col.counts()[i]);
            }
            Histogram::new(cells)?
        }
        _ => sample_multinomial(ctx.n, &ctx.sampling, rng)?,
    };

    if cfg.arm == Arm::NonPrivateClassical {
        let value = match cfg.test_id {
            TestId::ZcdpGof | TestId::McGof => classical_gof_statistic(&histogram, &ctx.null_p),
            _ => {
                let cols = if matches!(cfg.null, NullSpec::CaseControl { .. }) {
                    2
                } else {
                    match &cfg.null {
                        NullSpec::Independence { pi2, .. } => pi2.len(),
                        _ => unreachable!(),
                    }
                };
                let rows = histogram.d() / cols;
                let table =
                    ContingencyTable::from_flat(rows, cols, histogram.counts().to_vec())?;
                gwas::pearson_statistic(&table)?
            }
        };
        return Ok(if value > ctx.classical_threshold {
            Decision::Reject
        } else {
            Decision::FailToReject
        });
    }

    let kind = cfg.arm.stat_kind().expect("private arms carry a statistic kind");
    let report = match cfg.test_id {
        TestId::ZcdpGof => {
            gof::zcdp_gof_test(&histogram, cfg.rho(), alpha, &ctx.null_p, kind, rng)?
        }
        TestId::McGof => gof::dp_mc_gof_test(
            &histogram,
            cfg.epsilon(),
            alpha,
            &ctx.null_p,
            kind,
            cfg.m,
            rng,
        )?,
        TestId::ZcdpIndep | TestId::GwasProj => {
            let model = ctx.model.as_ref().expect("model built in context");
            minchi::zcdp_min_chi2_test(&histogram, cfg.rho(), alpha, model, kind, rng)?
        }
        TestId::McIndep => {
            let model = ctx.model.as_ref().expect("model built in context");
            minchi::dp_mc_min_test(&histogram, cfg.epsilon(), alpha, model, kind, cfg.m, rng)?
        }
        TestId::GwasOutputPert => {
            let table =
                ContingencyTable::from_flat(3, 2, histogram.counts().to_vec())?;
            gwas::output_perturbation_with_threshold(
                &table,
                ctx.gwas_sigma,
                ctx.gwas_threshold,
                alpha,
                rng,
            )?
        }
    };
    Ok(report.decision)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    run_experiment_with_workers(cfg, None)
}

/// Run with an explicit worker count. The output is byte-identical for
/// any worker count, including 1.
pub fn run_experiment_with_workers(
    cfg: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    let sampling: Vec<f64> = match &cfg.null {
        // Case/control offsets shift the case column distribution.
        NullSpec::CaseControl { case, .. } => case
            .iter()
            .zip(&cfg.alternative_offset)
            .map(|(a, b)| a + b)
            .collect(),
        _ => cfg
            .null_probabilities()
            .iter()
            .zip(&cfg.alternative_offset)
            .map(|(a, b)| a + b)
            .collect(),
    };
    let null_p = cfg.null_probabilities();

    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for (ni, &n) in cfg.n_grid.iter().enumerate() {
        let model = match cfg.test_id {
            TestId::ZcdpIndep | TestId::McIndep => match &cfg.null {
                NullSpec::Independence { pi1, pi2 } => {
                    Some(independence_model(pi1.len(), pi2.len())?)
                }
                _ => None,
            },
            TestId::GwasProj => Some(independence_model(3, 2)?),
            _ => None,
        };
        let classical_df = match (&cfg.test_id, &cfg.null) {
            (TestId::ZcdpGof | TestId::McGof, NullSpec::Multinomial(p)) => p.len() as u32 - 1,
            (_, NullSpec::Independence { pi1, pi2 }) => {
                (pi1.len() as u32 - 1) * (pi2.len() as u32 - 1)
            }
            (_, NullSpec::CaseControl { .. }) => 2,
            _ => 1,
        };
        let classical_threshold =
            chi2_quantile(ChiSquareSpec::central(classical_df)?, 1.0 - cfg.alpha)?;
        let (gwas_sigma, gwas_threshold) = if cfg.test_id == TestId::GwasOutputPert
            && cfg.arm != Arm::NonPrivateClassical
        {
            let sigma = (gwas::gwas_sensitivity(n)?.powi(2) / (2.0 * cfg.rho())).sqrt();
            (sigma, gwas::gauss_mixture_critical_value(2, sigma, cfg.alpha)?)
        } else {
            (0.0, 0.0)
        };
        let ctx = TrialContext {
            cfg,
            n,
            sampling: sampling.clone(),
            null_p: null_p.clone(),
            model,
            classical_threshold,
            gwas_sigma,
            gwas_threshold,
        };

        let (rejections, inconclusive) = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|trial| {
                    let mut rng =
                        RngStream::new(cfg.master_seed, ((ni as u64) << 32) | trial);
                    match trial_outcome(&ctx, &mut rng) {
                        Ok(Decision::Reject) => Ok((1u64, 0u64)),
                        Ok(Decision::FailToReject) => Ok((0, 0)),
                        Ok(Decision::Inconclusive) => Ok((0, 1)),
                        Err(e) => Err(e),
                    }
                })
                .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))
        })?;

        let rate = rejections as f64 / cfg.trials as f64;
        let analytic = match (cfg.test_id, cfg.arm.stat_kind()) {
            (TestId::ZcdpGof, Some(kind)) => Some(analytic_power(
                &null_p,
                &sampling,
                n,
                cfg.rho(),
                cfg.alpha,
                kind,
            )?),
            _ => None,
        };
        rows.push(ExperimentRow {
            n,
            trials: cfg.trials,
            rejections,
            inconclusive,
            rate,
            se: (rate * (1.0 - rate) / cfg.trials as f64).sqrt(),
            analytic_power: analytic,
        });
    }
    Ok(rows)
}

/// Predicted power of the zCDP goodness-of-fit test against a fixed
/// alternative p1, from the noncentral chi-square limit: noncentrality
/// n (p1-p0)^T (Sigma + I/(n rho))^-1 (p1-p0), with the covariance taken
/// at the null (local-alternative convention).
pub fn analytic_power(
    p0: &[f64],
    p1: &[f64],
    n: u64,
    rho: f64,
    alpha: f64,
    kind: StatKind,
) -> Result<f64> {
    if p0.len() != p1.len() {
        return Err(Error::Shape("p0 and p1 must have equal length".into()));
    }
    let delta_sum: f64 = p1.iter().zip(p0).map(|(a, b)| a - b).sum();
    if delta_sum.abs() > 1e-9 {
        return Err(Error::domain("p1 - p0 must sum to zero"));
    }
    if !(rho > 0.0) || n == 0 {
        return Err(Error::domain("need positive n and rho"));
    }
    let root_n = (n as f64).sqrt();
    let delta: Vec<f64> = p1.iter().zip(p0).map(|(a, b)| root_n * (a - b)).collect();
    let s = 1.0 / (n as f64 * rho);
    // Delta sums to zero, so projecting changes nothing; only the
    // degrees of freedom differ between the two kinds.
    let lambda = closed_form_quadratic(&delta, p0, s);
    let df = match kind {
        StatKind::Unprojected => p0.len() as u32,
        StatKind::Projected => p0.len() as u32 - 1,
    };
    let threshold = chi2_quantile(ChiSquareSpec::central(df)?, 1.0 - alpha)?;
    if lambda == 0.0 {
        return Ok(alpha);
    }
    Ok(1.0 - chi2_cdf(ChiSquareSpec::noncentral(df, lambda)?, threshold)?)
}

/// Render rows as CSV text: fixed header, 6-decimal rates, LF endings,
/// empty analytic column when absent.
pub fn render_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::from("n,trials,rejections,inconclusive,rate,se,analytic_power\n");
    for r in rows {
        let analytic = r
            .analytic_power
            .map(|v| format!("{v:.6}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6},{}\n",
            r.n, r.trials, r.rejections, r.inconclusive, r.rate, r.se, analytic
        ));
    }
    out
}

pub fn emit_csv(rows: &[ExperimentRow], path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(render_csv(rows).as_bytes())
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Named experiment setups mirroring the crate's reference simulations.
/// The arm stays configurable; `trials` and `n_grid` here are defaults
/// the caller may override.
pub fn preset(name: &str, arm: Arm) -> Result<ExperimentConfig> {
    let gof_null = NullSpec::Multinomial(vec![0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0]);
    let indep_null = NullSpec::Independence {
        pi1: vec![2.0 / 3.0, 1.0 / 3.0],
        pi2: vec![0.5, 0.5],
    };
    let gwas_null = NullSpec::CaseControl {
        case: vec![1.0 / 3.0; 3],
        control: vec![1.0 / 3.0; 3],
    };
    let rho = PrivacyBudget::zcdp(0.001)?;
    let eps = PrivacyBudget::pure_dp((0.002f64).sqrt())?;
    let cfg = match name {
        "gof-signif" => ExperimentConfig {
            test_id: TestId::ZcdpGof,
            arm,
            null: gof_null,
            alternative_offset: vec![0.0; 4],
            n_grid: vec![10_000, 100_000],
            trials: 10_000,
            alpha: 0.05,
            budget: rho,
            m: 59,
            master_seed: 0,
        },
        "gof-power" => ExperimentConfig {
            test_id: TestId::ZcdpGof,
            arm,
            null: gof_null,
            alternative_offset: vec![0.01, -0.01 / 3.0, -0.01 / 3.0, -0.01 / 3.0],
            n_grid: vec![5_000, 10_000, 20_000, 50_000, 100_000],
            trials: 5_000,
            alpha: 0.05,
            budget: rho,
            m: 59,
            master_seed: 0,
        },
        "mc-gof-signif" => ExperimentConfig {
            test_id: TestId::McGof,
            arm,
            null: gof_null,
            alternative_offset: vec![0.0; 4],
            n_grid: vec![10_000, 100_000],
            trials: 10_000,
            alpha: 0.05,
            budget: eps,
            m: 59,
            master_seed: 0,
        },
        "indep-signif" => ExperimentConfig {
            test_id: TestId::ZcdpIndep,
            arm,
            null: indep_null,
            alternative_offset: vec![0.0; 4],
            n_grid: vec![10_000, 100_000],
            trials: 10_000,
            alpha: 0.05,
            budget: rho,
            m: 59,
            master_seed: 0,
        },
        "indep-power" => ExperimentConfig {
            test_id: TestId::ZcdpIndep,
            arm,
            null: indep_null,
            alternative_offset: vec![0.01, 0.0, -0.01, 0.0],
            n_grid: vec![5_000, 10_000, 20_000, 50_000, 100_000],
            trials: 5_000,
            alpha: 0.05,
            budget: rho,
            m: 59,
            master_seed: 0,
        },
        "mc-indep-signif" => ExperimentConfig {
            test_id: TestId::McIndep,
            arm,
            null: indep_null,
            alternative_offset: vec![0.0; 4],
            n_grid: vec![10_000, 100_000],
            trials: 5_000,
            alpha: 0.05,
            budget: eps,
            m: 59,
            master_seed: 0,
        },
        "gwas-output-pert" => ExperimentConfig {
            test_id: TestId::GwasOutputPert,
            arm,
            null: gwas_null,
            alternative_offset: vec![1.0 / 6.0, -1.0 / 12.0, -1.0 / 12.0],
            n_grid: vec![1_000, 2_000, 5_000, 10_000],
            trials: 5_000,
            alpha: 0.05,
            budget: rho,
            m: 59,
            master_seed: 0,
        },
        "gwas-proj" => ExperimentConfig {
            test_id: TestId::GwasProj,
            arm,
            null: gwas_null,
            alternative_offset: vec![1.0 / 6.0, -1.0 / 12.0, -1.0 / 12.0],
            n_grid: vec![1_000, 2_000, 5_000, 10_000],
            trials: 5_000,
            alpha: 0.05,
            budget: rho,
            m: 59,
            master_seed: 0,
        },
        other => return Err(Error::Config(format!("unknown preset `{other}`"))),
    };
    Ok(cfg)
}

pub const PRESET_NAMES: [&str; 8] = [
    "gof-signif",
    "gof-power",
    "mc-gof-signif",
    "indep-signif",
    "indep-power",
    "mc-indep-signif",
    "gwas-output-pert",
    "gwas-proj",
];

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_gof_config() -> ExperimentConfig {
        ExperimentConfig {
            test_id: TestId::ZcdpGof,
            arm: Arm::Projected,
            null: NullSpec::Multinomial(vec![0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0]),
            alternative_offset: vec![0.0; 4],
            n_grid: vec![2_000, 5_000],
            trials: 200,
            alpha: 0.05,
            budget: PrivacyBudget::zcdp(0.01).unwrap(),
            m: 59,
            master_seed: 42,
        }
    }

    #[test]
    fn smoke_run_single_trial() {
        let mut cfg = small_gof_config();
        cfg.trials = 1;
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!(r.rate == 0.0 || r.rate == 1.0);
            assert_eq!(r.trials, 1);
        }
    }

    #[test]
    fn null_rate_within_level_band() {
        let mut cfg = small_gof_config();
        cfg.trials = 2_000;
        cfg.n_grid = vec![50_000];
        for row in run_experiment(&cfg).unwrap() {
            assert!(
                row.rate <= 0.05 + 3.0 * (0.05f64 * 0.95 / cfg.trials as f64).sqrt(),
                "rate {}",
                row.rate
            );
            assert!(row.rejections + row.inconclusive <= row.trials);
        }
    }

    #[test]
    fn deterministic_and_worker_invariant() {
        let cfg = small_gof_config();
        let one = run_experiment_with_workers(&cfg, Some(1)).unwrap();
        let eight = run_experiment_with_workers(&cfg, Some(8)).unwrap();
        assert_eq!(render_csv(&one), render_csv(&eight));
        let again = run_experiment(&cfg).unwrap();
        assert_eq!(one, again);
    }

    #[test]
    fn invalid_configs_error_before_work() {
        let mut cfg = small_gof_config();
        cfg.alternative_offset = vec![0.1, 0.0, 0.0, 0.0];
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
        let mut cfg = small_gof_config();
        cfg.n_grid = vec![];
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = small_gof_config();
        cfg.null = NullSpec::Multinomial(vec![0.7, 0.4]);
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = small_gof_config();
        cfg.test_id = TestId::ZcdpIndep;
        assert!(run_experiment(&cfg).is_err(), "indep test with plain null");
    }

    #[test]
    fn analytic_power_null_case_is_alpha() {
        let p0 = [0.5, 0.25, 0.25];
        let power =
            analytic_power(&p0, &p0, 10_000, 0.001, 0.05, StatKind::Projected).unwrap();
        assert_abs_diff_eq!(power, 0.05, epsilon = 1e-9);
    }

    #[test]
    fn analytic_power_monotone_in_n() {
        let p0 = [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        let p1 = [0.51, 0.5 / 3.0 - 0.01 / 3.0, 0.5 / 3.0 - 0.01 / 3.0, 0.5 / 3.0 - 0.01 / 3.0];
        let mut prev = 0.0;
        for n in [5_000u64, 10_000, 20_000, 50_000, 100_000] {
            let power = analytic_power(&p0, &p1, n, 0.001, 0.05, StatKind::Projected).unwrap();
            assert!(power > prev, "n {n}: {power} vs {prev}");
            prev = power;
        }
        assert!(prev > 0.9);
    }

    #[test]
    fn analytic_power_rejects_unbalanced_shift() {
        let p0 = [0.5, 0.5];
        let p1 = [0.6, 0.5];
        assert!(analytic_power(&p0, &p1, 1000, 0.1, 0.05, StatKind::Projected).is_err());
    }

    #[test]
    fn csv_format() {
        let rows = vec![ExperimentRow {
            n: 1000,
            trials: 20,
            rejections: 1,
            inconclusive: 0,
            rate: 0.05,
            se: 0.048733971724044796,
            analytic_power: None,
        }];
        let text = render_csv(&rows);
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n,trials,rejections,inconclusive,rate,se,analytic_power"
        );
        assert_eq!(lines.next().unwrap(), "1000,20,1,0,0.050000,0.048734,");
        assert!(text.ends_with('\n') && !text.contains('\r'));
        assert_eq!(render_csv(&[]).lines().count(), 1);
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![ExperimentRow {
            n: 500,
            trials: 100,
            rejections: 7,
            inconclusive: 2,
            rate: 0.07,
            se: 0.025514701644346147,
            analytic_power: Some(0.1234567),
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        emit_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let line = text.lines().nth(1).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0].parse::<u64>().unwrap(), 500);
        assert_eq!(fields[2].parse::<u64>().unwrap(), 7);
        assert_eq!(fields[3].parse::<u64>().unwrap(), 2);
        assert_abs_diff_eq!(fields[4].parse::<f64>().unwrap(), 0.07, epsilon = 1e-9);
        assert_abs_diff_eq!(
            fields[6].parse::<f64>().unwrap(),
            0.123457,
            epsilon = 1e-9
        );
    }

    #[test]
    fn presets_validate() {
        for name in PRESET_NAMES {
            for arm in [Arm::Projected, Arm::Unprojected, Arm::NonPrivateClassical] {
                let cfg = preset(name, arm).unwrap();
                cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            }
        }
        assert!(preset("nope", Arm::Projected).is_err());
    }

    #[test]
    fn gwas_trial_paths_run() {
        for test_id in [TestId::GwasOutputPert, TestId::GwasProj] {
            let cfg = ExperimentConfig {
                test_id,
                arm: Arm::Projected,
                null: NullSpec::CaseControl {
                    case: vec![1.0 / 3.0; 3],
                    control: vec![1.0 / 3.0; 3],
                },
                alternative_offset: vec![0.0; 3],
                n_grid: vec![2_000],
                trials: 20,
                alpha: 0.05,
                budget: PrivacyBudget::zcdp(0.01).unwrap(),
                m: 59,
                master_seed: 3,
            };
            let rows = run_experiment(&cfg).unwrap();
            assert_eq!(rows[0].trials, 20);
        }
    }

    #[test]
    fn mc_and_indep_trial_paths_run() {
        let cfg = ExperimentConfig {
            test_id: TestId::McGof,
            arm: Arm::Projected,
            null: NullSpec::Multinomial(vec![0.5, 0.25, 0.25]),
            alternative_offset: vec![0.0; 3],
            n_grid: vec![5_000],
            trials: 20,
            alpha: 0.05,
            budget: PrivacyBudget::pure_dp(0.3).unwrap(),
            m: 59,
            master_seed: 4,
        };
        run_experiment(&cfg).unwrap();
        let cfg = ExperimentConfig {
            test_id: TestId::ZcdpIndep,
            arm: Arm::Unprojected,
            null: NullSpec::Independence {
                pi1: vec![2.0 / 3.0, 1.0 / 3.0],
                pi2: vec![0.5, 0.5],
            },
            alternative_offset: vec![0.0; 4],
            n_grid: vec![20_000],
            trials: 20,
            alpha: 0.05,
            budget: PrivacyBudget::zcdp(0.01).unwrap(),
            m: 59,
            master_seed: 5,
        };
        run_experiment(&cfg).unwrap();
    }

    #[test]
    fn classical_arm_runs_all_families() {
        for (test_id, null, offset_len) in [
            (
                TestId::ZcdpGof,
                NullSpec::Multinomial(vec![0.5, 0.25, 0.25]),
                3,
            ),
            (
                TestId::ZcdpIndep,
                NullSpec::Independence {
                    pi1: vec![0.5, 0.5],
                    pi2: vec![0.5, 0.5],
                },
                4,
            ),
            (
                TestId::GwasOutputPert,
                NullSpec::CaseControl {
                    case: vec![1.0 / 3.0; 3],
                    control: vec![1.0 / 3.0; 3],
                },
                3,
            ),
        ] {
            let cfg = ExperimentConfig {
                test_id,
                arm: Arm::NonPrivateClassical,
                null,
                alternative_offset: vec![0.0; offset_len],
                n_grid: vec![2_000],
                trials: 200,
                alpha: 0.05,
                budget: PrivacyBudget::zcdp(0.001).unwrap(),
                m: 59,
                master_seed: 6,
            };
            let rows = run_experiment(&cfg).unwrap();
            let se = (0.05f64 * 0.95 / 200.0).sqrt();
            assert!(rows[0].rate <= 0.05 + 3.0 * se, "{test_id:?}: {}", rows[0].rate);
        }
    }
}
