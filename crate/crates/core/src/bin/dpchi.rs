//! Command-line frontend: run a single test on a data file, or sweep a
//! simulation preset. Decisions go to standard output as one CSV line
//! `decision,statistic,threshold,df_or_m`; prose goes to standard error.
//!
//! Exit codes: 0 success (any decision), 1 usage error, 2 data or
//! domain error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpchi::harness::{self, Arm, ExperimentConfig};
use dpchi::mechanisms::laplace_variance;
use dpchi::minchi::{self, independence_model, McOptions};
use dpchi::table::ContingencyTable;
use dpchi::{gof, gwas, Error, Histogram, Result, RngStream, StatKind, TestReport};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dpchi",
    version,
    about = "Differentially private chi-square hypothesis tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Goodness-of-fit test of a histogram against a fixed null.
    TestGof(TestGofArgs),
    /// Independence test of an r x c contingency table.
    TestIndep(TestIndepArgs),
    /// GWAS case/control test on a 3x2 table (output perturbation).
    TestGwas(TestGwasArgs),
    /// Run a simulation sweep and write a CSV of rejection rates.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum StatChoice {
    Proj,
    Unproj,
}

impl From<StatChoice> for StatKind {
    fn from(c: StatChoice) -> Self {
        match c {
            StatChoice::Proj => StatKind::Projected,
            StatChoice::Unproj => StatKind::Unprojected,
        }
    }
}

#[derive(Args)]
struct BudgetArgs {
    /// zCDP budget; the test is asymptotic with Gaussian noise.
    #[arg(long, conflicts_with = "epsilon")]
    rho: Option<f64>,
    /// Pure-DP budget; routes to the Monte-Carlo test with Laplace noise.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct CommonArgs {
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Statistic variant.
    #[arg(long, value_enum, default_value_t = StatChoice::Proj)]
    stat: StatChoice,
    /// Null replicates for the Monte-Carlo tests.
    #[arg(long, default_value_t = 59)]
    mc_samples: usize,
    /// Master seed for all randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the per-cell Laplace noise variance of the MC tests
    /// (default 8/epsilon^2).
    #[arg(long)]
    noise_variance: Option<f64>,
}

#[derive(Args)]
struct TestGofArgs {
    /// Null cell probabilities, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    null: Vec<f64>,
    #[command(flatten)]
    budget: BudgetArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Histogram file: one nonnegative integer count per line, `#`
    /// comments allowed.
    input: PathBuf,
}

#[derive(Args)]
struct TestIndepArgs {
    #[command(flatten)]
    budget: BudgetArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Table file: one CSV row of nonnegative integer counts per line.
    input: PathBuf,
}

#[derive(Args)]
struct TestGwasArgs {
    /// zCDP budget for the output perturbation.
    #[arg(long, default_value_t = 0.001)]
    rho: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// 3x2 table file, columns = case, control.
    input: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArmChoice {
    Proj,
    Unproj,
    Classical,
}

#[derive(Args)]
struct SimulateArgs {
    /// Named experiment setup.
    #[arg(long, required = true)]
    preset: String,
    /// Which arm of the experiment to run.
    #[arg(long, value_enum, default_value_t = ArmChoice::Proj)]
    arm: ArmChoice,
    /// Override the preset's trials per grid point.
    #[arg(long)]
    trials: Option<u64>,
    /// Override the preset's sample-size grid, comma separated.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<u64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Output does not depend on
    /// this.
    #[arg(long)]
    workers: Option<usize>,
    /// Output CSV path (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// One nonnegative integer per line; blank lines and `#` comments are
/// skipped. Errors carry 1-based line numbers.
fn read_histogram(path: &Path) -> Result<Histogram> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut counts = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let value = line.parse::<u64>().map_err(|_| Error::Data {
            line: idx + 1,
            msg: format!("expected a nonnegative integer, got `{line}`"),
        })?;
        counts.push(value);
    }
    if counts.is_empty() {
        return Err(Error::Data {
            line: 1,
            msg: "no counts found".into(),
        });
    }
    Histogram::new(counts)
}

/// CSV grid of nonnegative integers, one table row per line.
fn read_table(path: &Path) -> Result<ContingencyTable> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rows: Vec<Vec<u64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<u64> = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<u64>().map_err(|_| Error::Data {
                    line: idx + 1,
                    msg: format!("expected a nonnegative integer, got `{}`", cell.trim()),
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Data {
                    line: idx + 1,
                    msg: format!("ragged row: {} cells, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data {
            line: 1,
            msg: "no rows found".into(),
        });
    }
    ContingencyTable::new(rows)
}

fn print_report(report: &TestReport) {
    let df_or_m = report
        .mc_samples_used
        .map(|m| m.to_string())
        .unwrap_or_else(|| report.statistic.df.to_string());
    println!(
        "{},{:.6},{:.6},{}",
        report.decision, report.statistic.value, report.threshold, df_or_m
    );
}

fn run_test_gof(args: &TestGofArgs) -> Result<()> {
    let h = read_histogram(&args.input)?;
    let mut rng = RngStream::new(args.common.seed, 0);
    let kind = args.common.stat.into();
    let report = match (args.budget.rho, args.budget.epsilon) {
        (_, Some(epsilon)) => {
            let variance = match args.common.noise_variance {
                Some(v) => v,
                None => laplace_variance(epsilon)?,
            };
            gof::dp_mc_gof_test_with_variance(
                &h,
                variance,
                args.common.alpha,
                &args.null,
                kind,
                args.common.mc_samples,
                &mut rng,
            )?
        }
        (rho, None) => gof::zcdp_gof_test(
            &h,
            rho.unwrap_or(0.001),
            args.common.alpha,
            &args.null,
            kind,
            &mut rng,
        )?,
    };
    print_report(&report);
    Ok(())
}

fn run_test_indep(args: &TestIndepArgs) -> Result<()> {
    let table = read_table(&args.input)?;
    let model = independence_model(table.rows(), table.cols())?;
    let h = table.to_histogram()?;
    let mut rng = RngStream::new(args.common.seed, 0);
    let kind = args.common.stat.into();
    let report = match (args.budget.rho, args.budget.epsilon) {
        (_, Some(epsilon)) => minchi::dp_mc_min_test_with_options(
            &h,
            epsilon,
            args.common.alpha,
            &model,
            kind,
            args.common.mc_samples,
            &mut rng,
            McOptions {
                reestimate: true,
                noise_variance: args.common.noise_variance,
            },
        )?,
        (rho, None) => minchi::zcdp_min_chi2_test(
            &h,
            rho.unwrap_or(0.001),
            args.common.alpha,
            &model,
            kind,
            &mut rng,
        )?,
    };
    if !report.minimizer_converged {
        eprintln!("warning: minimization stopped on its evaluation budget");
    }
    print_report(&report);
    Ok(())
}

fn run_test_gwas(args: &TestGwasArgs) -> Result<()> {
    let table = read_table(&args.input)?;
    let mut rng = RngStream::new(args.seed, 0);
    let report = gwas::output_perturbation_test(&table, args.rho, args.alpha, &mut rng)?;
    print_report(&report);
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let arm = match args.arm {
        ArmChoice::Proj => Arm::Projected,
        ArmChoice::Unproj => Arm::Unprojected,
        ArmChoice::Classical => Arm::NonPrivateClassical,
    };
    let mut cfg: ExperimentConfig = harness::preset(&args.preset, arm)?;
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(grid) = &args.n_grid {
        cfg.n_grid = grid.clone();
    }
    cfg.master_seed = args.seed;
    eprintln!(
        "running {} x {} trials over {} grid points",
        args.preset,
        cfg.trials,
        cfg.n_grid.len()
    );
    let rows = harness::run_experiment_with_workers(&cfg, args.workers)?;
    match &args.out {
        Some(path) => {
            harness::emit_csv(&rows, path)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{}", harness::render_csv(&rows)),
    }
    Ok(())
}

/// Flag-value validation, before any data is read: failures here are
/// usage errors (exit 1), not data errors.
fn usage_check(cli: &Cli) -> std::result::Result<(), String> {
    let check_alpha = |alpha: f64| {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(())
        } else {
            Err(format!("--alpha must lie in (0, 1), got {alpha}"))
        }
    };
    let check_budget = |b: &BudgetArgs, c: &CommonArgs| {
        if b.rho.is_some_and(|v| !(v > 0.0)) {
            return Err("--rho must be positive".to_string());
        }
        if b.epsilon.is_some_and(|v| !(v > 0.0)) {
            return Err("--epsilon must be positive".to_string());
        }
        if c.noise_variance.is_some_and(|v| !(v > 0.0)) {
            return Err("--noise-variance must be positive".to_string());
        }
        check_alpha(c.alpha)
    };
    match &cli.command {
        Command::TestGof(a) => check_budget(&a.budget, &a.common),
        Command::TestIndep(a) => check_budget(&a.budget, &a.common),
        Command::TestGwas(a) => {
            if !(a.rho > 0.0) {
                return Err("--rho must be positive".to_string());
            }
            check_alpha(a.alpha)
        }
        Command::Simulate(a) => {
            if a.trials == Some(0) {
                return Err("--trials must be positive".to_string());
            }
            if a.workers == Some(0) {
                return Err("--workers must be positive".to_string());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes, not usage errors.
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = usage_check(&cli) {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    let result = match &cli.command {
        Command::TestGof(args) => run_test_gof(args),
        Command::TestIndep(args) => run_test_indep(args),
        Command::TestGwas(args) => run_test_gwas(args),
        Command::Simulate(args) => run_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
