//! Histograms, multinomial sampling, privacy mechanisms, and
//! privacy-budget conversions.
//!
//! Histogram sensitivity between neighboring datasets is 2 in l1 and
//! sqrt(2) in l2, so Gaussian noise with variance 1/rho per cell gives
//! rho-zCDP and Laplace noise with scale 2/epsilon gives epsilon-DP.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Raw nonnegative integer cell counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    counts: Vec<u64>,
}

impl Histogram {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::Shape(format!(
                "histogram needs at least 2 cells, got {}",
                counts.len()
            )));
        }
        Ok(Histogram { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn d(&self) -> usize {
        self.counts.len()
    }

    /// Total count n.
    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Which noise distribution privatized a histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mechanism {
    Gaussian,
    Laplace,
}

/// Real-valued privatized counts with noise metadata.
///
/// `realized_noise` is retained only when the caller asks for it
/// (simulation and test paths); production releases drop it.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyHistogram {
    pub values: Vec<f64>,
    pub n: u64,
    pub noisy_total: f64,
    pub noise_variance: f64,
    pub mechanism: Mechanism,
    pub realized_noise: Option<Vec<f64>>,
}

impl NoisyHistogram {
    pub fn d(&self) -> usize {
        self.values.len()
    }
}

/// Privacy budget: either a zCDP parameter rho or a pure-DP epsilon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrivacyBudget {
    Zcdp { rho: f64 },
    PureDp { epsilon: f64 },
}

impl PrivacyBudget {
    pub fn zcdp(rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::domain("zCDP parameter rho must be positive"));
        }
        Ok(PrivacyBudget::Zcdp { rho })
    }

    pub fn pure_dp(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::domain("pure-DP parameter epsilon must be positive"));
        }
        Ok(PrivacyBudget::PureDp { epsilon })
    }
}

/// epsilon-DP implies (epsilon^2 / 2)-zCDP.
pub fn zcdp_of_pure(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::domain("epsilon must be positive"));
    }
    Ok(epsilon * epsilon / 2.0)
}

/// rho-zCDP implies (rho + 2*sqrt(rho*ln(1/delta)), delta)-DP.
pub fn approx_dp_of_zcdp(rho: f64, delta: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain("rho must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain("delta must lie in (0, 1)"));
    }
    Ok(rho + 2.0 * (rho * (1.0 / delta).ln()).sqrt())
}

pub(crate) fn validate_probability_vector(p: &[f64]) -> Result<()> {
    if p.len() < 2 {
        return Err(Error::Shape("probability vector needs at least 2 entries".into()));
    }
    let mut sum = 0.0;
    for &v in p {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::domain("probability entries must be finite and >= 0"));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!(
            "probability vector sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Draw `Multinomial(n, p)` by sequential conditional binomials.
/// Counts always sum to n exactly.
pub fn sample_multinomial(n: u64, p: &[f64], rng: &mut RngStream) -> Result<Histogram> {
    validate_probability_vector(p)?;
    let d = p.len();
    let mut counts = vec![0u64; d];
    let mut remaining = n;
    let mut rest = 1.0f64;
    for i in 0..d - 1 {
        if remaining == 0 {
            break;
        }
        let cond = (p[i] / rest).clamp(0.0, 1.0);
        let k = if cond >= 1.0 {
            remaining
        } else if cond <= 0.0 {
            0
        } else {
            rand_distr::Binomial::new(remaining, cond)
                .expect("conditional probability in [0,1]")
                .sample(rng)
        };
        counts[i] = k;
        remaining -= k;
        rest -= p[i];
    }
    counts[d - 1] = remaining;
    Histogram::new(counts)
}

fn sample_laplace(scale: f64, rng: &mut RngStream) -> f64 {
    // Inverse CDF: u uniform in (-1/2, 1/2), x = -b * sgn(u) * ln(1 - 2|u|).
    let u = rng.open01() - 0.5;
    let sign = if u < 0.0 { -1.0 } else { 1.0 };
    -scale * sign * (1.0 - 2.0 * u.abs()).ln()
}

fn privatize(
    h: &Histogram,
    noise: Vec<f64>,
    variance: f64,
    mechanism: Mechanism,
    retain_noise: bool,
) -> NoisyHistogram {
    let values: Vec<f64> = h
        .counts()
        .iter()
        .zip(&noise)
        .map(|(&c, &z)| c as f64 + z)
        .collect();
    let noisy_total = values.iter().sum();
    NoisyHistogram {
        values,
        n: h.n(),
        noisy_total,
        noise_variance: variance,
        mechanism,
        realized_noise: retain_noise.then_some(noise),
    }
}

/// Add iid N(0, 1/rho) noise per cell (rho-zCDP for histograms).
pub fn gaussian_mechanism(
    h: &Histogram,
    rho: f64,
    rng: &mut RngStream,
    retain_noise: bool,
) -> Result<NoisyHistogram> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain("rho must be positive"));
    }
    let variance = 1.0 / rho;
    let normal = Normal::new(0.0, variance.sqrt()).expect("valid stddev");
    let noise: Vec<f64> = (0..h.d()).map(|_| normal.sample(rng)).collect();
    Ok(privatize(h, noise, variance, Mechanism::Gaussian, retain_noise))
}

/// Per-cell variance of the Laplace mechanism at budget epsilon:
/// scale 2/epsilon, variance 8/epsilon^2.
pub fn laplace_variance(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::domain("epsilon must be positive"));
    }
    Ok(8.0 / (epsilon * epsilon))
}

/// Add iid Laplace(2/epsilon) noise per cell (epsilon-DP for histograms).
/// The per-cell noise variance is 2 * (2/epsilon)^2 = 8/epsilon^2.
pub fn laplace_mechanism(
    h: &Histogram,
    epsilon: f64,
    rng: &mut RngStream,
    retain_noise: bool,
) -> Result<NoisyHistogram> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::domain("epsilon must be positive"));
    }
    let scale = 2.0 / epsilon;
    laplace_mechanism_with_variance(h, 2.0 * scale * scale, rng, retain_noise)
}

/// Laplace noise with a caller-chosen per-cell variance v (scale sqrt(v/2)).
pub fn laplace_mechanism_with_variance(
    h: &Histogram,
    variance: f64,
    rng: &mut RngStream,
    retain_noise: bool,
) -> Result<NoisyHistogram> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::domain("noise variance must be positive"));
    }
    let scale = (variance / 2.0).sqrt();
    let noise: Vec<f64> = (0..h.d()).map(|_| sample_laplace(scale, rng)).collect();
    Ok(privatize(h, noise, variance, Mechanism::Laplace, retain_noise))
}
