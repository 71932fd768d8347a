//! Dense matrix objects for the goodness-of-fit theory: the multinomial
//! covariance, its noise-regularized version, the Woodbury closed-form
//! inverse, the centering projection, and the projected middle matrix.
//!
//! Tables are tiny (d is at most a few hundred), so everything is stored
//! as explicit dense d x d matrices.

use crate::error::{Error, Result};
use crate::mechanisms::validate_probability_vector;

/// Minimal dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.matvec(x)).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Multinomial covariance Sigma = Diag(p0) - p0 p0^T; rank d-1, rows sum
/// to zero.
pub fn multinomial_covariance(p0: &[f64]) -> Result<Matrix> {
    validate_null(p0)?;
    let d = p0.len();
    let mut m = Matrix::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let v = if i == j { p0[i] } else { 0.0 } - p0[i] * p0[j];
            m.set(i, j, v);
        }
    }
    Ok(m)
}

/// Sigma + s I for per-cell scaled noise variance s = v/n; full rank with
/// eigenpair (1-vector, s).
pub fn private_covariance(p0: &[f64], s: f64) -> Result<Matrix> {
    check_scaled_variance(s)?;
    let mut m = multinomial_covariance(p0)?;
    for i in 0..m.dim() {
        let v = m.get(i, i) + s;
        m.set(i, i, v);
    }
    Ok(m)
}

/// Closed-form inverse of Sigma + s I by Woodbury's identity:
/// Diag(p0 + s)^-1 + omega omega^T / (1 - p0 . omega), with
/// omega_i = p0_i / (p0_i + s).
pub fn private_covariance_inverse(p0: &[f64], s: f64) -> Result<Matrix> {
    check_scaled_variance(s)?;
    validate_null(p0)?;
    let d = p0.len();
    let omega: Vec<f64> = p0.iter().map(|&p| p / (p + s)).collect();
    let denom = 1.0 - p0.iter().zip(&omega).map(|(p, w)| p * w).sum::<f64>();
    let mut m = Matrix::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let diag = if i == j { 1.0 / (p0[i] + s) } else { 0.0 };
            m.set(i, j, diag + omega[i] * omega[j] / denom);
        }
    }
    Ok(m)
}

/// The centering projection P = I - (1/d) 1 1^T.
pub fn centering_projection(d: usize) -> Matrix {
    let mut m = Matrix::identity(d);
    for i in 0..d {
        for j in 0..d {
            m.set(i, j, m.get(i, j) - 1.0 / d as f64);
        }
    }
    m
}

/// P (Sigma + s I)^-1 P, the middle matrix of the projected statistic.
pub fn projected_middle_matrix(p0: &[f64], s: f64) -> Result<Matrix> {
    let inv = private_covariance_inverse(p0, s)?;
    let p = centering_projection(p0.len());
    Ok(p.matmul(&inv).matmul(&p))
}

/// All GOF matrix objects for a given null and scaled noise variance,
/// built once and shared.
#[derive(Debug, Clone)]
pub struct GofMatrices {
    pub p0: Vec<f64>,
    pub scaled_variance: f64,
    pub sigma: Matrix,
    pub sigma_priv: Matrix,
    pub sigma_priv_inv: Matrix,
    pub projection: Matrix,
    pub omega: Vec<f64>,
}

impl GofMatrices {
    pub fn new(p0: &[f64], scaled_variance: f64) -> Result<Self> {
        check_scaled_variance(scaled_variance)?;
        validate_null(p0)?;
        Ok(GofMatrices {
            p0: p0.to_vec(),
            scaled_variance,
            sigma: multinomial_covariance(p0)?,
            sigma_priv: private_covariance(p0, scaled_variance)?,
            sigma_priv_inv: private_covariance_inverse(p0, scaled_variance)?,
            projection: centering_projection(p0.len()),
            omega: p0.iter().map(|&p| p / (p + scaled_variance)).collect(),
        })
    }
}

fn check_scaled_variance(s: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain("scaled noise variance must be positive"));
    }
    Ok(())
}

/// A null probability vector must be strictly positive everywhere.
pub(crate) fn validate_null(p0: &[f64]) -> Result<()> {
    validate_probability_vector(p0)?;
    if p0.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidNull(
            "null probabilities must be strictly positive".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn random_null(d: usize, seed: u64) -> Vec<f64> {
        use crate::rng::RngStream;
        let mut rng = RngStream::new(seed, 99);
        let raw: Vec<f64> = (0..d).map(|_| rng.open01() + 0.05).collect();
        let sum: f64 = raw.iter().sum();
        let mut p: Vec<f64> = raw.iter().map(|v| v / sum).collect();
        // Force an exact unit sum.
        let total: f64 = p.iter().take(d - 1).sum();
        p[d - 1] = 1.0 - total;
        p
    }

    #[test]
    fn sigma_two_cell_closed_form() {
        let m = multinomial_covariance(&[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(m.get(0, 0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(m.get(0, 1), -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(m.get(1, 1), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn sigma_diagonal_for_paper_null() {
        let p = [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        let m = multinomial_covariance(&p).unwrap();
        assert_abs_diff_eq!(m.get(0, 0), 0.25, epsilon = 1e-15);
        for i in 1..4 {
            assert_abs_diff_eq!(m.get(i, i), 5.0 / 36.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn sigma_rejects_nonpositive_null() {
        assert!(multinomial_covariance(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn private_covariance_two_cell() {
        let m = private_covariance(&[0.5, 0.5], 1.0).unwrap();
        assert_abs_diff_eq!(m.get(0, 0), 1.25, epsilon = 1e-15);
        assert_abs_diff_eq!(m.get(0, 1), -0.25, epsilon = 1e-15);
    }

    #[test]
    fn private_covariance_small_s_approaches_sigma() {
        let p = random_null(5, 3);
        let sigma = multinomial_covariance(&p).unwrap();
        let near = private_covariance(&p, 1e-14).unwrap();
        assert!(sigma.max_abs_diff(&near) < 1e-12);
        assert!(private_covariance(&p, 0.0).is_err());
    }

    #[test]
    fn woodbury_two_cell_closed_form() {
        let m = private_covariance_inverse(&[0.5, 0.5], 1.0).unwrap();
        assert_abs_diff_eq!(m.get(0, 0), 5.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.get(0, 1), 1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.get(1, 1), 5.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn woodbury_matches_lu_inverse() {
        // Generic dense-solver oracle over 100 random (p0, s) instances.
        for case in 0..100u64 {
            let d = 2 + (case % 6) as usize;
            let p = random_null(d, case);
            let s = 0.001 + (case as f64 % 13.0) * 0.2;
            let ours = private_covariance_inverse(&p, s).unwrap();
            let dense = private_covariance(&p, s).unwrap();
            let mut na = nalgebra::DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    na[(i, j)] = dense.get(i, j);
                }
            }
            let inv = na.try_inverse().unwrap();
            for i in 0..d {
                for j in 0..d {
                    assert!(
                        (ours.get(i, j) - inv[(i, j)]).abs() < 1e-9,
                        "case {case} entry ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn projected_middle_matrix_annihilates_ones() {
        let p = random_null(4, 7);
        let m = projected_middle_matrix(&p, 0.3).unwrap();
        let ones = vec![1.0; 4];
        for v in m.matvec(&ones) {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn projected_middle_matrix_identity_formula() {
        for case in 0..30u64 {
            let d = 2 + (case % 5) as usize;
            let p = random_null(d, 1000 + case);
            let s = 0.01 + (case as f64) * 0.11;
            let direct = projected_middle_matrix(&p, s).unwrap();
            let inv = private_covariance_inverse(&p, s).unwrap();
            let mut formula = Matrix::zeros(d);
            for i in 0..d {
                for j in 0..d {
                    formula.set(i, j, inv.get(i, j) - 1.0 / (s * d as f64));
                }
            }
            assert!(direct.max_abs_diff(&formula) < 1e-9, "case {case}");
        }
    }

    #[test]
    fn projected_middle_matrix_small_s_limit() {
        let p = [0.5, 0.5];
        let near = projected_middle_matrix(&p, 1e-8).unwrap();
        let proj = centering_projection(2);
        let mut diag_inv = Matrix::zeros(2);
        diag_inv.set(0, 0, 2.0);
        diag_inv.set(1, 1, 2.0);
        let limit = proj.matmul(&diag_inv).matmul(&proj);
        assert!(near.max_abs_diff(&limit) < 1e-4);
    }

    #[test]
    fn sigma_has_exactly_one_zero_eigenvalue() {
        for case in 0..50u64 {
            let d = 2 + (case % 6) as usize;
            let p = random_null(d, 500 + case);
            let sigma = multinomial_covariance(&p).unwrap();
            let mut na = nalgebra::DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    na[(i, j)] = sigma.get(i, j);
                }
            }
            let eig = na.symmetric_eigenvalues();
            let mut vals: Vec<f64> = eig.iter().copied().collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let largest = vals[d - 1];
            assert!(vals[0].abs() < 1e-10 * largest.max(1.0), "case {case}");
            if d > 1 {
                assert!(vals[1] > 1e-10 * largest, "case {case}: rank below d-1");
            }
        }
    }

    #[test]
    fn private_covariance_eigenvalues_at_least_s() {
        let p = random_null(5, 77);
        let s = 0.2;
        let m = private_covariance(&p, s).unwrap();
        let mut na = nalgebra::DMatrix::zeros(5, 5);
        for i in 0..5 {
            for j in 0..5 {
                na[(i, j)] = m.get(i, j);
            }
        }
        for lambda in na.symmetric_eigenvalues().iter() {
            assert!(*lambda >= s - 1e-12);
        }
    }

    proptest! {
        #[test]
        fn sigma_rows_sum_to_zero(seed in 0u64..500, d in 2usize..8) {
            let p = random_null(d, seed);
            let m = multinomial_covariance(&p).unwrap();
            for i in 0..d {
                let row: f64 = (0..d).map(|j| m.get(i, j)).sum();
                prop_assert!(row.abs() < 1e-12);
            }
        }

        #[test]
        fn private_covariance_eigen_identity(seed in 0u64..500, d in 2usize..8, s in 0.01f64..5.0) {
            let p = random_null(d, seed);
            let m = private_covariance(&p, s).unwrap();
            let ones = vec![1.0; d];
            for v in m.matvec(&ones) {
                prop_assert!((v - s).abs() < 1e-12);
            }
        }

        #[test]
        fn woodbury_inverse_product_and_symmetry(seed in 0u64..500, d in 2usize..8, s in 0.01f64..5.0) {
            let p = random_null(d, seed);
            let a = private_covariance(&p, s).unwrap();
            let inv = private_covariance_inverse(&p, s).unwrap();
            let prod = inv.matmul(&a);
            prop_assert!(prod.max_abs_diff(&Matrix::identity(d)) < 1e-10);
            for i in 0..d {
                for j in 0..i {
                    prop_assert!((inv.get(i, j) - inv.get(j, i)).abs() < 1e-12);
                }
            }
            // Inverse maps the 1-vector to (1/s) 1.
            let ones = vec![1.0; d];
            for v in inv.matvec(&ones) {
                prop_assert!((v - 1.0 / s).abs() < 1e-9 * (1.0 / s));
            }
        }

        #[test]
        fn projection_idempotent(d in 2usize..9) {
            let p = centering_projection(d);
            let pp = p.matmul(&p);
            prop_assert!(pp.max_abs_diff(&p) < 1e-13);
        }
    }
}
