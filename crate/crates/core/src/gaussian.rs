//! The centered Gaussian target `N(0, C)` and its natural coordinates.
//!
//! All spectral data of the covariance is computed once at construction and
//! `C^{±1/2}`, `C^{-1}` are applied through the eigenbasis. Dimensions stay
//! small (tens to a few hundred) in every experiment, so clarity wins over
//! sparsity.

use crate::error::Error;
use crate::seeding::Rng;
use crate::Result;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

/// Relative symmetry tolerance accepted on dense covariance input.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// A symmetric positive definite covariance with cached spectral data.
///
/// `m`, `big_m` and `kappa` describe the *inverse* covariance: `m` and
/// `big_m` are the smallest and largest eigenvalues of `C^{-1}` and
/// `kappa = big_m / m` its condition number.
#[derive(Debug, Clone)]
pub struct CovarianceSpec {
    dim: usize,
    /// Orthonormal eigenvectors of C, columns of Q.
    eigenvectors: DMatrix<f64>,
    /// Eigenvalues of C, ascending.
    eigenvalues: DVector<f64>,
    m: f64,
    big_m: f64,
    kappa: f64,
    log_det: f64,
    /// Per-coordinate variances when the covariance is axis-aligned.
    diag_vars: Option<Vec<f64>>,
}

impl CovarianceSpec {
    /// Covariance `diag(variances)`.
    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::DimensionZero);
        }
        for (i, &v) in variances.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    eigenvalue: v,
                    index: i,
                });
            }
        }
        let d = variances.len();
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&a, &b| variances[a].total_cmp(&variances[b]));
        let eigenvalues = DVector::from_iterator(d, idx.iter().map(|&i| variances[i]));
        let mut q = DMatrix::zeros(d, d);
        for (col, &i) in idx.iter().enumerate() {
            q[(i, col)] = 1.0;
        }
        Ok(Self::from_spectral(q, eigenvalues, Some(variances.to_vec())))
    }

    /// Dense symmetric covariance. The input is symmetrized as
    /// `(C + Cᵀ)/2` after checking that the asymmetry does not exceed
    /// [`SYMMETRY_TOL`] relative to the largest entry.
    pub fn dense(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 {
            return Err(Error::DimensionZero);
        }
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let scale = matrix.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
        let mut max_asym = 0.0f64;
        for i in 0..matrix.nrows() {
            for j in (i + 1)..matrix.ncols() {
                max_asym = max_asym.max((matrix[(i, j)] - matrix[(j, i)]).abs());
            }
        }
        if max_asym > SYMMETRY_TOL * scale {
            return Err(Error::NonSymmetric {
                max_asym: max_asym / scale,
                tol: SYMMETRY_TOL,
            });
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        // sort ascending
        let d = eig.eigenvalues.len();
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_iterator(d, idx.iter().map(|&i| eig.eigenvalues[i]));
        let mut q = DMatrix::zeros(d, d);
        for (col, &i) in idx.iter().enumerate() {
            q.set_column(col, &eig.eigenvectors.column(i));
        }
        for (i, &lambda) in eigenvalues.iter().enumerate() {
            if !(lambda > 0.0) {
                return Err(Error::NotPositiveDefinite {
                    eigenvalue: lambda,
                    index: i,
                });
            }
        }
        Ok(Self::from_spectral(q, eigenvalues, None))
    }

    fn from_spectral(
        q: DMatrix<f64>,
        eigenvalues: DVector<f64>,
        diag_vars: Option<Vec<f64>>,
    ) -> Self {
        let dim = eigenvalues.len();
        let lambda_min = eigenvalues[0];
        let lambda_max = eigenvalues[dim - 1];
        // eigenvalues of C^{-1} are the reciprocals
        let m = 1.0 / lambda_max;
        let big_m = 1.0 / lambda_min;
        let log_det = eigenvalues.iter().map(|l| l.ln()).sum();
        Self {
            dim,
            eigenvectors: q,
            eigenvalues,
            m,
            big_m,
            kappa: big_m / m,
            log_det,
            diag_vars,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Smallest eigenvalue of `C^{-1}`.
    pub fn m(&self) -> f64 {
        self.m
    }

    /// Largest eigenvalue of `C^{-1}`.
    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    /// Condition number of `C^{-1}` (equivalently of `C`).
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `log det C`, accumulated in log space.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Eigenvalues of `C` in ascending order.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Whether the covariance was given as (and stays) axis-aligned.
    pub fn is_diagonal(&self) -> bool {
        self.diag_vars.is_some()
    }

    /// Largest standard deviation, `sqrt(lambda_max(C))`.
    pub fn max_std(&self) -> f64 {
        self.eigenvalues[self.dim - 1].sqrt()
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn apply_power(&self, x: &DVector<f64>, power: impl Fn(f64) -> f64) -> DVector<f64> {
        if let Some(vars) = &self.diag_vars {
            DVector::from_iterator(
                self.dim,
                x.iter().zip(vars).map(|(xi, v)| xi * power(*v)),
            )
        } else {
            let y = self.eigenvectors.transpose() * x;
            let scaled = DVector::from_iterator(
                self.dim,
                y.iter().zip(self.eigenvalues.iter()).map(|(yi, l)| yi * power(*l)),
            );
            &self.eigenvectors * scaled
        }
    }

    /// `C^{1/2} x`.
    pub fn apply_sqrt(&self, x: &DVector<f64>) -> DVector<f64> {
        self.apply_power(x, f64::sqrt)
    }

    /// `C^{-1/2} x`.
    pub fn apply_inv_sqrt(&self, x: &DVector<f64>) -> DVector<f64> {
        self.apply_power(x, |l| 1.0 / l.sqrt())
    }

    /// `C^{-1} x`.
    pub fn apply_inv(&self, x: &DVector<f64>) -> DVector<f64> {
        self.apply_power(x, |l| 1.0 / l)
    }

    /// Reconstruct the dense covariance matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (col, &l) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(col).scale_mut(l);
        }
        &scaled * self.eigenvectors.transpose()
    }
}

/// The natural norm `|x|_{C^{-1/2}} = |C^{-1/2} x|`.
pub fn natural_norm(cov: &CovarianceSpec, x: &DVector<f64>) -> Result<f64> {
    cov.check_dim(x)?;
    Ok(cov.apply_inv_sqrt(x).norm())
}

/// Log density of `N(0, C)` at `x`:
/// `-½|x|²_{C^{-1/2}} - ½ log((2π)^d det C)`.
pub fn log_density(cov: &CovarianceSpec, x: &DVector<f64>) -> Result<f64> {
    cov.check_dim(x)?;
    let q = cov.apply_inv_sqrt(x).norm_squared();
    Ok(-0.5 * q - 0.5 * (cov.dim as f64 * (2.0 * std::f64::consts::PI).ln() + cov.log_det))
}

/// Exact draw from `N(0, C)` as `C^{1/2} g` with `g` standard normal.
pub fn sample_target(cov: &CovarianceSpec, rng: &mut Rng) -> DVector<f64> {
    let g: DVector<f64> = DVector::from_iterator(
        cov.dim,
        (0..cov.dim).map(|_| -> f64 { StandardNormal.sample(rng) }),
    );
    cov.apply_sqrt(&g)
}
