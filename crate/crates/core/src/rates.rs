//! Contraction rates `ρ = ½·λ_min(M_τ)` and the low-dimensional case studies.
//!
//! The variational definition of the rate — an infimum of `E(ζ·ŵ)²` over unit
//! vectors `ζ` — is exactly the smallest eigenvalue of the second-moment
//! matrix, so every rate here is computed by a `d×d` symmetric eigensolve on
//! an estimated or exact `M_τ`. No optimization error enters.

use crate::directions::{second_moment_matrix, DirectionLaw, SecondMoment, SecondMomentEstimator};
use crate::error::Error;
use crate::gaussian::CovarianceSpec;
use crate::quadrature::adaptive_simpson;
use crate::Result;
use nalgebra::{DMatrix, DVector};

/// How a rate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMethod {
    ClosedForm,
    Quadrature,
    EigenExact,
    EigenMonteCarlo,
}

impl RateMethod {
    pub fn name(&self) -> &'static str {
        match self {
            RateMethod::ClosedForm => "closed-form",
            RateMethod::Quadrature => "quadrature",
            RateMethod::EigenExact => "eigen-exact",
            RateMethod::EigenMonteCarlo => "eigen-mc",
        }
    }
}

/// A contraction (or convergence) rate with its minimizing direction.
#[derive(Debug, Clone)]
pub struct RateReport {
    /// `ρ = ½·λ_min(M)`.
    pub rho: f64,
    pub method: RateMethod,
    /// Unit direction achieving the infimum (eigenvector of `λ_min`);
    /// under degeneracy, the deterministic representative described at
    /// [`minimizer_from_eigenspace`].
    pub minimizer: DVector<f64>,
    /// Dimension of the `λ_min` eigenspace (1 unless degenerate).
    pub eigenspace_dim: usize,
    /// Standard error of `ρ` (0 for exact methods).
    pub std_error: f64,
    /// Condition number of the covariance/problem this rate refers to.
    pub kappa: f64,
    pub dim: usize,
    pub label: String,
}

/// Relative eigenvalue gap below which two eigenvalues count as tied.
const DEGENERACY_TOL: f64 = 1e-7;

/// Smallest eigenvalue, its eigenspace dimension, and the deterministic
/// minimizer of a symmetric PSD matrix with unit trace.
///
/// Ties are resolved by picking, inside the `λ_min` eigenspace, the unit
/// vector maximizing the modulus of its first nonzero component, with that
/// component made positive — concretely, the normalized projection of the
/// best-aligned standard basis vector onto the eigenspace.
pub fn min_eigen_with_minimizer(m: &DMatrix<f64>) -> (f64, DVector<f64>, usize) {
    let eig = m.clone().symmetric_eigen();
    let d = m.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambda_min = eig.eigenvalues[order[0]];
    let scale = m.trace().abs().max(1.0);
    let members: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| eig.eigenvalues[i] - lambda_min <= DEGENERACY_TOL * scale)
        .collect();
    let minimizer = minimizer_from_eigenspace(&eig.eigenvectors, &members);
    (lambda_min, minimizer, members.len())
}

fn minimizer_from_eigenspace(vectors: &DMatrix<f64>, members: &[usize]) -> DVector<f64> {
    let d = vectors.nrows();
    // projection of each basis vector e_i onto the eigenspace is the i-th row
    // of the member-column submatrix; pick the longest one
    let mut best_i = 0;
    let mut best_norm2 = -1.0;
    for i in 0..d {
        let mut n2 = 0.0;
        for &c in members {
            n2 += vectors[(i, c)] * vectors[(i, c)];
        }
        if n2 > best_norm2 + 1e-15 {
            best_norm2 = n2;
            best_i = i;
        }
    }
    let mut v = DVector::zeros(d);
    for &c in members {
        let coeff = vectors[(best_i, c)];
        v.axpy(coeff, &vectors.column(c).into_owned(), 1.0);
    }
    let n = v.norm();
    let mut v = v / n;
    // sign convention: first component of magnitude > 0
    for i in 0..d {
        if v[i].abs() > 1e-12 {
            if v[i] < 0.0 {
                v.neg_mut();
            }
            break;
        }
    }
    v
}

fn report_from_second_moment(
    sm: &SecondMoment,
    method: RateMethod,
    kappa: f64,
    label: impl Into<String>,
) -> RateReport {
    let (lambda_min, minimizer, eigenspace_dim) = min_eigen_with_minimizer(&sm.matrix);
    let rho = 0.5 * lambda_min;
    let d = sm.matrix.nrows();
    debug_assert!(rho > 0.0, "rate must be positive, got {rho}");
    debug_assert!(
        rho <= 0.5 / d as f64 + 1e-9,
        "trace(M)=1 forces rho <= 1/(2d); got {rho} in d={d}"
    );
    let std_error = 0.5 * sm.quad_form_se_at(&minimizer);
    RateReport {
        rho,
        method,
        minimizer,
        eigenspace_dim,
        std_error,
        kappa,
        dim: d,
        label: label.into(),
    }
}

/// General contraction rate of the sampler: `½·λ_min` of the second-moment
/// matrix of `C^{-1/2}v/|C^{-1/2}v|`. For symmetric laws this coincides with
/// the variance form, since the pushforward then has mean zero.
pub fn rho_general(
    law: &DirectionLaw,
    cov: &CovarianceSpec,
    estimator: &SecondMomentEstimator,
) -> Result<RateReport> {
    let sm = second_moment_matrix(law, cov, estimator)?;
    let method = match estimator {
        SecondMomentEstimator::ExactDiscrete => RateMethod::EigenExact,
        SecondMomentEstimator::SphereQuadrature { .. } => RateMethod::Quadrature,
        SecondMomentEstimator::MonteCarlo { .. } => RateMethod::EigenMonteCarlo,
    };
    Ok(report_from_second_moment(
        &sm,
        method,
        cov.kappa(),
        "general",
    ))
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::BadKappa(kappa));
    }
    Ok(())
}

/// Bivariate uniform Hit-and-Run rate for `C = diag(κ, 1)`:
/// `ρ = ½(√κ + 1)^{-1}` — ballistic in κ.
pub fn rho_bivariate(kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(0.5 / (kappa.sqrt() + 1.0))
}

/// `C = diag(κ, 1, 1)`: `ρ = ½ ∫_0^{π/2} sin α / (κ tan²α + 1) dα`,
/// superdiffusive (`ρ ≍ κ^{-1} log κ`). Adaptive quadrature to 1e-10.
pub fn rho_3d_one_low(kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    // substituting u = cos α turns the integrand into u²/(κ - (κ-1)u²),
    // bounded and smooth on [0, 1]
    let integral = adaptive_simpson(
        |u| u * u / (kappa - (kappa - 1.0) * u * u),
        0.0,
        1.0,
        1e-12,
    );
    Ok(0.5 * integral)
}

/// `C = diag(κ, κ, 1)`: ballistic again (`ρ ≍ κ^{-1/2}`), minimizing
/// directions on the equator `ζ·e₃ = 0`. Computed through the 3-D sphere
/// quadrature; the report's minimizer is checked to be equatorial.
pub fn rho_3d_one_high(kappa: f64, quadrature_seed: u64) -> Result<RateReport> {
    check_kappa(kappa)?;
    let cov = CovarianceSpec::diagonal(&[kappa, kappa, 1.0])?;
    let law = DirectionLaw::uniform(3);
    let est = SecondMomentEstimator::auto(3, kappa, quadrature_seed);
    let mut report = rho_general(&law, &cov, &est)?;
    report.label = "3d-one-high".into();
    if kappa > 1.0 {
        debug_assert!(
            report.minimizer[2].abs() < 1e-6,
            "minimizer should be equatorial, got e3-component {}",
            report.minimizer[2]
        );
    }
    Ok(report)
}

/// `C = diag(κ, 1, 1, 1)`: diffusive closed form
/// `ρ = κ^{-1} / (2(1 + κ^{-1/2})²) = 1/(2(√κ + 1)²)`.
pub fn rho_4d_one_low(kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    let r = kappa.sqrt() + 1.0;
    Ok(0.5 / (r * r))
}

/// Large-`d` two-scale heuristic for `C = diag(κ I_{d1}, I_{d2})`:
/// `ρ ≈ ½(d₁ + κ d₂)^{-1}`. An approximation, not a bound; callers compare
/// against Monte Carlo with a generous band.
pub fn rho_two_scale_approx(d1: usize, d2: usize, kappa: f64) -> Result<f64> {
    if d1 + d2 < 1 {
        return Err(Error::BadDimensions { d1, d2 });
    }
    check_kappa(kappa)?;
    Ok(0.5 / (d1 as f64 + kappa * d2 as f64))
}

/// Action of the transition kernel on the linear test functions
/// `f_ζ(x) = ζ·C^{-1/2}x`: one step maps `f_ζ ↦ f_{(I - M_τ)ζ}`, so the
/// returned matrix is `I - M_τ` and `‖π f_ζ‖_{L²(γ)} = |(I - M_τ)ζ|`.
pub fn averaged_linear_action(
    law: &DirectionLaw,
    cov: &CovarianceSpec,
    estimator: &SecondMomentEstimator,
) -> Result<DMatrix<f64>> {
    let sm = second_moment_matrix(law, cov, estimator)?;
    Ok(DMatrix::identity(cov.dim(), cov.dim()) - sm.matrix)
}

/// One row of the κ-sweep table: rates for the four low-dimensional cases.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub kappa: f64,
    pub bivariate: f64,
    pub three_d_high: f64,
    pub three_d_low: f64,
    pub four_d_low: f64,
}

/// Scaling summary of the κ-sweep: fitted log-log slopes for the power-law
/// rows and the compensated spread `max/min - 1` of `ρ·κ/log κ` for the
/// superdiffusive row.
#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub slope_bivariate: f64,
    pub slope_three_d_high: f64,
    pub slope_four_d_low: f64,
    pub compensated_spread_three_d_low: f64,
}

/// Sweep the four case studies over the given κ values.
///
/// The bivariate and `diag(κ,κ,1)` rows go through the sphere quadrature
/// (their defining route); the other two use their 1-D integral / closed
/// form, which the unit tests pin against the quadrature and Monte Carlo.
pub fn sweep_table(kappas: &[f64]) -> Result<SweepSummary> {
    let mut rows = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        check_kappa(kappa)?;
        let biv = {
            let cov = CovarianceSpec::diagonal(&[kappa, 1.0])?;
            let est = SecondMomentEstimator::auto(2, kappa, 0);
            rho_general(&DirectionLaw::uniform(2), &cov, &est)?.rho
        };
        let high = rho_3d_one_high(kappa, 0)?.rho;
        let low = rho_3d_one_low(kappa)?;
        let four = rho_4d_one_low(kappa)?;
        rows.push(SweepRow {
            kappa,
            bivariate: biv,
            three_d_high: high,
            three_d_low: low,
            four_d_low: four,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.kappa.ln()).collect();
    let slope = |f: fn(&SweepRow) -> f64| -> f64 {
        let ys: Vec<f64> = rows.iter().map(|r| f(r).ln()).collect();
        crate::stats::ols_slope(&xs, &ys)
    };
    let comp: Vec<f64> = rows
        .iter()
        .map(|r| r.three_d_low * r.kappa / r.kappa.ln())
        .collect();
    let spread = comp.iter().cloned().fold(f64::MIN, f64::max)
        / comp.iter().cloned().fold(f64::MAX, f64::min)
        - 1.0;
    Ok(SweepSummary {
        slope_bivariate: slope(|r| r.bivariate),
        slope_three_d_high: slope(|r| r.three_d_high),
        slope_four_d_low: slope(|r| r.four_d_low),
        compensated_spread_three_d_low: spread,
        rows,
    })
}
