//! One-step overlap bounds, their planar quadrature oracle, and the
//! mixing-time bound they imply.
//!
//! The overlap lemma controls the total variation distance between the
//! transition laws from two starting points by three explicit constants
//! `C₁(x), C₂(x), C₃(x)` built from the natural norm of `x`, the spectral
//! data `m, M, κ` of `C^{-1}`, the dimension, and a free regularization
//! parameter `ε ∈ (0,1)`:
//!
//! `TV ≤ √2 (C₁^{1/2}·Δ + C₂^{1/2}·Δ^{1/2} + C₃·ε^{1/2})`,  `Δ = |x−x̃|_{C^{-1/2}}`.
//!
//! In the plane the transition density has a closed form, so the same TV
//! distance can be computed outright by quadrature and compared against the
//! bound. The density's `|y−x|^{1-d}` singularity is integrable; splitting
//! the plane at the perpendicular bisector of `[x, x̃]` and using polar
//! coordinates about each center cancels each singularity with its own
//! radial Jacobian.

use crate::error::Error;
use crate::gaussian::CovarianceSpec;
use crate::Result;
use nalgebra::DVector;
use rayon::prelude::*;

/// The three overlap constants together with the inputs they echo.
#[derive(Debug, Clone)]
pub struct OverlapConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub natural_norm_x: f64,
    pub epsilon: f64,
    pub m: f64,
    pub big_m: f64,
    pub kappa: f64,
    pub dim: usize,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::BadEpsilon(epsilon));
    }
    Ok(())
}

/// Evaluate `C₁, C₂, C₃` at a starting point.
pub fn overlap_constants(
    cov: &CovarianceSpec,
    x: &DVector<f64>,
    epsilon: f64,
) -> Result<OverlapConstants> {
    check_epsilon(epsilon)?;
    let n = crate::gaussian::natural_norm(cov, x)?;
    Ok(overlap_constants_from_norm(cov, n, epsilon))
}

/// Same constants as a function of `|x|_{C^{-1/2}}` alone (they depend on
/// `x` only through its natural norm).
pub fn overlap_constants_from_norm(
    cov: &CovarianceSpec,
    natural_norm_x: f64,
    epsilon: f64,
) -> OverlapConstants {
    let d = cov.dim() as f64;
    let n = natural_norm_x;
    let inv_eps = 1.0 / epsilon;
    let s = cov.m().powf(-0.5); // m^{-1/2}
    let big_s = cov.big_m().sqrt(); // M^{1/2}
    let quarter = cov.big_m().powf(0.25); // M^{1/4}
    let root_kappa = cov.kappa().sqrt();
    let c1 = inv_eps * s * n + 2.0 * epsilon * big_s + 1.0;
    let c2 = 2.0 * inv_eps * s * n * n
        + 2.0 * n
        + (inv_eps * s + 2.0 * epsilon * root_kappa) * (d - 1.0)
        + 2.0 * inv_eps * s
        + (big_s + s + 2.0) * root_kappa;
    let c3 = 3.0f64.sqrt() * quarter * n
        + 2.0f64.sqrt() * (1.0 + inv_eps.ln()).sqrt() * quarter * (d - 1.0).sqrt()
        + 2.0f64.sqrt() * quarter * (big_s + s + 2.0).sqrt();
    OverlapConstants {
        c1,
        c2,
        c3,
        natural_norm_x: n,
        epsilon,
        m: cov.m(),
        big_m: cov.big_m(),
        kappa: cov.kappa(),
        dim: cov.dim(),
    }
}

/// Raw and clamped (`min(·, 1)`) values of the pointwise TV bound.
#[derive(Debug, Clone, Copy)]
pub struct TvBound {
    pub raw: f64,
    pub clamped: f64,
}

/// Pointwise overlap bound between the transition laws from `x` and `x̃`.
pub fn tv_bound_pointwise(
    cov: &CovarianceSpec,
    x: &DVector<f64>,
    x_tilde: &DVector<f64>,
    epsilon: f64,
) -> Result<TvBound> {
    let constants = overlap_constants(cov, x, epsilon)?;
    let delta = crate::gaussian::natural_norm(cov, &(x - x_tilde))?;
    let raw = 2.0f64.sqrt()
        * (constants.c1.sqrt() * delta
            + constants.c2.sqrt() * delta.sqrt()
            + constants.c3 * epsilon.sqrt());
    Ok(TvBound {
        raw,
        clamped: raw.min(1.0),
    })
}

/// Bound on `TV(η π, ν π)` through the η-averaged constants and the
/// Wasserstein distance `W = W²_{C^{-1/2}}(η, ν)`:
/// `√2 (η(C₁)^{1/2}·W + η(C₂)^{1/2}·W^{1/2} + η(C₃)·ε^{1/2})`.
pub fn tv_measure_bound(eta_stats: &EtaStats, w2: f64, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if !(w2 >= 0.0) || [eta_stats.c1, eta_stats.c2, eta_stats.c3]
        .iter()
        .any(|v| !(*v >= 0.0))
    {
        return Err(Error::BadInputs(
            "eta statistics and w2 must be nonnegative".into(),
        ));
    }
    Ok(2.0f64.sqrt()
        * (eta_stats.c1.sqrt() * w2 + eta_stats.c2.sqrt() * w2.sqrt() + eta_stats.c3 * epsilon.sqrt()))
}

/// η-expectations of the three overlap constants.
#[derive(Debug, Clone, Copy)]
pub struct EtaStats {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// Which value is substituted for `E|x|_{C^{-1/2}}` when η is the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentConvention {
    /// `E|x| ≤ √d` (Jensen), the substitution used when the bound feeds the
    /// mixing-time argument.
    UpperBound,
    /// The exact mean of a chi(d) variable, `√2 Γ((d+1)/2)/Γ(d/2)`; the
    /// Monte Carlo cross-checks target this one.
    Exact,
}

/// η-averaged constants for η = the Gaussian target itself, using
/// `E|x|²_{C^{-1/2}} = d` and the chosen convention for `E|x|_{C^{-1/2}}`.
pub fn gaussian_eta_stats(
    cov: &CovarianceSpec,
    epsilon: f64,
    convention: MomentConvention,
) -> Result<EtaStats> {
    check_epsilon(epsilon)?;
    let d = cov.dim() as f64;
    let mean_norm = match convention {
        MomentConvention::UpperBound => d.sqrt(),
        MomentConvention::Exact => chi_mean(cov.dim()),
    };
    let inv_eps = 1.0 / epsilon;
    let s = cov.m().powf(-0.5);
    let big_s = cov.big_m().sqrt();
    let quarter = cov.big_m().powf(0.25);
    let root_kappa = cov.kappa().sqrt();
    // C₁ and C₃ are affine in |x|, C₂ is quadratic: substitute E|x| and E|x|² = d
    let c1 = inv_eps * s * mean_norm + 2.0 * epsilon * big_s + 1.0;
    let c2 = 2.0 * inv_eps * s * d
        + 2.0 * mean_norm
        + (inv_eps * s + 2.0 * epsilon * root_kappa) * (d - 1.0)
        + 2.0 * inv_eps * s
        + (big_s + s + 2.0) * root_kappa;
    let c3 = 3.0f64.sqrt() * quarter * mean_norm
        + 2.0f64.sqrt() * (1.0 + inv_eps.ln()).sqrt() * quarter * (d - 1.0).sqrt()
        + 2.0f64.sqrt() * quarter * (big_s + s + 2.0).sqrt();
    Ok(EtaStats { c1, c2, c3 })
}

/// Mean of a chi(d) variable.
fn chi_mean(d: usize) -> f64 {
    (2.0f64).sqrt() * (ln_gamma_half_integer(d + 1) - ln_gamma_half_integer(d)).exp()
}

/// `ln Γ(d/2)` for integer `d ≥ 1` (recursion from Γ(1/2) or Γ(1)).
fn ln_gamma_half_integer(d: usize) -> f64 {
    let mut acc: f64;
    let mut x: f64;
    if d % 2 == 0 {
        acc = 0.0;
        x = 1.0;
    } else {
        acc = 0.5 * std::f64::consts::PI.ln();
        x = 0.5;
    }
    while x + 1.0 <= d as f64 / 2.0 + 1e-12 {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

/// Mixing-time upper bound
/// `⌈c · ρ⁻¹ · log(c′ · max(κ, M, m⁻¹) · d · ε⁻¹ · W²_init)⌉`, clamped below
/// at zero.
///
/// The absolute constants of the theorem are unspecified; `c` and `c′`
/// default to 1 and every report carries the "up to unspecified absolute
/// constants" label. Treat the output as an order of magnitude.
pub fn mixing_time_bound(
    cov: &CovarianceSpec,
    rho: f64,
    epsilon_target: f64,
    w2_init: f64,
    const_c: f64,
    const_cprime: f64,
) -> Result<u64> {
    if !(rho > 0.0) || !(epsilon_target > 0.0) || !(w2_init >= 0.0) || !(const_c > 0.0)
        || !(const_cprime > 0.0)
    {
        return Err(Error::BadInputs(
            "need rho > 0, epsilon > 0, w2 >= 0, constants > 0".into(),
        ));
    }
    let spectral = cov.kappa().max(cov.big_m()).max(1.0 / cov.m());
    let arg = const_cprime * spectral * cov.dim() as f64 * w2_init / epsilon_target;
    if arg <= 1.0 {
        return Ok(0);
    }
    Ok((const_c * arg.ln() / rho).ceil().max(0.0) as u64)
}

/// The ε-schedule of the mixing-time argument,
/// `ε = max(κ, M, m⁻¹)^{-2} d^{-2} ε_target⁴` (unit constant convention),
/// clamped into (0, 1).
pub fn schedule_epsilon(cov: &CovarianceSpec, epsilon_target: f64) -> Result<f64> {
    if !(epsilon_target > 0.0) {
        return Err(Error::BadInputs("epsilon_target must be positive".into()));
    }
    let spectral = cov.kappa().max(cov.big_m()).max(1.0 / cov.m());
    let raw = spectral.powi(-2) * (cov.dim() as f64).powi(-2) * epsilon_target.powi(4);
    Ok(raw.clamp(f64::MIN_POSITIVE, 1.0 - 1e-12))
}

/// Polar quadrature resolution for the planar TV oracle.
#[derive(Debug, Clone, Copy)]
pub struct PolarGrid {
    /// Radial Simpson subintervals per angular slice.
    pub n_r: usize,
    /// Angular trapezoid nodes on `[0, 2π)`.
    pub n_theta: usize,
    /// Radial reach in units of the largest standard deviation (plus the
    /// center offset, added internally).
    pub radius_factor: f64,
}

impl Default for PolarGrid {
    fn default() -> Self {
        PolarGrid {
            n_r: 2048,
            n_theta: 4096,
            radius_factor: 12.0,
        }
    }
}

/// Numerically integrated TV value together with the analytic bound on the
/// mass excluded by the radial truncation.
#[derive(Debug, Clone, Copy)]
pub struct TvEstimate {
    pub value: f64,
    pub tail_bound: f64,
}

/// Per-direction data of the kernel at a fixed center: along the ray
/// `y = c + r·u` the product `p(c, y)·r` is exactly
/// `(1/π)·(w/√(2π))·exp(−(w r + b/w)²/2)` with `w = |C^{-1/2}u|`,
/// `b = c·C⁻¹u`. The radial Jacobian has cancelled the singularity.
struct RayKernel {
    w: f64,
    b_over_w: f64,
}

impl RayKernel {
    fn new(cov: &CovarianceSpec, center: &DVector<f64>, u: &DVector<f64>) -> Self {
        let wvec = cov.apply_inv_sqrt(u);
        let w = wvec.norm();
        let b = cov.apply_inv_sqrt(center).dot(&wvec);
        RayKernel { w, b_over_w: b / w }
    }

    /// `p(center, center + r u) · r`.
    fn density_times_r(&self, r: f64) -> f64 {
        let t = self.w * r + self.b_over_w;
        (1.0 / std::f64::consts::PI) * self.w / (2.0 * std::f64::consts::PI).sqrt()
            * (-0.5 * t * t).exp()
    }

    /// Upper bound on the kernel mass beyond radius `r` along this ray
    /// bundle (Mills-ratio bound on the Gaussian tail, divided by π for the
    /// angular density).
    fn tail_beyond(&self, r: f64) -> f64 {
        let t = self.w * r + self.b_over_w;
        if t <= 0.0 {
            return 1.0 / std::f64::consts::PI;
        }
        (-0.5 * t * t).exp() / (t * (2.0 * std::f64::consts::PI).sqrt())
            / std::f64::consts::PI
    }
}

/// `∫ p(x, y) dy` over the disc of the grid's radial reach, in polar
/// coordinates about `x`. Converges to 1; the acceptance suite requires
/// 1e-6.
pub fn kernel_normalization_2d(
    cov: &CovarianceSpec,
    x: &DVector<f64>,
    grid: &PolarGrid,
) -> Result<f64> {
    if cov.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            required: 2,
            got: cov.dim(),
        });
    }
    let radius = grid.radius_factor * cov.max_std() + x.norm() + 2.0 * cov.max_std();
    let d_theta = std::f64::consts::TAU / grid.n_theta as f64;
    let total: f64 = (0..grid.n_theta)
        .into_par_iter()
        .map(|k| {
            let theta = (k as f64 + 0.5) * d_theta;
            let u = DVector::from_vec(vec![theta.cos(), theta.sin()]);
            let ray = RayKernel::new(cov, x, &u);
            crate::quadrature::composite_simpson(
                |r| ray.density_times_r(r),
                0.0,
                radius,
                grid.n_r,
            )
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum::<f64>()
        * d_theta;
    Ok(total)
}

/// TV distance `½∫|p(x,·) − p(x̃,·)|` between the two transition laws by
/// two-patch polar quadrature. Absolute accuracy target 1e-4 at the default
/// grid; the result is clamped to `[0, 1]` only by the mathematics, not by
/// the code.
pub fn tv_quadrature_2d(
    cov: &CovarianceSpec,
    x: &DVector<f64>,
    x_tilde: &DVector<f64>,
    grid: &PolarGrid,
) -> Result<TvEstimate> {
    if cov.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            required: 2,
            got: cov.dim(),
        });
    }
    if x.len() != 2 || x_tilde.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: x.len().max(x_tilde.len()),
        });
    }
    let separation = (x - x_tilde).norm();
    if separation == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let mid = (x + x_tilde) * 0.5;
    let normal_ab = (x_tilde - x) / separation;
    let (a, tail_a) = integrate_half_plane(cov, x, x_tilde, &mid, &normal_ab, grid);
    let (b, tail_b) = integrate_half_plane(cov, x_tilde, x, &mid, &(-&normal_ab), grid);
    Ok(TvEstimate {
        value: 0.5 * (a + b),
        tail_bound: tail_a + tail_b,
    })
}

/// `∫ |p(center, y) − p(foreign, y)| dy` over the half-plane
/// `{y : (y − mid)·normal ≤ 0}` in polar coordinates about `center`
/// (which must lie in that half-plane). Returns the integral and a tail
/// bound for the truncated radius. When the boundary is the perpendicular
/// bisector of `[center, foreign]`, the foreign kernel's singular point is
/// outside the patch and `|y − foreign| ≥ |center − foreign|/2` throughout.
pub(crate) fn integrate_half_plane(
    cov: &CovarianceSpec,
    center: &DVector<f64>,
    foreign: &DVector<f64>,
    mid: &DVector<f64>,
    normal: &DVector<f64>,
    grid: &PolarGrid,
) -> (f64, f64) {
    let radius = grid.radius_factor * cov.max_std() + center.norm() + 2.0 * cov.max_std();
    let d_theta = std::f64::consts::TAU / grid.n_theta as f64;
    let off = (center - mid).dot(normal);

    let same_kernel = center == foreign;
    let slices: Vec<(f64, f64)> = (0..grid.n_theta)
        .into_par_iter()
        .map(|k| {
            let theta = (k as f64 + 0.5) * d_theta;
            let u = DVector::from_vec(vec![theta.cos(), theta.sin()]);
            let toward = u.dot(normal);
            // stay on center's side of the boundary: off + r·toward <= 0
            let r_cap = if toward > 0.0 {
                (-off / toward).min(radius)
            } else {
                radius
            };
            if r_cap <= 0.0 {
                return (0.0, 0.0);
            }
            let ray = RayKernel::new(cov, center, &u);
            let value = crate::quadrature::composite_simpson(
                |r| {
                    let own = ray.density_times_r(r);
                    if same_kernel {
                        return (own - own).abs();
                    }
                    let y0 = center[0] + r * u[0];
                    let y1 = center[1] + r * u[1];
                    let dy0 = y0 - foreign[0];
                    let dy1 = y1 - foreign[1];
                    let r_other = (dy0 * dy0 + dy1 * dy1).sqrt();
                    // p(foreign, y)·r = [p(foreign, y)·r_other]·(r/r_other);
                    // r_other >= sep/2 inside a bisector patch
                    let u_other = DVector::from_vec(vec![dy0 / r_other, dy1 / r_other]);
                    let other_val = RayKernel::new(cov, foreign, &u_other)
                        .density_times_r(r_other)
                        * (r / r_other);
                    (own - other_val).abs()
                },
                0.0,
                r_cap,
                grid.n_r,
            );
            let tail = if r_cap >= radius {
                ray.tail_beyond(radius) * d_theta
            } else {
                0.0
            };
            (value, tail)
        })
        .collect();

    let mut value = 0.0;
    let mut tail = 0.0;
    for (v, t) in slices {
        value += v;
        tail += t;
    }
    (value * d_theta, tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag41() -> CovarianceSpec {
        CovarianceSpec::diagonal(&[4.0, 1.0]).unwrap()
    }

    fn id2() -> CovarianceSpec {
        CovarianceSpec::diagonal(&[1.0, 1.0]).unwrap()
    }

    #[test]
    fn constants_at_the_worked_point() {
        // C = I₂, x = 0, ε = ½
        let c = overlap_constants(&id2(), &DVector::zeros(2), 0.5).unwrap();
        assert_relative_eq!(c.c1, 2.0, max_relative = 1e-14);
        assert_relative_eq!(c.c2, 11.0, max_relative = 1e-14);
        let expected_c3 = 2.0f64.sqrt() * (1.0 + 2.0f64.ln()).sqrt() + 2.0 * 2.0f64.sqrt();
        assert_relative_eq!(c.c3, expected_c3, max_relative = 1e-14);
        assert!((c.c3 - 4.669).abs() < 1e-3);
    }

    #[test]
    fn x_terms_vanish_at_origin_and_c3_depends_only_on_natural_norm() {
        let cov = diag41();
        let at0 = overlap_constants(&cov, &DVector::zeros(2), 0.1).unwrap();
        // x = 0 zeroes every |x| term: recompute with norm 0 matches
        let from_norm = overlap_constants_from_norm(&cov, 0.0, 0.1);
        assert_eq!(at0.c1, from_norm.c1);
        assert_eq!(at0.c2, from_norm.c2);
        assert_eq!(at0.c3, from_norm.c3);
        // two x with the same natural norm give the same constants
        let xa = DVector::from_vec(vec![2.0, 0.0]); // natural norm 1
        let xb = DVector::from_vec(vec![0.0, 1.0]); // natural norm 1
        let ca = overlap_constants(&cov, &xa, 0.1).unwrap();
        let cb = overlap_constants(&cov, &xb, 0.1).unwrap();
        assert_relative_eq!(ca.c3, cb.c3, max_relative = 1e-12);
        assert_relative_eq!(ca.c1, cb.c1, max_relative = 1e-12);
    }

    #[test]
    fn inverse_epsilon_terms_halve_when_epsilon_doubles() {
        let cov = diag41();
        let x = DVector::from_vec(vec![1.0, -0.5]);
        let n = crate::gaussian::natural_norm(&cov, &x).unwrap();
        let s = cov.m().powf(-0.5);
        for eps in [0.05, 0.1, 0.2] {
            let lo = overlap_constants(&cov, &x, eps).unwrap();
            let hi = overlap_constants(&cov, &x, 2.0 * eps).unwrap();
            // C₁: subtract the non-ε⁻¹ parts, the remainder scales as ε⁻¹
            let lo_inv = lo.c1 - 2.0 * eps * cov.big_m().sqrt() - 1.0;
            let hi_inv = hi.c1 - 4.0 * eps * cov.big_m().sqrt() - 1.0;
            assert_relative_eq!(hi_inv, lo_inv / 2.0, max_relative = 1e-12);
            // C₂ likewise
            let c2_inv = |c: &OverlapConstants, e: f64| {
                c.c2 - 2.0 * n
                    - 2.0 * e * cov.kappa().sqrt()
                    - (cov.big_m().sqrt() + s + 2.0) * cov.kappa().sqrt()
            };
            assert_relative_eq!(
                c2_inv(&hi, 2.0 * eps),
                c2_inv(&lo, eps) / 2.0,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn epsilon_validation() {
        let cov = id2();
        let x = DVector::zeros(2);
        for bad in [0.0, 1.0, -0.1, 2.0] {
            assert!(matches!(
                overlap_constants(&cov, &x, bad),
                Err(Error::BadEpsilon(_))
            ));
        }
    }

    #[test]
    fn pointwise_bound_vanishing_separation_limit() {
        // x = x̃: bound reduces to √2 C₃ ε^{1/2} → 0 along ε = 10^{-k}
        let cov = diag41();
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let mut prev = f64::INFINITY;
        for k in 1..=8 {
            let eps = 10.0f64.powi(-k);
            let b = tv_bound_pointwise(&cov, &x, &x, eps).unwrap();
            let c = overlap_constants(&cov, &x, eps).unwrap();
            assert_relative_eq!(b.raw, 2.0f64.sqrt() * c.c3 * eps.sqrt(), max_relative = 1e-12);
            assert!(b.raw < prev);
            prev = b.raw;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn pointwise_bound_monotone_in_separation() {
        let cov = diag41();
        let x = DVector::from_vec(vec![-2.0, 0.0]);
        let mut prev = 0.0;
        for t in [0.0, 0.1, 0.5, 1.0, 2.0, 4.0] {
            let xt = DVector::from_vec(vec![-2.0 + t, t]);
            let b = tv_bound_pointwise(&cov, &x, &xt, 0.1).unwrap().raw;
            assert!(b >= prev - 1e-12);
            prev = b;
        }
    }

    #[test]
    fn measure_bound_reduces_to_c3_term_at_zero_wasserstein() {
        let cov = id2();
        let stats = gaussian_eta_stats(&cov, 0.5, MomentConvention::UpperBound).unwrap();
        let v = tv_measure_bound(&stats, 0.0, 0.5).unwrap();
        assert_relative_eq!(
            v,
            2.0f64.sqrt() * stats.c3 * 0.5f64.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn gaussian_eta_stats_worked_example() {
        // η = γ^C, C = I₂, ε = ½: substitute E|x|² = 2, E|x| ≤ √2
        let cov = id2();
        let stats = gaussian_eta_stats(&cov, 0.5, MomentConvention::UpperBound).unwrap();
        let root2 = 2.0f64.sqrt();
        assert_relative_eq!(stats.c1, 2.0 * root2 + 2.0, max_relative = 1e-12);
        // 2·2·2 + 2√2 + (2+1)(1) + 4 + 4 = 19 + 2√2
        assert_relative_eq!(stats.c2, 19.0 + 2.0 * root2, max_relative = 1e-12);
        let expected_c3 = 3.0f64.sqrt() * root2
            + root2 * (1.0 + 2.0f64.ln()).sqrt()
            + root2 * 2.0;
        assert_relative_eq!(stats.c3, expected_c3, max_relative = 1e-12);
        // full measure bound by hand for w2 = 1
        let v = tv_measure_bound(&stats, 1.0, 0.5).unwrap();
        let by_hand = root2
            * (stats.c1.sqrt() + stats.c2.sqrt() + stats.c3 * 0.5f64.sqrt());
        assert_relative_eq!(v, by_hand, max_relative = 1e-14);
    }

    #[test]
    fn gaussian_c1_matches_monte_carlo_with_exact_moments() {
        let cov = diag41();
        let eps = 0.25;
        let stats = gaussian_eta_stats(&cov, eps, MomentConvention::Exact).unwrap();
        let mut rng = crate::seeding::rng_from_seed(8);
        let n = 100_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..n {
            let x = crate::gaussian::sample_target(&cov, &mut rng);
            let c = overlap_constants(&cov, &x, eps).unwrap();
            acc += c.c1;
            acc2 += c.c1 * c.c1;
        }
        let mean = acc / n as f64;
        let se = ((acc2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!(
            (mean - stats.c1).abs() <= 4.0 * se,
            "MC {mean} vs closed {} (se {se})",
            stats.c1
        );
        // and the √d convention is an upper bound
        let ub = gaussian_eta_stats(&cov, eps, MomentConvention::UpperBound).unwrap();
        assert!(ub.c1 >= stats.c1);
    }

    #[test]
    fn chi_mean_small_dimensions() {
        // chi(1) mean = sqrt(2/pi), chi(2) = sqrt(pi/2), chi(3) = 2 sqrt(2/pi)
        assert_relative_eq!(
            chi_mean(1),
            (2.0 / std::f64::consts::PI).sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            chi_mean(2),
            (std::f64::consts::PI / 2.0).sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            chi_mean(3),
            2.0 * (2.0 / std::f64::consts::PI).sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn mixing_time_pinned_inputs() {
        // worked example: C = diag(4,1), ρ = 1/6, ε = 0.1, W² = √2 → 29
        let cov = diag41();
        let n = mixing_time_bound(&cov, 1.0 / 6.0, 0.1, 2.0f64.sqrt(), 1.0, 1.0).unwrap();
        assert_eq!(n, 29);
        // independent arithmetic: ceil(6 ln(4·2·10·√2))
        let by_hand = (6.0 * (4.0 * 2.0 * 10.0 * 2.0f64.sqrt()).ln()).ceil() as u64;
        assert_eq!(n, by_hand);

        // isotropic 3-D pin: max(κ,M,m⁻¹) = 1, ρ = 1/6, ε = 0.05, W² = 3
        let id3 = CovarianceSpec::diagonal(&[1.0; 3]).unwrap();
        let n = mixing_time_bound(&id3, 1.0 / 6.0, 0.05, 3.0, 1.0, 1.0).unwrap();
        assert_eq!(n, (6.0 * 180.0f64.ln()).ceil() as u64);
        assert_eq!(n, 32);

        // diag(100,1): m⁻¹ = 100, ρ = 0.01, ε = 0.5, W² = 10
        let c100 = CovarianceSpec::diagonal(&[100.0, 1.0]).unwrap();
        let n = mixing_time_bound(&c100, 0.01, 0.5, 10.0, 1.0, 1.0).unwrap();
        assert_eq!(n, (100.0 * 4000.0f64.ln()).ceil() as u64);
        assert_eq!(n, 830);
    }

    #[test]
    fn mixing_time_clamps_and_monotonicity() {
        let cov = id2();
        // log-argument exactly 1 → 0 steps: arg = 1·1·2·w2/ε = 1 for w2 = ε/2
        let n = mixing_time_bound(&cov, 0.3, 0.4, 0.2, 1.0, 1.0).unwrap();
        assert_eq!(n, 0);
        // smaller still → 0
        assert_eq!(mixing_time_bound(&cov, 0.3, 0.4, 0.1, 1.0, 1.0).unwrap(), 0);
        // non-increasing in rho, non-decreasing in 1/ε
        let lo_rho = mixing_time_bound(&cov, 0.05, 0.1, 5.0, 1.0, 1.0).unwrap();
        let hi_rho = mixing_time_bound(&cov, 0.5, 0.1, 5.0, 1.0, 1.0).unwrap();
        assert!(lo_rho >= hi_rho);
        let tight_eps = mixing_time_bound(&cov, 0.05, 0.01, 5.0, 1.0, 1.0).unwrap();
        assert!(tight_eps >= lo_rho);
        assert!(matches!(
            mixing_time_bound(&cov, 0.0, 0.1, 1.0, 1.0, 1.0),
            Err(Error::BadInputs(_))
        ));
    }

    #[test]
    fn epsilon_schedule_stays_in_unit_interval() {
        let cov = diag41();
        for target in [1e-3, 0.1, 0.5, 10.0] {
            let eps = schedule_epsilon(&cov, target).unwrap();
            assert!(eps > 0.0 && eps < 1.0);
        }
        // unit-constant convention: max(κ,M,m⁻¹)^{-2} d^{-2} ε⁴
        let eps = schedule_epsilon(&cov, 0.5).unwrap();
        assert_relative_eq!(eps, 4.0f64.powi(-2) * 4.0f64.recip() * 0.5f64.powi(4));
    }

    #[test]
    fn normalization_of_kernel_marginals() {
        let cov = diag41();
        for x in [
            DVector::from_vec(vec![-2.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
        ] {
            let total = kernel_normalization_2d(&cov, &x, &PolarGrid::default()).unwrap();
            assert!((total - 1.0).abs() < 1e-6, "normalization {total}");
        }
    }

    #[test]
    fn tv_of_nearly_coincident_kernels_is_small() {
        let cov = diag41();
        let x = DVector::from_vec(vec![-2.0, 0.0]);
        let xt = DVector::from_vec(vec![-2.0 + 1e-3, 0.0]);
        let tv = tv_quadrature_2d(&cov, &x, &xt, &PolarGrid::default()).unwrap();
        assert!(tv.value >= 0.0 && tv.value <= 0.05, "tv {}", tv.value);
        assert!(matches!(
            tv_quadrature_2d(&cov, &x, &x, &PolarGrid::default()),
            Err(Error::CoincidentPoints)
        ));
    }

    #[test]
    fn identical_kernel_on_both_sides_integrates_to_zero() {
        // the patch machinery applied to one kernel against itself, with the
        // boundary pushed past the radial reach so the patch covers the
        // kernel's entire effective support
        let cov = diag41();
        let x = DVector::from_vec(vec![0.5, -1.0]);
        let mid = DVector::from_vec(vec![1e3, -1.0]);
        let normal = DVector::from_vec(vec![1.0, 0.0]);
        let grid = PolarGrid::default();
        let (whole_plane, tail) = integrate_half_plane(&cov, &x, &x, &mid, &normal, &grid);
        let self_tv = 0.5 * whole_plane;
        assert!(self_tv.abs() <= 1e-4, "self TV {self_tv}");
        assert!(tail < 1e-12);
    }

    #[test]
    fn tv_symmetry_in_the_arguments() {
        let cov = diag41();
        let x = DVector::from_vec(vec![-2.0, 0.0]);
        let xt = DVector::from_vec(vec![0.0, 1.0]);
        let grid = PolarGrid::default();
        let ab = tv_quadrature_2d(&cov, &x, &xt, &grid).unwrap();
        let ba = tv_quadrature_2d(&cov, &xt, &x, &grid).unwrap();
        assert!((ab.value - ba.value).abs() <= 2e-4);
        assert!(ab.value > 0.0 && ab.value < 1.0);
    }

    /// Frozen from this oracle at grid 8192×8192, radius factor 14; the
    /// default grid must reproduce it to quadrature accuracy.
    const FIGURE_TV_REGRESSION: f64 = 0.5449402019806668;

    #[test]
    fn figure_configuration_regression_value() {
        // C = diag(4,1), x = (-2,0), x̃ = (0,1): value recorded once from
        // this oracle at high resolution and frozen
        let cov = diag41();
        let x = DVector::from_vec(vec![-2.0, 0.0]);
        let xt = DVector::from_vec(vec![0.0, 1.0]);
        let tv = tv_quadrature_2d(&cov, &x, &xt, &PolarGrid::default()).unwrap();
        assert!(tv.value > 0.0 && tv.value < 1.0);
        assert!(
            (tv.value - FIGURE_TV_REGRESSION).abs() < 5e-4,
            "tv {} vs frozen {FIGURE_TV_REGRESSION}",
            tv.value
        );
        assert!(tv.tail_bound < 1e-12);
    }

    #[test]
    fn pointwise_bound_dominates_quadrature_on_the_grid() {
        // 5 x-points × 5 x̃-points in [-3,3]², ε ∈ {0.05, 0.1, 0.3}
        let cov = diag41();
        let points: Vec<DVector<f64>> = vec![
            DVector::from_vec(vec![-3.0, -3.0]),
            DVector::from_vec(vec![-3.0, 3.0]),
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![3.0, -3.0]),
            DVector::from_vec(vec![3.0, 3.0]),
        ];
        let grid = PolarGrid {
            n_r: 1024,
            n_theta: 2048,
            radius_factor: 12.0,
        };
        for x in &points {
            for xt in &points {
                let tv = if x == xt {
                    0.0
                } else {
                    tv_quadrature_2d(&cov, x, xt, &grid).unwrap().value
                };
                for eps in [0.05, 0.1, 0.3] {
                    let bound = tv_bound_pointwise(&cov, x, xt, eps).unwrap();
                    assert!(
                        tv <= bound.clamped + 1e-3,
                        "x={x:?} xt={xt:?} eps={eps}: tv {tv} vs bound {}",
                        bound.clamped
                    );
                }
            }
        }
    }
}
