//! The generalized Hit-and-Run kernel for a centered Gaussian target.
//!
//! One transition from `x`: draw `v ~ τ` and `Z ~ N(0,1)`; the Gaussian
//! conditioned to the line `x + ℝv` is the scalar displacement law
//! `N(-x·C⁻¹v/|C^{-1/2}v|², |C^{-1/2}v|^{-2})`, and the next state is
//! `x + Hv`. In natural coordinates `u = C^{-1/2}x` the same step reads
//! `u' = Π_ŵ u + Z ŵ` with `ŵ = C^{-1/2}v/|C^{-1/2}v|`: project out the
//! component along `ŵ`, then redraw it from the standard normal. The
//! projection form is the primary code path (it is what couples); debug
//! builds assert the two forms agree.

use crate::directions::{pushforward_direction, sample_direction, DirectionLaw};
use crate::error::Error;
use crate::gaussian::{natural_norm, CovarianceSpec};
use crate::seeding::Rng;
use crate::stats::RunningMoments;
use crate::Result;
use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};

/// Position of a chain together with how many transitions produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub position: DVector<f64>,
    pub step_count: u64,
}

impl ChainState {
    pub fn new(position: DVector<f64>) -> Result<Self> {
        if position.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadInputs("chain position must be finite".into()));
        }
        Ok(ChainState {
            position,
            step_count: 0,
        })
    }
}

/// Mean and variance of the scalar displacement law along the line through
/// `x` in unit direction `v`.
pub fn displacement_law(
    cov: &CovarianceSpec,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<(f64, f64)> {
    if x.len() != cov.dim() || v.len() != cov.dim() {
        return Err(Error::DimensionMismatch {
            expected: cov.dim(),
            got: if x.len() != cov.dim() { x.len() } else { v.len() },
        });
    }
    let w = cov.apply_inv_sqrt(v);
    let wn2 = w.norm_squared();
    let u = cov.apply_inv_sqrt(x);
    // x·C⁻¹v = (C^{-1/2}x)·(C^{-1/2}v)
    let mean = -u.dot(&w) / wn2;
    Ok((mean, 1.0 / wn2))
}

/// One transition of the generalized Hit-and-Run kernel, with the direction
/// and normal drawn inside.
pub fn step(
    cov: &CovarianceSpec,
    law: &DirectionLaw,
    state: &ChainState,
    rng: &mut Rng,
) -> Result<ChainState> {
    let v = sample_direction(law, rng)?;
    let z: f64 = StandardNormal.sample(rng);
    step_with_draws(cov, state, &v, z)
}

/// One transition with the auxiliary draws `(v, Z)` supplied by the caller.
/// This is the shared-randomness entry point used by the synchronous
/// coupling.
pub fn step_with_draws(
    cov: &CovarianceSpec,
    state: &ChainState,
    v: &DVector<f64>,
    z: f64,
) -> Result<ChainState> {
    let what = pushforward_direction(cov, v)?;
    let u = cov.apply_inv_sqrt(&state.position);
    let u_next = &u - &what * u.dot(&what) + &what * z;
    let position = cov.apply_sqrt(&u_next);
    debug_assert!(
        {
            let (mean, var) = displacement_law(cov, &state.position, v).unwrap();
            let direct = &state.position + v * (mean + var.sqrt() * z);
            (&position - &direct).norm()
                <= 1e-10 * (1.0 + position.norm() + direct.norm())
        },
        "projection and displacement forms disagree"
    );
    debug_assert!(
        {
            // conditional correctness: the move stays on the line L(x, v)
            let delta = &position - &state.position;
            let residual = &delta - v * delta.dot(v);
            residual.norm() <= 1e-12 * (1.0 + delta.norm())
        },
        "output left the sampled line"
    );
    Ok(ChainState {
        position,
        step_count: state.step_count + 1,
    })
}

/// Trajectory summary of a chain run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `|x_k|_{C^{-1/2}}` for `k = 0..=n_steps`.
    pub natural_norms: Vec<f64>,
    /// Stored positions as `(step index, position)`; uniformly thinned once
    /// the configured cap is exceeded. The initial state is index 0.
    pub positions: Vec<(u64, DVector<f64>)>,
    /// Streaming moments over every visited state (never thinned).
    pub moments: RunningMoments,
    pub final_state: ChainState,
}

/// Default cap on stored positions before thinning kicks in.
pub const DEFAULT_POSITION_CAP: usize = 1_000_000;

/// Run `n_steps` transitions from `x0`, recording natural norms, thinned
/// positions and exact streaming moments.
pub fn run_chain(
    cov: &CovarianceSpec,
    law: &DirectionLaw,
    x0: DVector<f64>,
    n_steps: usize,
    rng: &mut Rng,
    position_cap: usize,
) -> Result<Trajectory> {
    let mut state = ChainState::new(x0)?;
    let cap = position_cap.max(2);
    // thinning stride doubles each time the cap would overflow
    let mut stride: u64 = 1;
    let mut positions: Vec<(u64, DVector<f64>)> = Vec::new();
    let mut natural_norms = Vec::with_capacity(n_steps + 1);
    let mut moments = RunningMoments::new(cov.dim());

    let record = |positions: &mut Vec<(u64, DVector<f64>)>,
                  stride: &mut u64,
                  s: &ChainState| {
        if s.step_count % *stride == 0 {
            if positions.len() == cap {
                positions.retain(|(k, _)| k % (*stride * 2) == 0);
                *stride *= 2;
                if s.step_count % *stride != 0 {
                    return;
                }
            }
            positions.push((s.step_count, s.position.clone()));
        }
    };

    natural_norms.push(natural_norm(cov, &state.position)?);
    moments.push(&state.position);
    record(&mut positions, &mut stride, &state);
    for _ in 0..n_steps {
        state = step(cov, law, &state, rng)?;
        natural_norms.push(natural_norm(cov, &state.position)?);
        moments.push(&state.position);
        record(&mut positions, &mut stride, &state);
    }
    Ok(Trajectory {
        natural_norms,
        positions,
        moments,
        final_state: state,
    })
}

/// Surface area of the unit sphere `S^{d-1}`: `2 π^{d/2} / Γ(d/2)`, in logs.
fn ln_sphere_area(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    (2.0f64).ln() + half * std::f64::consts::PI.ln() - ln_gamma_half_integer(d)
}

/// `ln Γ(d/2)` for integer `d ≥ 1` by the recursion from Γ(1/2) = √π or
/// Γ(1) = 1; exact up to rounding, no series needed at these sizes.
fn ln_gamma_half_integer(d: usize) -> f64 {
    let mut acc: f64;
    let mut x: f64;
    if d % 2 == 0 {
        acc = 0.0; // ln Γ(1)
        x = 1.0;
    } else {
        acc = 0.5 * std::f64::consts::PI.ln(); // ln Γ(1/2)
        x = 0.5;
    }
    while x + 1.0 <= d as f64 / 2.0 + 1e-12 {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

/// Log transition density of uniform Hit-and-Run between distinct points.
///
/// The Cartesian form of the kernel:
/// `p(x,y) = (2/a_{d-1}) · |C^{-1/2}(y-x)| / (√(2π) |y-x|^d) ·
///   exp(-½|C^{-1/2}y|² + ½|C^{-1/2}x|² - (x·C⁻¹(y-x))²/(2|C^{-1/2}(y-x)|²))`
/// where `a_{d-1}` is the surface area of the unit sphere. Defined for the
/// uniform law only and for `d ≥ 2`.
pub fn transition_log_density(
    cov: &CovarianceSpec,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<f64> {
    let d = cov.dim();
    if d < 2 {
        return Err(Error::UnsupportedDimension { required: 2, got: d });
    }
    if x.len() != d || y.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if x.len() != d { x.len() } else { y.len() },
        });
    }
    let diff = y - x;
    let r = diff.norm();
    if r == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let w = cov.apply_inv_sqrt(&diff);
    let wn = w.norm();
    let uy = cov.apply_inv_sqrt(y).norm_squared();
    let ux = cov.apply_inv_sqrt(x);
    let cross = ux.dot(&w); // = x·C⁻¹(y-x)
    let log_prefactor = (2.0f64).ln() - ln_sphere_area(d) + wn.ln()
        - 0.5 * (2.0 * std::f64::consts::PI).ln()
        - d as f64 * r.ln();
    Ok(log_prefactor - 0.5 * uy + 0.5 * ux.norm_squared() - cross * cross / (2.0 * wn * wn))
}
