//! Classical, coordinate-free and generalized randomized Kaczmarz.
//!
//! For a consistent overdetermined system `Ax = b`, one iteration projects
//! the current point onto the hyperplane `{x : v·(Ax − b) = 0}` of a random
//! `v` on the sphere:
//!
//! `x' = Π_{Aᵀv} x + (v·b/|Aᵀv|) · Aᵀv/|Aᵀv|`.
//!
//! With `v` drawn from the row-weighted atom law this is the classical
//! randomized Kaczmarz method; with `v ~ Unif(S^{d-1})` it becomes the
//! coordinate-free variant. The error `x_k − x*` evolves by the pure random
//! projection `Π_{Aᵀv}`, so `√(E|x_k − x*|²) ≤ (1−ρ)^k |x_0 − x*|` with
//! `ρ = ½·λ_min(E[ĝĝᵀ])`, `ĝ = Aᵀv/|Aᵀv|`.

use crate::directions::{
    pushforward_second_moment, sample_direction, DirectionLaw, SecondMomentEstimator,
};
use crate::error::Error;
use crate::rates::{min_eigen_with_minimizer, RateMethod, RateReport};
use crate::seeding::{stream_rng, Rng};
use crate::stats::{fit_log_decay, trailing_window, DecayFit};
use crate::Result;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

/// Relative singular-value floor below which the matrix counts as rank
/// deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Consistency tolerance on the least-squares residual.
pub const CONSISTENCY_TOL: f64 = 1e-8;

/// Degenerate-direction threshold, relative to `‖A‖_F`.
pub const DEGENERATE_TOL: f64 = 1e-14;

/// Maximum resample attempts when a drawn direction is degenerate.
const MAX_RETRIES: usize = 100;

/// A consistent overdetermined system with a validated reference solution.
#[derive(Debug, Clone)]
pub struct KaczmarzProblem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Least-squares solution, exact for consistent systems.
    pub x_star: DVector<f64>,
    pub frobenius_sq: f64,
}

/// Validate `A` (full column rank) and `b` (consistent), solving for the
/// reference solution by SVD.
pub fn build_problem(matrix: DMatrix<f64>, rhs: DVector<f64>) -> Result<KaczmarzProblem> {
    let (d, m) = matrix.shape();
    if m < 1 || d < m {
        return Err(Error::BadInputs(format!(
            "need d >= m >= 1, got {d}x{m}"
        )));
    }
    if rhs.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rhs.len(),
        });
    }
    let svd = matrix.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    if !(sigma_min > RANK_TOL * sigma_max) {
        return Err(Error::RankDeficient {
            ratio: sigma_min / sigma_max,
        });
    }
    let x_star = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::BadInputs(e.to_string()))?;
    let residual = (&matrix * &x_star - &rhs).norm();
    let tol = CONSISTENCY_TOL * (1.0 + rhs.norm());
    if residual > tol {
        return Err(Error::Inconsistent { residual, tol });
    }
    let frobenius_sq = matrix.iter().map(|v| v * v).sum();
    Ok(KaczmarzProblem {
        matrix,
        rhs,
        x_star,
        frobenius_sq,
    })
}

/// The example system `A = [[0, 1], [a, 1]]`, `b = 0`, `a ∈ (0, 1)`: its
/// rows are nearly collinear, so the classical method is diffusive in `a`
/// while the coordinate-free one is ballistic.
pub fn example_matrix(a: f64) -> Result<DMatrix<f64>> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::BadA(a));
    }
    Ok(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, a, 1.0]))
}

/// One projection step onto the hyperplane of a drawn direction.
///
/// Continuous laws resample on a degenerate draw (`|Aᵀv|` below threshold),
/// a measure-zero event kept for robustness; discrete laws exclude zero
/// rows by construction, so persistent degeneracy is an input error.
pub fn kaczmarz_step(
    problem: &KaczmarzProblem,
    law: &DirectionLaw,
    x: &DVector<f64>,
    rng: &mut Rng,
) -> Result<DVector<f64>> {
    if law.dim() != problem.matrix.nrows() {
        return Err(Error::DimensionMismatch {
            expected: problem.matrix.nrows(),
            got: law.dim(),
        });
    }
    let threshold = DEGENERATE_TOL * problem.frobenius_sq.sqrt();
    for _ in 0..=MAX_RETRIES {
        let v = sample_direction(law, rng)?;
        let g = problem.matrix.transpose() * &v;
        let gn = g.norm();
        if gn <= threshold {
            continue;
        }
        let offset = (g.dot(x) - v.dot(&problem.rhs)) / (gn * gn);
        let next = x - &g * offset;
        debug_assert!(
            (g.dot(&next) - v.dot(&problem.rhs)).abs()
                <= 1e-10 * (1.0 + v.dot(&problem.rhs).abs()),
            "iterate left the selected hyperplane"
        );
        debug_assert!(
            (&next - &problem.x_star).norm()
                <= (x - &problem.x_star).norm() * (1.0 + 1e-12) + 1e-300,
            "projection moved away from the solution"
        );
        return Ok(next);
    }
    Err(Error::DegenerateDirection {
        retries: MAX_RETRIES,
    })
}

/// Classical randomized Kaczmarz rate: `ρ = λ_min(AᵀA) / (2‖A‖_F²)`, equal
/// to `½‖A‖_F⁻² inf |Aζ|²`. The report's `std_error` is zero (exact) and
/// the lower-bound form via the smallest singular value is the same number.
pub fn rate_classical(matrix: &DMatrix<f64>) -> Result<RateReport> {
    let m = matrix.ncols();
    if m == 0 || matrix.nrows() < m {
        return Err(Error::BadInputs("need d >= m >= 1".into()));
    }
    let gram = matrix.transpose() * matrix;
    let fro2: f64 = matrix.iter().map(|v| v * v).sum();
    let (lam_min, minimizer, eigenspace_dim) = min_eigen_with_minimizer(&gram);
    Ok(RateReport {
        rho: lam_min / (2.0 * fro2),
        method: RateMethod::EigenExact,
        minimizer,
        eigenspace_dim,
        std_error: 0.0,
        kappa: {
            let eigs = gram.symmetric_eigen().eigenvalues;
            eigs.max() / eigs.min()
        },
        dim: m,
        label: "kaczmarz-classical".into(),
    })
}

/// Generalized rate `ρ = ½·λ_min(E[ĝĝᵀ])`, `ĝ = Aᵀv/|Aᵀv|`, for any
/// direction law on the row sphere. For the row-weighted law this reduces
/// to [`rate_classical`] exactly: the weighted atom sum of `ĝᵢĝᵢᵀ` is
/// `AᵀA/‖A‖_F²`.
pub fn rate_general(
    matrix: &DMatrix<f64>,
    law: &DirectionLaw,
    estimator: &SecondMomentEstimator,
) -> Result<RateReport> {
    if law.dim() != matrix.nrows() {
        return Err(Error::DimensionMismatch {
            expected: matrix.nrows(),
            got: law.dim(),
        });
    }
    let mt = matrix.transpose();
    let sm = pushforward_second_moment(law, |v| &mt * v, matrix.ncols(), estimator)?;
    let (lam_min, minimizer, eigenspace_dim) = min_eigen_with_minimizer(&sm.matrix);
    let method = match estimator {
        SecondMomentEstimator::ExactDiscrete => RateMethod::EigenExact,
        SecondMomentEstimator::SphereQuadrature { .. } => RateMethod::Quadrature,
        SecondMomentEstimator::MonteCarlo { .. } => RateMethod::EigenMonteCarlo,
    };
    let std_error = 0.5 * sm.quad_form_se_at(&minimizer);
    Ok(RateReport {
        rho: 0.5 * lam_min,
        method,
        minimizer,
        eigenspace_dim,
        std_error,
        kappa: {
            let gram = matrix.transpose() * matrix;
            let eigs = gram.symmetric_eigen().eigenvalues;
            eigs.max() / eigs.min()
        },
        dim: matrix.ncols(),
        label: "kaczmarz-general".into(),
    })
}

/// Error trajectory of one solve run.
#[derive(Debug, Clone)]
pub struct SolveTrajectory {
    /// `|x_k − x*|` for `k = 0..=n_iters`; non-increasing pathwise.
    pub errors: Vec<f64>,
    pub final_iterate: DVector<f64>,
}

/// Run the generalized iteration from `x0` for `n_iters` steps.
pub fn solve(
    problem: &KaczmarzProblem,
    law: &DirectionLaw,
    x0: &DVector<f64>,
    n_iters: usize,
    rng: &mut Rng,
) -> Result<SolveTrajectory> {
    let mut x = x0.clone();
    let mut errors = Vec::with_capacity(n_iters + 1);
    errors.push((&x - &problem.x_star).norm());
    for _ in 0..n_iters {
        x = kaczmarz_step(problem, law, &x, rng)?;
        errors.push((&x - &problem.x_star).norm());
    }
    Ok(SolveTrajectory {
        errors,
        final_iterate: x,
    })
}

/// Which update law the convergence experiment uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Row-weighted atom selection (classical randomized Kaczmarz).
    Classical,
    /// Uniform direction on the row sphere (coordinate-free).
    CoordinateFree,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Classical => "classical",
            Variant::CoordinateFree => "coordinate-free",
        }
    }
}

/// Replica-averaged error curves and fitted decay rates.
#[derive(Debug, Clone)]
pub struct ExperimentCurve {
    pub variant: Variant,
    /// Replica mean of `|x_k − x*|` (the mean-error curve).
    pub mean_error: Vec<f64>,
    /// Replica mean of `|x_k − x*|²`.
    pub mean_sq_error: Vec<f64>,
    /// Standard error of the mean-error curve.
    pub std_error: Vec<f64>,
    /// Fitted per-iteration log-decay of the mean-error curve over the
    /// trailing window. Tracks `2ρ` for both variants at these sizes (the
    /// paper's mean-error reading).
    pub fit_mean_error: Option<DecayFit>,
    /// Fitted per-iteration log-decay of the mean squared error. This is
    /// NOT `2ρ` in general: the error direction keeps escaping the worst
    /// direction, which accelerates the second moment (exactly `4ρ` for the
    /// example matrix's classical variant in the small-`a` limit).
    pub fit_mean_sq_error: Option<DecayFit>,
    pub fit_window: std::ops::Range<usize>,
    /// The module-computed rate for this variant.
    pub rho: f64,
    pub replicas: usize,
    pub iters: usize,
}

/// Convergence experiment on the example system `Ax = 0` from `x0 = (-10, 0)`.
///
/// Iteration count defaults to `ceil(6/ρ)` so the curves traverse several
/// e-folds. Replicas run on derived seeds and are reduced in replica order.
pub fn convergence_experiment(
    a: f64,
    variant: Variant,
    replicas: usize,
    iters: Option<usize>,
    master_seed: u64,
) -> Result<ExperimentCurve> {
    let matrix = example_matrix(a)?;
    let problem = build_problem(matrix.clone(), DVector::zeros(2))?;
    let law = match variant {
        Variant::Classical => DirectionLaw::row_weighted(matrix.clone())?,
        Variant::CoordinateFree => DirectionLaw::uniform(2),
    };
    let rho = match variant {
        Variant::Classical => rate_classical(&matrix)?.rho,
        Variant::CoordinateFree => {
            rate_general(
                &matrix,
                &law,
                &SecondMomentEstimator::SphereQuadrature { nodes: 1 << 16 },
            )?
            .rho
        }
    };
    let x0 = DVector::from_vec(vec![-10.0, 0.0]);
    run_experiment(&problem, &law, &x0, variant, rho, replicas, iters, master_seed)
}

/// Direction law pre-resolved against the system for the experiment's inner
/// loop: discrete laws reduce to cached projection data per atom, the
/// uniform law to a buffer-reusing draw. One iteration performs no heap
/// allocation either way.
enum PreparedLaw {
    Atoms {
        /// Normal vectors `Aᵀe` of the atoms' hyperplanes.
        normals: Vec<DVector<f64>>,
        inv_norm_sq: Vec<f64>,
        /// `v·b` per atom.
        offsets: Vec<f64>,
        /// Cumulative weights for inverse-CDF selection.
        cumulative: Vec<f64>,
    },
    Uniform {
        rows: usize,
    },
}

impl PreparedLaw {
    fn build(problem: &KaczmarzProblem, law: &DirectionLaw) -> Result<Self> {
        match law {
            DirectionLaw::UniformSphere { dim } => Ok(PreparedLaw::Uniform { rows: *dim }),
            _ => {
                let atoms = law.atoms().ok_or(Error::EmptySupport)?;
                let threshold = DEGENERATE_TOL * problem.frobenius_sq.sqrt();
                let mut normals = Vec::with_capacity(atoms.len());
                let mut inv_norm_sq = Vec::with_capacity(atoms.len());
                let mut offsets = Vec::with_capacity(atoms.len());
                let mut cumulative = Vec::with_capacity(atoms.len());
                let mut acc = 0.0;
                for (v, w) in &atoms {
                    let g = problem.matrix.transpose() * v;
                    let gn = g.norm();
                    if gn <= threshold {
                        return Err(Error::DegenerateDirection { retries: 0 });
                    }
                    acc += w;
                    normals.push(g);
                    inv_norm_sq.push(1.0 / (gn * gn));
                    offsets.push(v.dot(&problem.rhs));
                    cumulative.push(acc);
                }
                Ok(PreparedLaw::Atoms {
                    normals,
                    inv_norm_sq,
                    offsets,
                    cumulative,
                })
            }
        }
    }
}

/// One full replica; `errors` is overwritten in place.
fn solve_replica(
    problem: &KaczmarzProblem,
    prepared: &PreparedLaw,
    x0: &DVector<f64>,
    iters: usize,
    rng: &mut Rng,
    x: &mut DVector<f64>,
    v: &mut DVector<f64>,
    g: &mut DVector<f64>,
    errors: &mut [f64],
) -> Result<()> {
    use rand::Rng as _;
    x.copy_from(x0);
    let err = |x: &DVector<f64>| -> f64 {
        x.iter()
            .zip(problem.x_star.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    errors[0] = err(x);
    let threshold_sq = (DEGENERATE_TOL * problem.frobenius_sq.sqrt()).powi(2);
    for k in 1..=iters {
        match prepared {
            PreparedLaw::Atoms {
                normals,
                inv_norm_sq,
                offsets,
                cumulative,
            } => {
                let u: f64 = rng.random();
                let idx = match cumulative
                    .binary_search_by(|c| c.partial_cmp(&u).expect("finite weights"))
                {
                    Ok(i) | Err(i) => i.min(normals.len() - 1),
                };
                let gref = &normals[idx];
                let step = (gref.dot(x) - offsets[idx]) * inv_norm_sq[idx];
                x.axpy(-step, gref, 1.0);
            }
            PreparedLaw::Uniform { .. } => {
                let mut retries = 0usize;
                loop {
                    let mut norm_sq = 0.0;
                    for vi in v.iter_mut() {
                        let z: f64 = StandardNormal.sample(rng);
                        *vi = z;
                        norm_sq += z * z;
                    }
                    if norm_sq <= 1e-24 {
                        continue;
                    }
                    *v /= norm_sq.sqrt();
                    g.gemv_tr(1.0, &problem.matrix, v, 0.0);
                    if g.norm_squared() > threshold_sq {
                        break;
                    }
                    retries += 1;
                    if retries > MAX_RETRIES {
                        return Err(Error::DegenerateDirection {
                            retries: MAX_RETRIES,
                        });
                    }
                }
                let gn2 = g.norm_squared();
                let step = (g.dot(x) - v.dot(&problem.rhs)) / gn2;
                x.axpy(-step, g, 1.0);
            }
        }
        errors[k] = err(x);
    }
    Ok(())
}

/// Generic replica-averaged solve used by both the example experiment and
/// the CLI for user-supplied systems.
///
/// Replicas run sequentially in replica-index order on derived seeds with
/// streaming (Welford) accumulation, so the result is bit-stable for a
/// fixed `(master_seed, replicas, iters)` and the memory footprint is one
/// series, not `replicas` of them.
#[allow(clippy::too_many_arguments)]
pub fn run_experiment(
    problem: &KaczmarzProblem,
    law: &DirectionLaw,
    x0: &DVector<f64>,
    variant: Variant,
    rho: f64,
    replicas: usize,
    iters: Option<usize>,
    master_seed: u64,
) -> Result<ExperimentCurve> {
    if replicas < 2 {
        return Err(Error::InsufficientReplicas(replicas));
    }
    if x0.len() != problem.matrix.ncols() {
        return Err(Error::DimensionMismatch {
            expected: problem.matrix.ncols(),
            got: x0.len(),
        });
    }
    if law.dim() != problem.matrix.nrows() {
        return Err(Error::DimensionMismatch {
            expected: problem.matrix.nrows(),
            got: law.dim(),
        });
    }
    let iters = iters.unwrap_or_else(|| (6.0 / rho).ceil() as usize);
    let prepared = PreparedLaw::build(problem, law)?;
    let mut mean = vec![0.0; iters + 1];
    let mut mean_sq = vec![0.0; iters + 1];
    let mut m2 = vec![0.0; iters + 1];
    let mut errors = vec![0.0; iters + 1];
    let mut x = DVector::zeros(problem.matrix.ncols());
    let mut v = DVector::zeros(problem.matrix.nrows());
    let mut g = DVector::zeros(problem.matrix.ncols());
    for r in 0..replicas {
        let mut rng = stream_rng(master_seed, r as u64);
        solve_replica(
            problem,
            &prepared,
            x0,
            iters,
            &mut rng,
            &mut x,
            &mut v,
            &mut g,
            &mut errors,
        )?;
        let nf = (r + 1) as f64;
        for (k, &e) in errors.iter().enumerate() {
            let delta = e - mean[k];
            mean[k] += delta / nf;
            m2[k] += delta * (e - mean[k]);
            mean_sq[k] += (e * e - mean_sq[k]) / nf;
        }
    }
    let nf = replicas as f64;
    let std_error: Vec<f64> = m2.iter().map(|&s| (s / (nf - 1.0) / nf).sqrt()).collect();
    let window = trailing_window(iters);
    Ok(ExperimentCurve {
        variant,
        fit_mean_error: fit_log_decay(&mean, window.clone()),
        fit_mean_sq_error: fit_log_decay(&mean_sq, window.clone()),
        mean_error: mean,
        mean_sq_error: mean_sq,
        std_error,
        fit_window: window,
        rho,
        replicas,
        iters,
    })
}

/// The paper's closed form for the coordinate-free rate on the example
/// matrix, `a(1+a) / (2(2 + a(2+a)))`.
///
/// This equals the directional half-variance `½·E(e₁·ĝ)²` exactly (the
/// quadrature tests pin that identity), but it is an upper bound on the
/// infimum over directions: `E[ĝĝᵀ]` has off-diagonal entry
/// `a(2−2a+a²)/(4+a⁴) ≠ 0`, so the minimizer tilts away from `e₁` and
/// `½λ_min` is a few percent smaller (≈4.6% at `a = 0.1`).
pub fn free_rate_e1_closed_form(a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::BadA(a));
    }
    Ok(a * (1.0 + a) / (2.0 * (2.0 + a * (2.0 + a))))
}

/// `½·E(e₁·ĝ)²` for the example matrix by direct angular quadrature,
/// the independent cross-check of [`free_rate_e1_closed_form`].
pub fn free_rate_e1_quadrature(a: f64, nodes: usize) -> Result<f64> {
    let matrix = example_matrix(a)?;
    let mt = matrix.transpose();
    let law = DirectionLaw::uniform(2);
    let sm = pushforward_second_moment(
        &law,
        |v| &mt * v,
        2,
        &SecondMomentEstimator::SphereQuadrature { nodes },
    )?;
    Ok(0.5 * sm.matrix[(0, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from_seed;
    use approx::assert_relative_eq;

    #[test]
    fn build_problem_examples() {
        let p = build_problem(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![1.0, 2.0]),
        )
        .unwrap();
        assert_relative_eq!(p.x_star, DVector::from_vec(vec![1.0, 2.0]), epsilon = 1e-12);

        let p = build_problem(example_matrix(0.3).unwrap(), DVector::zeros(2)).unwrap();
        assert!(p.x_star.norm() < 1e-12);

        // no exact solution: A = [[1],[1]], b = (1,2)
        let bad = build_problem(
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            DVector::from_vec(vec![1.0, 2.0]),
        );
        assert!(matches!(bad, Err(Error::Inconsistent { .. })));

        let rank_def = build_problem(
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]),
            DVector::zeros(2),
        );
        assert!(matches!(rank_def, Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn step_examples() {
        let p = build_problem(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let law = DirectionLaw::axes(2).unwrap();
        let mut rng = rng_from_seed(1);
        // fixed point
        let next = kaczmarz_step(&p, &law, &p.x_star, &mut rng).unwrap();
        assert_relative_eq!(next, p.x_star, epsilon = 1e-14);
        // axes on the identity zero a coordinate
        let x = DVector::from_vec(vec![3.0, -4.0]);
        let next = kaczmarz_step(&p, &law, &x, &mut rng).unwrap();
        let zeroed = (0..2).filter(|&i| next[i] == 0.0).count();
        assert_eq!(zeroed, 1);
    }

    #[test]
    fn error_vector_is_projected_difference() {
        let a = example_matrix(0.1).unwrap();
        let p = build_problem(a.clone(), DVector::zeros(2)).unwrap();
        let law = DirectionLaw::uniform(2);
        let mut rng = rng_from_seed(5);
        let x = DVector::from_vec(vec![2.0, -1.0]);
        // reproduce the drawn direction to compute the expected projection
        let mut rng_copy = rng.clone();
        let v = sample_direction(&law, &mut rng_copy).unwrap();
        let next = kaczmarz_step(&p, &law, &x, &mut rng).unwrap();
        let g = a.transpose() * &v;
        let err = &x - &p.x_star;
        let expected = &err - &g * (g.dot(&err) / g.norm_squared());
        assert_relative_eq!(&next - &p.x_star, expected, epsilon = 1e-12);
    }

    #[test]
    fn classical_rate_examples() {
        let r = rate_classical(&DMatrix::identity(2, 2)).unwrap();
        assert_relative_eq!(r.rho, 0.25, epsilon = 1e-14);

        // A = [[0,1],[0.1,1]]: λ_min(AᵀA) = (2.01 − √4.0001)/2
        let a = example_matrix(0.1).unwrap();
        let r = rate_classical(&a).unwrap();
        let lam_min = (2.01 - 4.0001f64.sqrt()) / 2.0;
        assert_relative_eq!(lam_min, 4.98750e-3, max_relative = 1e-5);
        assert_relative_eq!(r.rho, lam_min / (2.0 * 2.01), max_relative = 1e-12);
        assert_relative_eq!(r.rho, 1.2407e-3, max_relative = 1e-4);

        // scale invariance
        let scaled = rate_classical(&(&a * 3.0)).unwrap();
        assert_relative_eq!(scaled.rho, r.rho, max_relative = 1e-12);
    }

    #[test]
    fn row_weighted_general_rate_reproduces_classical_exactly() {
        let a = example_matrix(0.1).unwrap();
        let law = DirectionLaw::row_weighted(a.clone()).unwrap();
        let general =
            rate_general(&a, &law, &SecondMomentEstimator::ExactDiscrete).unwrap();
        let classical = rate_classical(&a).unwrap();
        assert!((general.rho - classical.rho).abs() <= 1e-12);
        // the weighted atom sum IS AᵀA/‖A‖²_F
        let mt = a.transpose();
        let sm = pushforward_second_moment(
            &law,
            |v| &mt * v,
            2,
            &SecondMomentEstimator::ExactDiscrete,
        )
        .unwrap();
        let expected = a.transpose() * &a / 2.01;
        assert_relative_eq!(sm.matrix, expected, epsilon = 1e-12);
    }

    #[test]
    fn uniform_rate_on_identity_matrix() {
        let r = rate_general(
            &DMatrix::identity(3, 3),
            &DirectionLaw::uniform(3),
            &SecondMomentEstimator::auto(3, 1.0, 0),
        )
        .unwrap();
        assert_relative_eq!(r.rho, 0.5 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn paper_ballistic_closed_form_is_the_e1_directional_rate() {
        for a in [0.1, 0.01, 0.5] {
            let closed = free_rate_e1_closed_form(a).unwrap();
            let quad = free_rate_e1_quadrature(a, 1 << 15).unwrap();
            assert!(
                (closed - quad).abs() < 1e-6,
                "a={a}: closed {closed} vs quadrature {quad}"
            );
        }
        // the true infimum is strictly smaller: the second moment has a
        // nonzero off-diagonal a(2-2a+a²)/(4+a⁴)
        let a = 0.1;
        let matrix = example_matrix(a).unwrap();
        let mt = matrix.transpose();
        let sm = pushforward_second_moment(
            &DirectionLaw::uniform(2),
            |v| &mt * v,
            2,
            &SecondMomentEstimator::SphereQuadrature { nodes: 1 << 15 },
        )
        .unwrap();
        let expected_offdiag = a * (2.0 - 2.0 * a + a * a) / (4.0 + a.powi(4));
        assert_relative_eq!(sm.matrix[(0, 1)], expected_offdiag, epsilon = 1e-9);
        let r = rate_general(
            &matrix,
            &DirectionLaw::uniform(2),
            &SecondMomentEstimator::SphereQuadrature { nodes: 1 << 15 },
        )
        .unwrap();
        let closed = free_rate_e1_closed_form(a).unwrap();
        assert!(r.rho < closed);
        assert_relative_eq!(r.rho, 0.023752828, max_relative = 1e-6);
    }

    #[test]
    fn solve_from_solution_stays_at_zero() {
        let p = build_problem(example_matrix(0.2).unwrap(), DVector::zeros(2)).unwrap();
        let law = DirectionLaw::uniform(2);
        let mut rng = rng_from_seed(2);
        let t = solve(&p, &law, &p.x_star.clone(), 50, &mut rng).unwrap();
        assert!(t.errors.iter().all(|&e| e < 1e-12));
    }

    #[test]
    fn pathwise_monotone_error_and_hyperplane_membership() {
        let p = build_problem(example_matrix(0.1).unwrap(), DVector::zeros(2)).unwrap();
        for law in [
            DirectionLaw::uniform(2),
            DirectionLaw::row_weighted(p.matrix.clone()).unwrap(),
        ] {
            let mut rng = rng_from_seed(77);
            let t = solve(
                &p,
                &law,
                &DVector::from_vec(vec![-10.0, 0.0]),
                2_000,
                &mut rng,
            )
            .unwrap();
            for pair in t.errors.windows(2) {
                assert!(pair[1] <= pair[0] * (1.0 + 1e-12) + 1e-300);
            }
        }
    }

    #[test]
    fn isotropic_solve_squared_error_halves_per_iteration() {
        let p = build_problem(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let law = DirectionLaw::uniform(2);
        let x0 = DVector::from_vec(vec![1.0, 0.0]);
        let replicas = 40_000;
        let k = 8usize;
        let mut acc = vec![0.0; k + 1];
        for r in 0..replicas {
            let mut rng = stream_rng(31, r as u64);
            let t = solve(&p, &law, &x0, k, &mut rng).unwrap();
            for (i, e) in t.errors.iter().enumerate() {
                acc[i] += e * e;
            }
        }
        for (i, v) in acc.iter().enumerate() {
            let mean = v / replicas as f64;
            let expected = 0.5f64.powi(i as i32);
            // MC tolerance grows as the mean shrinks
            assert!(
                (mean - expected).abs() <= 5.0 * expected / (replicas as f64).sqrt() * 3.0,
                "k={i}: {mean} vs {expected}"
            );
        }
    }

    #[test]
    fn one_step_mean_identity_with_exact_second_moment() {
        // E|x₁ − x*|² = |x₀ − x*|² − (x₀−x*)ᵀ M (x₀−x*) for the discrete law
        let a = example_matrix(0.1).unwrap();
        let p = build_problem(a.clone(), DVector::zeros(2)).unwrap();
        let law = DirectionLaw::row_weighted(a.clone()).unwrap();
        let mt = a.transpose();
        let sm = pushforward_second_moment(
            &law,
            |v| &mt * v,
            2,
            &SecondMomentEstimator::ExactDiscrete,
        )
        .unwrap();
        let x0 = DVector::from_vec(vec![3.0, 1.0]);
        let err0 = &x0 - &p.x_star;
        // exact expectation over the two atoms
        let atoms = law.atoms().unwrap();
        let mut exact = 0.0;
        for (v, w) in &atoms {
            let g = a.transpose() * v;
            let proj = &err0 - &g * (g.dot(&err0) / g.norm_squared());
            exact += w * proj.norm_squared();
        }
        let via_moment =
            err0.norm_squared() - (err0.transpose() * &sm.matrix * &err0)[(0, 0)];
        assert_relative_eq!(exact, via_moment, epsilon = 1e-10);
    }

    #[test]
    fn experiment_rates_track_twice_rho_on_the_mean_error() {
        let curve =
            convergence_experiment(0.1, Variant::Classical, 2_000, Some(3_000), 6).unwrap();
        let fit = curve.fit_mean_error.unwrap();
        assert!(
            (fit.rate / (2.0 * curve.rho) - 1.0).abs() < 0.1,
            "classical mean-error rate {} vs 2rho {}",
            fit.rate,
            2.0 * curve.rho
        );
        // squared error decays about twice as fast for this matrix
        let fit_sq = curve.fit_mean_sq_error.unwrap();
        assert!(
            (fit_sq.rate / (4.0 * curve.rho) - 1.0).abs() < 0.15,
            "classical sq-error rate {} vs 4rho {}",
            fit_sq.rate,
            4.0 * curve.rho
        );
    }

    #[test]
    fn experiment_is_bit_stable() {
        let a = convergence_experiment(0.2, Variant::CoordinateFree, 200, Some(100), 3).unwrap();
        let b = convergence_experiment(0.2, Variant::CoordinateFree, 200, Some(100), 3).unwrap();
        assert_eq!(a.mean_error, b.mean_error);
        assert_eq!(a.mean_sq_error, b.mean_sq_error);
    }

    #[test]
    fn lemma_bound_holds_for_fitted_mean_error_rate() {
        for variant in [Variant::Classical, Variant::CoordinateFree] {
            let curve = convergence_experiment(0.1, variant, 1_000, Some(800), 12).unwrap();
            let fit = curve.fit_mean_error.unwrap();
            assert!(
                fit.rate >= curve.rho - 4.0 * fit.rate_se,
                "{variant:?}: fitted {} below rho {}",
                fit.rate,
                curve.rho
            );
        }
    }
}
