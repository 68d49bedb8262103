//! Direction laws τ on the unit sphere and second-moment matrices of their
//! normalized linear pushforwards.
//!
//! Every rate in the crate reduces to the matrix `M = E[ŵ ŵᵀ]` where
//! `ŵ = T v / |T v|` for a linear map `T` (`C^{-1/2}` for the sampler,
//! `Aᵀ` for Kaczmarz) and `v ~ τ`. Since `ŵ` is a unit vector, `trace M = 1`
//! pointwise, which the estimators preserve (exactly for discrete sums and
//! quadrature, within Monte Carlo error otherwise).

use crate::error::Error;
use crate::gaussian::CovarianceSpec;
use crate::quadrature::{circle_angles, gauss_legendre};
use crate::seeding::{chunk_ranges, stream_rng, Rng};
use crate::Result;
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Unit-norm tolerance on support vectors and weight normalization.
pub const SUPPORT_TOL: f64 = 1e-12;

/// A probability law on the unit sphere `S^{d-1}`.
///
/// The discrete variants are realized as symmetric atom pairs `±u` with the
/// listed weight split evenly between the two signs, so that every built-in
/// law except a user-declared [`DirectionLaw::FiniteSupport`] is symmetric
/// under reflection through the origin. The sign is irrelevant to both the
/// sampler and the Kaczmarz update (the line, the projection and the
/// hyperplane only depend on `±v` through `v ⊗ v`), but it makes the
/// symmetry flag and the `E[ŵ] = 0` identity literally true.
#[derive(Debug, Clone)]
pub enum DirectionLaw {
    /// Rotation-invariant law, `v = g/|g|` for standard normal `g`.
    UniformSphere { dim: usize },
    /// Atoms on the coordinate axes `±e_i` with the given weights
    /// (random-scan Gibbs uses equal weights).
    CoordinateAxes { dim: usize, weights: Vec<f64> },
    /// Arbitrary unit atoms with weights; the caller declares whether the
    /// law is symmetric (symmetry is not decidable cheaply from the list).
    FiniteSupport {
        vectors: Vec<DVector<f64>>,
        weights: Vec<f64>,
        symmetric: bool,
    },
    /// Atoms `±e_i` weighted by `|Aᵀe_i|²/‖A‖_F²`; the selection law of the
    /// classical randomized Kaczmarz iteration for the matrix `A`.
    RowWeighted { matrix: DMatrix<f64> },
}

impl DirectionLaw {
    pub fn uniform(dim: usize) -> Self {
        DirectionLaw::UniformSphere { dim }
    }

    /// Coordinate axes with equal weights.
    pub fn axes(dim: usize) -> Result<Self> {
        Self::axes_weighted(vec![1.0 / dim as f64; dim])
    }

    pub fn axes_weighted(weights: Vec<f64>) -> Result<Self> {
        validate_weights(&weights)?;
        Ok(DirectionLaw::CoordinateAxes {
            dim: weights.len(),
            weights,
        })
    }

    pub fn finite_support(
        vectors: Vec<DVector<f64>>,
        weights: Vec<f64>,
        symmetric: bool,
    ) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptySupport);
        }
        if vectors.len() != weights.len() {
            return Err(Error::InvalidDirectionLaw(format!(
                "{} vectors but {} weights",
                vectors.len(),
                weights.len()
            )));
        }
        let dim = vectors[0].len();
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::InvalidDirectionLaw(
                    "support vectors have mixed dimensions".into(),
                ));
            }
            if (v.norm() - 1.0).abs() > SUPPORT_TOL {
                return Err(Error::InvalidDirectionLaw(format!(
                    "support vector has norm {} (must be 1 within {SUPPORT_TOL:e})",
                    v.norm()
                )));
            }
        }
        validate_weights(&weights)?;
        Ok(DirectionLaw::FiniteSupport {
            vectors,
            weights,
            symmetric,
        })
    }

    /// Row-selection law of classical randomized Kaczmarz; weights are
    /// recomputed from the matrix on demand, never stored.
    pub fn row_weighted(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::EmptySupport);
        }
        let fro2: f64 = matrix.iter().map(|v| v * v).sum();
        if fro2 <= 0.0 {
            return Err(Error::EmptySupport);
        }
        Ok(DirectionLaw::RowWeighted { matrix })
    }

    /// Dimension of the sphere's ambient space.
    pub fn dim(&self) -> usize {
        match self {
            DirectionLaw::UniformSphere { dim } => *dim,
            DirectionLaw::CoordinateAxes { dim, .. } => *dim,
            DirectionLaw::FiniteSupport { vectors, .. } => vectors[0].len(),
            DirectionLaw::RowWeighted { matrix } => matrix.nrows(),
        }
    }

    /// Whether τ is invariant under `v ↦ -v`.
    pub fn symmetric(&self) -> bool {
        match self {
            DirectionLaw::FiniteSupport { symmetric, .. } => *symmetric,
            _ => true,
        }
    }

    /// Atom list `(unit vector, weight)` for discrete laws, with both signs
    /// merged (the projection machinery only sees `v ⊗ v`). `None` for the
    /// uniform law.
    pub fn atoms(&self) -> Option<Vec<(DVector<f64>, f64)>> {
        match self {
            DirectionLaw::UniformSphere { .. } => None,
            DirectionLaw::CoordinateAxes { dim, weights } => Some(
                weights
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| **w > 0.0)
                    .map(|(i, &w)| {
                        let mut e = DVector::zeros(*dim);
                        e[i] = 1.0;
                        (e, w)
                    })
                    .collect(),
            ),
            DirectionLaw::FiniteSupport { vectors, weights, .. } => Some(
                vectors
                    .iter()
                    .zip(weights)
                    .filter(|(_, w)| **w > 0.0)
                    .map(|(v, &w)| (v.clone(), w))
                    .collect(),
            ),
            DirectionLaw::RowWeighted { matrix } => {
                let weights = row_weights(matrix);
                Some(
                    weights
                        .into_iter()
                        .enumerate()
                        .filter(|(_, w)| *w > 0.0)
                        .map(|(i, w)| {
                            let mut e = DVector::zeros(matrix.nrows());
                            e[i] = 1.0;
                            (e, w)
                        })
                        .collect(),
                )
            }
        }
    }
}

fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::EmptySupport);
    }
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidDirectionLaw("negative weight".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > SUPPORT_TOL {
        return Err(Error::InvalidDirectionLaw(format!(
            "weights sum to {total}, expected 1 within {SUPPORT_TOL:e}"
        )));
    }
    Ok(())
}

/// `|Aᵀe_i|²/‖A‖_F²` for each row `i`.
pub fn row_weights(matrix: &DMatrix<f64>) -> Vec<f64> {
    let fro2: f64 = matrix.iter().map(|v| v * v).sum();
    (0..matrix.nrows())
        .map(|i| matrix.row(i).iter().map(|v| v * v).sum::<f64>() / fro2)
        .collect()
}

/// Draw one direction from τ. Unit norm within [`SUPPORT_TOL`].
pub fn sample_direction(law: &DirectionLaw, rng: &mut Rng) -> Result<DVector<f64>> {
    match law {
        DirectionLaw::UniformSphere { dim } => loop {
            let g: DVector<f64> = DVector::from_iterator(
                *dim,
                (0..*dim).map(|_| -> f64 { StandardNormal.sample(rng) }),
            );
            let n = g.norm();
            if n > 1e-12 {
                return Ok(g / n);
            }
        },
        DirectionLaw::CoordinateAxes { dim, weights } => {
            let i = pick_weighted(weights, rng)?;
            let mut e = DVector::zeros(*dim);
            e[i] = random_sign(rng);
            Ok(e)
        }
        DirectionLaw::FiniteSupport {
            vectors, weights, ..
        } => {
            let i = pick_weighted(weights, rng)?;
            Ok(vectors[i].clone())
        }
        DirectionLaw::RowWeighted { matrix } => {
            let weights = row_weights(matrix);
            let i = pick_weighted(&weights, rng)?;
            let mut e = DVector::zeros(matrix.nrows());
            e[i] = random_sign(rng);
            Ok(e)
        }
    }
}

fn random_sign(rng: &mut Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn pick_weighted(weights: &[f64], rng: &mut Rng) -> Result<usize> {
    if weights.is_empty() {
        return Err(Error::EmptySupport);
    }
    let u: f64 = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return Ok(i);
        }
    }
    Ok(weights.len() - 1)
}

/// Normalized pushforward `ŵ = C^{-1/2} v / |C^{-1/2} v|` of a unit
/// direction under the covariance's inverse square root.
pub fn pushforward_direction(cov: &CovarianceSpec, v: &DVector<f64>) -> Result<DVector<f64>> {
    if v.len() != cov.dim() {
        return Err(Error::DimensionMismatch {
            expected: cov.dim(),
            got: v.len(),
        });
    }
    let w = cov.apply_inv_sqrt(v);
    let n = w.norm();
    if n == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(w / n)
}

/// How to estimate `E[ŵ ŵᵀ]`.
#[derive(Debug, Clone)]
pub enum SecondMomentEstimator {
    /// Exact weighted sum over the atoms of a discrete law.
    ExactDiscrete,
    /// Deterministic sphere quadrature: periodic trapezoid on `S^1`
    /// (`nodes` angles) or product Gauss–Legendre × trapezoid on `S^2`
    /// (`nodes` polar × `2·nodes` azimuthal). Uniform law, `d ∈ {2,3}`.
    SphereQuadrature { nodes: usize },
    /// Monte Carlo with `samples` draws split over `workers` substreams of
    /// `seed`; the per-chunk partial sums are reduced in chunk order so the
    /// result is bit-stable for fixed `(samples, seed, workers)`.
    MonteCarlo {
        samples: usize,
        seed: u64,
        workers: usize,
    },
}

impl SecondMomentEstimator {
    /// Spec defaults: 2048 angles on the circle, 256×512 product nodes on
    /// the 2-sphere, 10⁶ Monte Carlo samples. Node counts grow like
    /// `sqrt(kappa)` because the pushforward integrand develops features of
    /// angular width `kappa^{-1/2}`.
    pub fn auto(dim: usize, kappa: f64, seed: u64) -> Self {
        let root = kappa.max(1.0).sqrt();
        match dim {
            2 => SecondMomentEstimator::SphereQuadrature {
                nodes: (2048usize).max((32.0 * root).ceil() as usize),
            },
            3 => SecondMomentEstimator::SphereQuadrature {
                nodes: (256usize).max((12.0 * root).ceil() as usize),
            },
            _ => SecondMomentEstimator::MonteCarlo {
                samples: 1_000_000,
                seed,
                workers: 8,
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SecondMomentEstimator::ExactDiscrete => "exact-discrete",
            SecondMomentEstimator::SphereQuadrature { .. } => "sphere-quadrature",
            SecondMomentEstimator::MonteCarlo { .. } => "monte-carlo",
        }
    }
}

/// Estimated (or exact) second-moment matrix of a normalized pushforward.
#[derive(Debug, Clone)]
pub struct SecondMoment {
    pub matrix: DMatrix<f64>,
    /// Standard error of a quadratic form `ζᵀMζ` at fixed unit `ζ`,
    /// estimated from 20 Monte Carlo batches; zero for exact methods.
    pub quad_form_se: f64,
    /// Batch means of the full matrix (Monte Carlo only), for downstream
    /// error bars on derived scalars.
    pub batch_matrices: Vec<DMatrix<f64>>,
    pub workers: usize,
}

impl SecondMoment {
    fn exact(matrix: DMatrix<f64>) -> Self {
        SecondMoment {
            matrix,
            quad_form_se: 0.0,
            batch_matrices: Vec::new(),
            workers: 1,
        }
    }

    /// Standard error of `ζᵀMζ` for a given direction, from the batch
    /// spread (zero for exact methods).
    pub fn quad_form_se_at(&self, zeta: &DVector<f64>) -> f64 {
        if self.batch_matrices.is_empty() {
            return 0.0;
        }
        let vals: Vec<f64> = self
            .batch_matrices
            .iter()
            .map(|m| (zeta.transpose() * m * zeta)[(0, 0)])
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    }
}

/// Second-moment matrix `M_τ = E[ŵ ŵᵀ]` of the direction pushforward
/// `ŵ = C^{-1/2}v/|C^{-1/2}v|`, `v ~ τ`.
pub fn second_moment_matrix(
    law: &DirectionLaw,
    cov: &CovarianceSpec,
    estimator: &SecondMomentEstimator,
) -> Result<SecondMoment> {
    if law.dim() != cov.dim() {
        return Err(Error::DimensionMismatch {
            expected: cov.dim(),
            got: law.dim(),
        });
    }
    let out_dim = cov.dim();
    let mut sm = pushforward_second_moment(law, |v| cov.apply_inv_sqrt(v), out_dim, estimator)?;
    if cov.is_diagonal() {
        zero_offdiagonal_if_mc(&mut sm, estimator);
    }
    Ok(sm)
}

/// For axis-aligned covariances the matrix is diagonal by symmetry; kill the
/// Monte Carlo noise on the off-diagonal entries.
fn zero_offdiagonal_if_mc(sm: &mut SecondMoment, estimator: &SecondMomentEstimator) {
    if matches!(estimator, SecondMomentEstimator::MonteCarlo { .. }) {
        let d = sm.matrix.nrows();
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    sm.matrix[(i, j)] = 0.0;
                }
            }
        }
        for b in &mut sm.batch_matrices {
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        b[(i, j)] = 0.0;
                    }
                }
            }
        }
    }
}

/// Second-moment matrix of `ŵ = T(v)/|T(v)|`, `v ~ τ`, for an arbitrary
/// linear map `T` given as a closure. Directions with `|T(v)| = 0` cannot be
/// normalized; discrete atoms hitting that set are rejected as degenerate.
pub fn pushforward_second_moment<F>(
    law: &DirectionLaw,
    map: F,
    out_dim: usize,
    estimator: &SecondMomentEstimator,
) -> Result<SecondMoment>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Sync,
{
    match estimator {
        SecondMomentEstimator::ExactDiscrete => {
            let atoms = law.atoms().ok_or_else(|| Error::UnsupportedEstimator {
                estimator: "exact-discrete",
                detail: "law has continuous support".into(),
            })?;
            let mut m = DMatrix::zeros(out_dim, out_dim);
            for (v, w) in &atoms {
                let g = map(v);
                let n = g.norm();
                if n == 0.0 {
                    return Err(Error::ZeroVector);
                }
                let ghat = g / n;
                m.ger(*w, &ghat, &ghat, 1.0);
            }
            Ok(SecondMoment::exact(m))
        }
        SecondMomentEstimator::SphereQuadrature { nodes } => match law {
            DirectionLaw::UniformSphere { dim: 2 } => {
                let mut m = DMatrix::zeros(out_dim, out_dim);
                let weight = 1.0 / *nodes as f64;
                let mut v = DVector::zeros(2);
                for angle in circle_angles(*nodes) {
                    v[0] = angle.cos();
                    v[1] = angle.sin();
                    let g = map(&v);
                    let ghat = &g / g.norm();
                    m.ger(weight, &ghat, &ghat, 1.0);
                }
                Ok(SecondMoment::exact(m))
            }
            DirectionLaw::UniformSphere { dim: 3 } => {
                let polar = *nodes;
                let azimuth = 2 * *nodes;
                let (u_nodes, u_weights) = gauss_legendre(polar);
                let mut m = DMatrix::zeros(out_dim, out_dim);
                let mut v = DVector::zeros(3);
                // uniform measure on S^2 = (du/2) × (dφ/2π), u = cos(polar)
                for (u, wu) in u_nodes.iter().zip(&u_weights) {
                    let s = (1.0 - u * u).max(0.0).sqrt();
                    let w_slice = 0.5 * wu / azimuth as f64;
                    for phi in circle_angles(azimuth) {
                        v[0] = s * phi.cos();
                        v[1] = s * phi.sin();
                        v[2] = *u;
                        let g = map(&v);
                        let ghat = &g / g.norm();
                        m.ger(w_slice, &ghat, &ghat, 1.0);
                    }
                }
                Ok(SecondMoment::exact(m))
            }
            _ => Err(Error::UnsupportedEstimator {
                estimator: "sphere-quadrature",
                detail: format!(
                    "only the uniform law in dimension 2 or 3 (law: uniform={}, d={})",
                    matches!(law, DirectionLaw::UniformSphere { .. }),
                    law.dim()
                ),
            }),
        },
        SecondMomentEstimator::MonteCarlo {
            samples,
            seed,
            workers,
        } => {
            let chunks = chunk_ranges(*samples, *workers);
            let partials: Vec<(DMatrix<f64>, usize)> = chunks
                .par_iter()
                .enumerate()
                .map(|(ci, range)| {
                    let mut rng = stream_rng(*seed, ci as u64);
                    let mut m = DMatrix::zeros(out_dim, out_dim);
                    for _ in range.clone() {
                        let v = sample_direction(law, &mut rng).expect("law has support");
                        let g = map(&v);
                        let n = g.norm();
                        if n == 0.0 {
                            continue;
                        }
                        let ghat = g / n;
                        m.ger(1.0, &ghat, &ghat, 1.0);
                    }
                    (m, range.len())
                })
                .collect();
            // ordered reduction over chunks, then 20 batches for error bars
            let mut total = DMatrix::zeros(out_dim, out_dim);
            for (m, _) in &partials {
                total += m;
            }
            total /= *samples as f64;
            let n_batches = 20.min(partials.len().max(1));
            let batch_of = |ci: usize| ci * n_batches / partials.len().max(1);
            let mut batch_sums = vec![DMatrix::zeros(out_dim, out_dim); n_batches];
            let mut batch_counts = vec![0usize; n_batches];
            for (ci, (m, cnt)) in partials.iter().enumerate() {
                let b = batch_of(ci).min(n_batches - 1);
                batch_sums[b] += m;
                batch_counts[b] += cnt;
            }
            let batch_matrices: Vec<DMatrix<f64>> = batch_sums
                .into_iter()
                .zip(&batch_counts)
                .filter(|(_, c)| **c > 0)
                .map(|(m, c)| m / *c as f64)
                .collect();
            let mut sm = SecondMoment {
                matrix: total,
                quad_form_se: 0.0,
                batch_matrices,
                workers: *workers,
            };
            // generic scale for the SE of a random quadratic form
            let trace_se = {
                let vals: Vec<f64> = sm.batch_matrices.iter().map(|m| m.trace()).collect();
                if vals.len() > 1 {
                    let n = vals.len() as f64;
                    let mean = vals.iter().sum::<f64>() / n;
                    let var =
                        vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
                    (var / n).sqrt()
                } else {
                    0.0
                }
            };
            sm.quad_form_se = trace_se;
            Ok(sm)
        }
    }
}
