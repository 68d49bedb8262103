//! Synchronous coupling of two chains and the contraction it induces.
//!
//! Feeding the same `(v, Z)` to two copies of the kernel makes the noise
//! cancel in the difference: in natural coordinates the gap evolves by the
//! pure random projection `Π_ŵ`, so the squared gap can never grow and its
//! mean contracts at least at rate `λ_min(M_τ) = 2ρ` per step.

use crate::directions::{pushforward_direction, sample_direction, DirectionLaw};
use crate::error::Error;
use crate::gaussian::{natural_norm, CovarianceSpec};
use crate::hit_and_run::{step_with_draws, ChainState};
use crate::seeding::{stream_rng, Rng};
use crate::stats::{fit_log_decay, trailing_window, DecayFit};
use crate::Result;
use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Two chain positions evolved under shared randomness.
#[derive(Debug, Clone)]
pub struct CoupledPair {
    pub position_a: DVector<f64>,
    pub position_b: DVector<f64>,
    pub step_count: u64,
    /// Cached `|a - b|_{C^{-1/2}}`; non-increasing along any realization.
    pub natural_gap: f64,
}

impl CoupledPair {
    pub fn new(
        cov: &CovarianceSpec,
        position_a: DVector<f64>,
        position_b: DVector<f64>,
    ) -> Result<Self> {
        let natural_gap = natural_norm(cov, &(&position_a - &position_b))?;
        Ok(CoupledPair {
            position_a,
            position_b,
            step_count: 0,
            natural_gap,
        })
    }
}

/// Projection of `z` onto the orthogonal complement of `span(w)`:
/// `z - (z·w/|w|²) w`.
pub fn project_orthogonal(z: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
    let wn2 = w.norm_squared();
    if wn2 == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let out = z - w * (z.dot(w) / wn2);
    debug_assert!(out.dot(w).abs() <= 1e-12 * (1.0 + z.norm() * w.norm()));
    Ok(out)
}

/// Advance both legs of the coupling with one shared `(v, Z)` draw.
pub fn coupled_step(
    cov: &CovarianceSpec,
    law: &DirectionLaw,
    pair: &CoupledPair,
    rng: &mut Rng,
) -> Result<CoupledPair> {
    let v = sample_direction(law, rng)?;
    let z: f64 = StandardNormal.sample(rng);
    coupled_step_with_draws(cov, pair, &v, z)
}

/// Coupled transition with explicit draws.
pub fn coupled_step_with_draws(
    cov: &CovarianceSpec,
    pair: &CoupledPair,
    v: &DVector<f64>,
    z: f64,
) -> Result<CoupledPair> {
    let state_a = ChainState {
        position: pair.position_a.clone(),
        step_count: pair.step_count,
    };
    let state_b = ChainState {
        position: pair.position_b.clone(),
        step_count: pair.step_count,
    };
    let next_a = step_with_draws(cov, &state_a, v, z)?;
    let next_b = step_with_draws(cov, &state_b, v, z)?;
    let natural_gap = natural_norm(cov, &(&next_a.position - &next_b.position))?;
    debug_assert!(
        {
            // gap recursion: new natural difference is the projection of the old
            let old_diff = cov.apply_inv_sqrt(&(&pair.position_a - &pair.position_b));
            let what = pushforward_direction(cov, v)?;
            let projected = project_orthogonal(&old_diff, &what)?;
            let new_diff = cov.apply_inv_sqrt(&(&next_a.position - &next_b.position));
            (&new_diff - &projected).norm() <= 1e-10 * (1.0 + old_diff.norm())
        },
        "coupled difference is not the projected difference"
    );
    debug_assert!(
        {
            // once the gap reaches the roundoff floor of the C^{±1/2}
            // round-trips it can jitter at absolute scale eps·|position|
            let noise_floor =
                1e-12 * (1.0 + cov.apply_inv_sqrt(&next_a.position).norm());
            natural_gap <= pair.natural_gap * (1.0 + 1e-12) + noise_floor
        },
        "natural gap expanded: {} -> {}",
        pair.natural_gap,
        natural_gap
    );
    Ok(CoupledPair {
        position_a: next_a.position,
        position_b: next_b.position,
        step_count: pair.step_count + 1,
        natural_gap,
    })
}

/// Replica-averaged squared-gap decay of the synchronous coupling.
#[derive(Debug, Clone)]
pub struct ContractionReport {
    /// `E[gap²_k]` for `k = 0..=n_steps` (replica mean).
    pub mean_sq_gap: Vec<f64>,
    /// Standard error of each replica mean.
    pub std_error: Vec<f64>,
    /// Log-decay fit of the squared-gap series over `fit_window`;
    /// `None` when the chains start coalesced (nothing to fit).
    pub fit: Option<DecayFit>,
    pub fit_window: std::ops::Range<usize>,
    /// `½·λ_min(M_τ)` for the same law and covariance, when the caller
    /// supplied an estimate (used for the guaranteed-rate comparison).
    pub rho_lambda_min: Option<f64>,
    pub coalesced: bool,
    pub replicas: usize,
}

/// Run `n_replicas` independent couplings for `n_steps` steps each and
/// aggregate the squared natural gap per step.
///
/// Replicas use derived seeds `derive_seed(master_seed, replica)` and are
/// reduced in replica order, so the report is bit-stable for a fixed
/// `(master_seed, n_replicas)` whatever the thread count.
pub fn contraction_experiment(
    cov: &CovarianceSpec,
    law: &DirectionLaw,
    a0: &DVector<f64>,
    b0: &DVector<f64>,
    n_steps: usize,
    n_replicas: usize,
    master_seed: u64,
    fit_window: Option<std::ops::Range<usize>>,
    rho_lambda_min: Option<f64>,
) -> Result<ContractionReport> {
    if n_replicas < 2 {
        return Err(Error::InsufficientReplicas(n_replicas));
    }
    if n_steps < 1 {
        return Err(Error::BadInputs("n_steps must be >= 1".into()));
    }
    let initial = CoupledPair::new(cov, a0.clone(), b0.clone())?;
    let coalesced = initial.natural_gap == 0.0;

    let per_replica: Vec<Result<Vec<f64>>> = (0..n_replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(master_seed, r as u64);
            let mut pair = initial.clone();
            let mut sq = Vec::with_capacity(n_steps + 1);
            sq.push(pair.natural_gap * pair.natural_gap);
            for _ in 0..n_steps {
                pair = coupled_step(cov, law, &pair, &mut rng)?;
                sq.push(pair.natural_gap * pair.natural_gap);
            }
            Ok(sq)
        })
        .collect();

    let mut mean = vec![0.0; n_steps + 1];
    let mut m2 = vec![0.0; n_steps + 1];
    let mut count = 0usize;
    for series in per_replica {
        let series = series?;
        count += 1;
        let nf = count as f64;
        for (k, &v) in series.iter().enumerate() {
            let delta = v - mean[k];
            mean[k] += delta / nf;
            m2[k] += delta * (v - mean[k]);
        }
    }
    let nf = count as f64;
    let std_error: Vec<f64> = m2
        .iter()
        .map(|&s| (s / (nf - 1.0) / nf).sqrt())
        .collect();

    let window = fit_window.unwrap_or_else(|| trailing_window(n_steps));
    let fit = if coalesced {
        None
    } else {
        fit_log_decay(&mean, window.clone())
    };
    Ok(ContractionReport {
        mean_sq_gap: mean,
        std_error,
        fit,
        fit_window: window,
        rho_lambda_min,
        coalesced,
        replicas: n_replicas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directions::SecondMomentEstimator;
    use crate::rates::rho_general;
    use crate::seeding::rng_from_seed;
    use approx::assert_relative_eq;

    fn diag41() -> CovarianceSpec {
        CovarianceSpec::diagonal(&[4.0, 1.0]).unwrap()
    }

    #[test]
    fn projection_examples() {
        let z = DVector::from_vec(vec![3.0, 4.0]);
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let p = project_orthogonal(&z, &e1).unwrap();
        assert_eq!(p, DVector::from_vec(vec![0.0, 4.0]));
        // kernel of the projection
        let w = DVector::from_vec(vec![0.6, 0.8]);
        let parallel = &w * 2.5;
        assert!(project_orthogonal(&parallel, &w).unwrap().norm() < 1e-14);
        assert!(matches!(
            project_orthogonal(&z, &DVector::zeros(2)),
            Err(Error::ZeroDirection)
        ));
    }

    #[test]
    fn uniform_projection_halves_squared_norm_on_average() {
        let mut rng = rng_from_seed(21);
        let law = DirectionLaw::uniform(2);
        let z = DVector::from_vec(vec![1.0, 1.0]);
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let v = sample_direction(&law, &mut rng).unwrap();
            acc += project_orthogonal(&z, &v).unwrap().norm_squared();
        }
        let mean = acc / n as f64;
        let z2 = z.norm_squared();
        assert!(
            (mean - z2 / 2.0).abs() <= 3.0 * z2 / (n as f64).sqrt(),
            "mean {mean}"
        );
    }

    #[test]
    fn random_projection_mean_identity_is_algebraic() {
        // (1/n)Σ|Π_{ŵᵢ}z|² = |z|² − zᵀ M̂ z with M̂ from the same draws
        let cov = diag41();
        let law = DirectionLaw::uniform(2);
        let mut rng = rng_from_seed(33);
        let n = 10_000;
        let whats: Vec<DVector<f64>> = (0..n)
            .map(|_| {
                let v = sample_direction(&law, &mut rng).unwrap();
                pushforward_direction(&cov, &v).unwrap()
            })
            .collect();
        let mut m_hat = nalgebra::DMatrix::zeros(2, 2);
        for w in &whats {
            m_hat.ger(1.0 / n as f64, w, w, 1.0);
        }
        let mut zrng = rng_from_seed(34);
        for _ in 0..100 {
            let z = crate::gaussian::sample_target(&cov, &mut zrng);
            let mean_proj = whats
                .iter()
                .map(|w| project_orthogonal(&z, w).unwrap().norm_squared())
                .sum::<f64>()
                / n as f64;
            let expected = z.norm_squared() - (z.transpose() * &m_hat * &z)[(0, 0)];
            assert!(
                (mean_proj - expected).abs() <= 1e-10 * (1.0 + z.norm_squared()),
                "{mean_proj} vs {expected}"
            );
        }
    }

    #[test]
    fn projection_bound_with_exact_second_moment() {
        // E|Π_w z|² ≤ (1 − λ_min(M)) |z|² for the exact discrete law
        let cov = diag41();
        let law = DirectionLaw::axes(2).unwrap();
        let sm = crate::directions::second_moment_matrix(
            &law,
            &cov,
            &SecondMomentEstimator::ExactDiscrete,
        )
        .unwrap();
        let (lam_min, _, _) = crate::rates::min_eigen_with_minimizer(&sm.matrix);
        let atoms = law.atoms().unwrap();
        let mut rng = rng_from_seed(40);
        for _ in 0..100 {
            let z = crate::gaussian::sample_target(&cov, &mut rng);
            let mut mean = 0.0;
            for (v, w) in &atoms {
                let what = pushforward_direction(&cov, v).unwrap();
                mean += w * project_orthogonal(&z, &what).unwrap().norm_squared();
            }
            assert!(mean <= (1.0 - lam_min) * z.norm_squared() + 1e-12);
        }
    }

    #[test]
    fn coalesced_pairs_stay_coalesced() {
        let cov = diag41();
        let law = DirectionLaw::uniform(2);
        let x = DVector::from_vec(vec![1.5, -0.5]);
        let mut pair = CoupledPair::new(&cov, x.clone(), x).unwrap();
        let mut rng = rng_from_seed(3);
        for _ in 0..50 {
            pair = coupled_step(&cov, &law, &pair, &mut rng).unwrap();
            assert_eq!(pair.position_a, pair.position_b);
            assert_eq!(pair.natural_gap, 0.0);
        }
    }

    #[test]
    fn natural_gap_never_increases() {
        let cov = diag41();
        let law = DirectionLaw::uniform(2);
        let mut pair = CoupledPair::new(
            &cov,
            DVector::from_vec(vec![4.0, 1.0]),
            DVector::from_vec(vec![-2.0, 0.5]),
        )
        .unwrap();
        let mut rng = rng_from_seed(9);
        let mut prev = pair.natural_gap;
        for _ in 0..500 {
            pair = coupled_step(&cov, &law, &pair, &mut rng).unwrap();
            assert!(pair.natural_gap <= prev * (1.0 + 1e-12) + 1e-11);
            prev = pair.natural_gap;
            // cache agrees with a fresh norm computation
            let fresh =
                natural_norm(&cov, &(&pair.position_a - &pair.position_b)).unwrap();
            assert_relative_eq!(pair.natural_gap, fresh, epsilon = 1e-12);
        }
    }

    #[test]
    fn marginal_of_coupled_leg_matches_uncoupled_chain() {
        // with the same seed, leg A of the coupling reproduces the plain
        // chain bit for bit (the coupling shares the draws by construction)
        let cov = diag41();
        let law = DirectionLaw::uniform(2);
        let a0 = DVector::from_vec(vec![2.0, 0.0]);
        let b0 = DVector::from_vec(vec![0.0, 0.0]);
        let mut rng1 = rng_from_seed(77);
        let mut pair = CoupledPair::new(&cov, a0.clone(), b0).unwrap();
        let mut rng2 = rng_from_seed(77);
        let mut solo = ChainState::new(a0).unwrap();
        for _ in 0..100 {
            let v = sample_direction(&law, &mut rng1).unwrap();
            let z: f64 = StandardNormal.sample(&mut rng1);
            pair = coupled_step_with_draws(&cov, &pair, &v, z).unwrap();
            let v2 = sample_direction(&law, &mut rng2).unwrap();
            let z2: f64 = StandardNormal.sample(&mut rng2);
            solo = step_with_draws(&cov, &solo, &v2, z2).unwrap();
            assert_eq!(pair.position_a, solo.position);
        }
    }

    #[test]
    fn one_step_worst_direction_factor() {
        // C = diag(4,1), gap along C^{1/2}e1: E[gap'²]/gap² = 1 − 1/3
        let cov = diag41();
        let law = DirectionLaw::uniform(2);
        let a0 = DVector::from_vec(vec![2.0, 0.0]); // C^{1/2} e1
        let b0 = DVector::zeros(2);
        let replicas = 100_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for r in 0..replicas {
            let mut rng = stream_rng(2025, r as u64);
            let pair = CoupledPair::new(&cov, a0.clone(), b0.clone()).unwrap();
            let next = coupled_step(&cov, &law, &pair, &mut rng).unwrap();
            let f = next.natural_gap * next.natural_gap;
            acc += f;
            acc2 += f * f;
        }
        let nf = replicas as f64;
        let mean = acc / nf;
        let se = ((acc2 / nf - mean * mean) / nf).sqrt();
        assert!(
            (mean - 2.0 / 3.0).abs() <= 4.0 * se,
            "one-step factor {mean} (se {se})"
        );
    }

    #[test]
    fn isotropic_squared_gap_halves_per_step() {
        let cov = CovarianceSpec::diagonal(&[1.0, 1.0]).unwrap();
        let law = DirectionLaw::uniform(2);
        let report = contraction_experiment(
            &cov,
            &law,
            &DVector::from_vec(vec![1.0, 0.0]),
            &DVector::zeros(2),
            30,
            20_000,
            11,
            None,
            Some(0.25),
        )
        .unwrap();
        let fit = report.fit.unwrap();
        // E|Π_v z|² = |z|²/2 exactly, so the slope is log 2
        assert!(
            (fit.rate - std::f64::consts::LN_2).abs() <= 0.05,
            "rate {}",
            fit.rate
        );
    }

    #[test]
    fn worst_direction_experiment_decay() {
        // Starting along the worst direction the one-step factor is
        // 1 − 2ρ = 2/3; as the difference direction randomizes, the decay
        // accelerates to its stationary value ≈ 0.59 per step (measured via
        // the fourth-moment transfer operator and by simulation). The lemma
        // bound only promises rate ≥ 2ρ.
        let cov = diag41();
        let law = DirectionLaw::uniform(2);
        let rho = rho_general(
            &law,
            &cov,
            &SecondMomentEstimator::auto(2, 4.0, 0),
        )
        .unwrap()
        .rho;
        let report = contraction_experiment(
            &cov,
            &law,
            &DVector::from_vec(vec![2.0, 0.0]),
            &DVector::zeros(2),
            40,
            10_000,
            7,
            None,
            Some(rho),
        )
        .unwrap();
        let fit = report.fit.unwrap();
        assert!(
            fit.rate >= 2.0 * rho - 4.0 * fit.rate_se,
            "fitted rate {} below guaranteed {}",
            fit.rate,
            2.0 * rho
        );
        let factor = (-fit.rate).exp();
        assert!(
            (0.57..=1.0 - 2.0 * rho + 0.05).contains(&factor),
            "per-step squared-gap factor {factor}"
        );
        // one-step factor from the series itself
        let one_step = report.mean_sq_gap[1] / report.mean_sq_gap[0];
        assert!((one_step - 2.0 / 3.0).abs() < 0.02, "one-step {one_step}");
    }

    #[test]
    fn coalesced_experiment_reports_flag() {
        let cov = diag41();
        let law = DirectionLaw::uniform(2);
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let report =
            contraction_experiment(&cov, &law, &x, &x, 10, 100, 1, None, None).unwrap();
        assert!(report.coalesced);
        assert!(report.fit.is_none());
        assert!(report.mean_sq_gap.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn replica_floor_enforced() {
        let cov = diag41();
        let law = DirectionLaw::uniform(2);
        let x = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            contraction_experiment(&cov, &law, &x, &x, 10, 1, 1, None, None),
            Err(Error::InsufficientReplicas(1))
        ));
    }

    #[test]
    fn experiment_is_bit_stable() {
        let cov = diag41();
        let law = DirectionLaw::uniform(2);
        let a = DVector::from_vec(vec![2.0, 0.0]);
        let b = DVector::zeros(2);
        let r1 =
            contraction_experiment(&cov, &law, &a, &b, 20, 500, 99, None, None).unwrap();
        let r2 =
            contraction_experiment(&cov, &law, &a, &b, 20, 500, 99, None, None).unwrap();
        assert_eq!(r1.mean_sq_gap, r2.mean_sq_gap);
    }
}
