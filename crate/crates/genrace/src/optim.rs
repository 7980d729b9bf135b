//! Gradient-free CMA-ES optimizer with an ask/tell interface.
//!
//! Standard (mu/mu_w, lambda) covariance matrix adaptation with rank-one and
//! rank-mu updates, cumulative step-size adaptation, and elitist best-so-far
//! bookkeeping. Lower fitness is better. No restarts and no bound handling:
//! the intended search spaces (circuit angles) are periodic, so unconstrained
//! search is sound.
//!
//! `ask` is pure given the caller's RNG; `tell` consumes one generation of
//! evaluated candidates. Fitness evaluations between the two calls may be
//! parallelized by the caller.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("population size must be at least 2, got {0}")]
    PopulationTooSmall(usize),
    #[error("initial step size must be positive and finite, got {0}")]
    BadStepSize(f64),
    #[error("expected {expected} candidates/fitnesses, got {candidates} and {fitnesses}")]
    GenerationMismatch {
        expected: usize,
        candidates: usize,
        fitnesses: usize,
    },
    #[error("every candidate fitness was NaN at generation {generation}")]
    AllFitnessesNan { generation: u64 },
    #[error("covariance repair failed at generation {generation}")]
    CovarianceRepairFailed { generation: u64 },
}

/// Tunables for a CMA-ES run.
#[derive(Clone, Copy, Debug)]
pub struct CmaesConfig {
    /// Initial step size sigma_0.
    pub sigma0: f64,
    /// Population size lambda; `None` selects `4 + floor(3 ln d)`.
    pub population: Option<usize>,
}

impl Default for CmaesConfig {
    fn default() -> Self {
        Self {
            sigma0: 0.1,
            population: None,
        }
    }
}

/// Default population size `4 + floor(3 ln d)`.
pub fn default_population(dim: usize) -> usize {
    4 + (3.0 * (dim as f64).ln()).floor() as usize
}

/// Full optimizer state for one CMA-ES run.
pub struct CmaesState {
    dim: usize,
    lambda: usize,
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,

    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    path_sigma: DVector<f64>,
    path_c: DVector<f64>,
    /// B * diag(sqrt(eigenvalues)); maps z ~ N(0, I) to y ~ N(0, C).
    sample_transform: DMatrix<f64>,
    /// C^(-1/2), used by the step-size path update.
    inv_sqrt_cov: DMatrix<f64>,

    generation: u64,
    best: Option<(Vec<f64>, f64)>,
    discarded_nan: u64,
}

impl CmaesState {
    pub fn new(initial_mean: Vec<f64>, config: CmaesConfig) -> Result<Self, OptimError> {
        let dim = initial_mean.len();
        if dim == 0 {
            return Err(OptimError::ZeroDimension);
        }
        if !(config.sigma0 > 0.0 && config.sigma0.is_finite()) {
            return Err(OptimError::BadStepSize(config.sigma0));
        }
        let lambda = config.population.unwrap_or_else(|| default_population(dim));
        if lambda < 2 {
            return Err(OptimError::PopulationTooSmall(lambda));
        }
        let mu = lambda / 2;
        let d = dim as f64;

        let raw: Vec<f64> = (0..mu)
            .map(|i| ((mu as f64) + 0.5).ln() - ((i + 1) as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (d + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (d + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / d) / (d + 4.0 + 2.0 * mu_eff / d);
        let c_1 = 2.0 / ((d + 1.3) * (d + 1.3) + mu_eff);
        let c_mu = (1.0 - c_1)
            .min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((d + 2.0) * (d + 2.0) + mu_eff));
        let chi_n = d.sqrt() * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d));

        Ok(Self {
            dim,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            mean: DVector::from_vec(initial_mean),
            sigma: config.sigma0,
            cov: DMatrix::identity(dim, dim),
            path_sigma: DVector::zeros(dim),
            path_c: DVector::zeros(dim),
            sample_transform: DMatrix::identity(dim, dim),
            inv_sqrt_cov: DMatrix::identity(dim, dim),
            generation: 0,
            best: None,
            discarded_nan: 0,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn population_size(&self) -> usize {
        self.lambda
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    /// Best evaluated candidate so far; its value never increases.
    pub fn best(&self) -> Option<(&[f64], f64)> {
        self.best.as_ref().map(|(x, v)| (x.as_slice(), *v))
    }

    /// Candidates with NaN fitness discarded across the run.
    pub fn discarded_nan(&self) -> u64 {
        self.discarded_nan
    }

    /// Samples one generation of candidates `m + sigma * B D z`.
    pub fn ask<R: Rng>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        (0..self.lambda)
            .map(|_| {
                let z = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                let candidate = &self.mean + self.sigma * (&self.sample_transform * z);
                candidate.as_slice().to_vec()
            })
            .collect()
    }

    /// Consumes one evaluated generation and updates every strategy state.
    ///
    /// NaN fitnesses drop the candidate with a warning; a fully NaN
    /// generation aborts.
    pub fn tell(&mut self, candidates: &[Vec<f64>], fitnesses: &[f64]) -> Result<(), OptimError> {
        if candidates.len() != self.lambda || fitnesses.len() != candidates.len() {
            return Err(OptimError::GenerationMismatch {
                expected: self.lambda,
                candidates: candidates.len(),
                fitnesses: fitnesses.len(),
            });
        }
        let mut ranked: Vec<(usize, f64)> = fitnesses
            .iter()
            .copied()
            .enumerate()
            .filter(|&(i, f)| {
                if f.is_nan() {
                    self.discarded_nan += 1;
                    eprintln!(
                        "cmaes: discarding candidate {i} with NaN fitness at generation {}",
                        self.generation
                    );
                    false
                } else {
                    true
                }
            })
            .collect();
        if ranked.is_empty() {
            return Err(OptimError::AllFitnessesNan {
                generation: self.generation,
            });
        }
        ranked.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("NaNs were filtered"));

        if self
            .best
            .as_ref()
            .map(|&(_, v)| ranked[0].1 < v)
            .unwrap_or(true)
        {
            self.best = Some((candidates[ranked[0].0].clone(), ranked[0].1));
        }

        // Recombination over the mu best; with fewer survivors the leading
        // weights are reused as-is (their sum stays close to one).
        let selected = self.mu.min(ranked.len());
        let old_mean = self.mean.clone();
        let mut new_mean = DVector::zeros(self.dim);
        for (rank, &(idx, _)) in ranked.iter().take(selected).enumerate() {
            let x = DVector::from_column_slice(&candidates[idx]);
            new_mean += self.weights[rank] * x;
        }
        if selected < self.mu {
            let used: f64 = self.weights[..selected].iter().sum();
            new_mean /= used;
        }
        let y_w = (&new_mean - &old_mean) / self.sigma;
        self.mean = new_mean;

        // Step-size path and sigma.
        let g = self.generation as i32;
        self.path_sigma = (1.0 - self.c_sigma) * &self.path_sigma
            + (self.c_sigma * (2.0 - self.c_sigma) * self.mu_eff).sqrt()
                * (&self.inv_sqrt_cov * &y_w);
        let ps_norm = self.path_sigma.norm();
        let expected_decay = (1.0 - (1.0 - self.c_sigma).powi(2 * (g + 1))).sqrt();
        let h_sigma = ps_norm / expected_decay < (1.4 + 2.0 / (self.dim as f64 + 1.0)) * self.chi_n;

        // Covariance path, rank-one and rank-mu updates.
        let h = if h_sigma { 1.0 } else { 0.0 };
        self.path_c = (1.0 - self.c_c) * &self.path_c
            + h * (self.c_c * (2.0 - self.c_c) * self.mu_eff).sqrt() * &y_w;
        let mut rank_mu = DMatrix::zeros(self.dim, self.dim);
        for (rank, &(idx, _)) in ranked.iter().take(selected).enumerate() {
            let x = DVector::from_column_slice(&candidates[idx]);
            let y = (x - &old_mean) / self.sigma;
            rank_mu += self.weights[rank] * &y * y.transpose();
        }
        let delta_h = (1.0 - h) * self.c_c * (2.0 - self.c_c);
        self.cov = (1.0 - self.c_1 - self.c_mu) * &self.cov
            + self.c_1 * (&self.path_c * self.path_c.transpose() + delta_h * &self.cov)
            + self.c_mu * rank_mu;

        self.sigma *= ((self.c_sigma / self.d_sigma) * (ps_norm / self.chi_n - 1.0)).exp();

        self.generation += 1;
        self.refresh_decomposition()
    }

    /// Re-symmetrizes, eigendecomposes, and repairs the covariance.
    fn refresh_decomposition(&mut self) -> Result<(), OptimError> {
        let fail = || OptimError::CovarianceRepairFailed {
            generation: self.generation,
        };
        if self.cov.iter().any(|v| !v.is_finite()) || !self.sigma.is_finite() || self.sigma <= 0.0
        {
            return Err(fail());
        }
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;
        let eigen = self.cov.clone().symmetric_eigen();
        let max_eig = eigen.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        if !max_eig.is_finite() || max_eig <= 0.0 {
            return Err(fail());
        }
        // Repair: clamp tiny/negative eigenvalues and cap the condition number.
        let floor = max_eig * 1e-14;
        let mut repaired = false;
        let eigenvalues: Vec<f64> = eigen
            .eigenvalues
            .iter()
            .map(|&v| {
                if v < floor {
                    repaired = true;
                    floor
                } else {
                    v
                }
            })
            .collect();
        if repaired {
            let d = DMatrix::from_diagonal(&DVector::from_vec(eigenvalues.clone()));
            self.cov = &eigen.eigenvectors * d * eigen.eigenvectors.transpose();
        }
        let sqrt_d = DVector::from_vec(eigenvalues.iter().map(|v| v.sqrt()).collect::<Vec<_>>());
        let inv_sqrt_d =
            DVector::from_vec(eigenvalues.iter().map(|v| 1.0 / v.sqrt()).collect::<Vec<_>>());
        self.sample_transform = &eigen.eigenvectors * DMatrix::from_diagonal(&sqrt_d);
        self.inv_sqrt_cov = &eigen.eigenvectors
            * DMatrix::from_diagonal(&inv_sqrt_d)
            * eigen.eigenvectors.transpose();
        if self.sample_transform.iter().any(|v| !v.is_finite()) {
            return Err(fail());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum()
    }

    fn run<F: Fn(&[f64]) -> f64>(
        f: F,
        mean: Vec<f64>,
        sigma0: f64,
        max_evals: usize,
        seed: u64,
    ) -> (f64, usize) {
        let mut state = CmaesState::new(
            mean,
            CmaesConfig {
                sigma0,
                population: None,
            },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut evals = 0;
        while evals < max_evals {
            let candidates = state.ask(&mut rng);
            let fitnesses: Vec<f64> = candidates.iter().map(|c| f(c)).collect();
            evals += fitnesses.len();
            state.tell(&candidates, &fitnesses).unwrap();
        }
        (state.best().unwrap().1, evals)
    }

    #[test]
    fn default_population_matches_formula() {
        assert_eq!(default_population(10), 10);
        assert_eq!(default_population(256), 20);
    }

    #[test]
    fn sphere_d10_converges_within_2000_evals() {
        let (best, evals) = run(sphere, vec![0.5; 10], 0.3, 2000, 42);
        assert!(evals <= 2000);
        assert!(best < 1e-8, "best sphere value {best} after {evals} evals");
    }

    #[test]
    fn rosenbrock_d5_converges_within_20000_evals() {
        let (best, _) = run(rosenbrock, vec![0.0; 5], 0.3, 20_000, 7);
        assert!(best < 1e-4, "best rosenbrock value {best}");
    }

    #[test]
    fn ask_is_reproducible_under_seed() {
        let state = CmaesState::new(vec![0.0; 2], CmaesConfig::default()).unwrap();
        let a = state.ask(&mut ChaCha8Rng::seed_from_u64(5));
        let b = state.ask(&mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn ask_concentrates_near_mean_for_tiny_sigma() {
        let state = CmaesState::new(
            vec![1.0, -2.0],
            CmaesConfig {
                sigma0: 1e-12,
                population: None,
            },
        )
        .unwrap();
        for candidate in state.ask(&mut ChaCha8Rng::seed_from_u64(1)) {
            assert!((candidate[0] - 1.0).abs() < 1e-10);
            assert!((candidate[1] + 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn candidate_covariance_approximates_sigma_sq_c() {
        // Sample covariance over 10^4 draws within 10% Frobenius error.
        let dim = 4;
        let state = CmaesState::new(
            vec![0.0; dim],
            CmaesConfig {
                sigma0: 0.5,
                population: Some(10_000),
            },
        )
        .unwrap();
        let draws = state.ask(&mut ChaCha8Rng::seed_from_u64(2));
        let n = draws.len() as f64;
        let mut cov = vec![vec![0.0; dim]; dim];
        for x in &draws {
            for i in 0..dim {
                for j in 0..dim {
                    cov[i][j] += x[i] * x[j] / n;
                }
            }
        }
        let expected = 0.25; // sigma^2 * I
        let mut err = 0.0;
        let mut norm = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let target = if i == j { expected } else { 0.0 };
                err += (cov[i][j] - target).powi(2);
                norm += target * target;
            }
        }
        assert!(err.sqrt() / norm.sqrt() < 0.1);
    }

    #[test]
    fn equal_fitnesses_keep_best_value() {
        let mut state = CmaesState::new(vec![0.0; 3], CmaesConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let candidates = state.ask(&mut rng);
        let fitnesses = vec![1.0; candidates.len()];
        state.tell(&candidates, &fitnesses).unwrap();
        assert_eq!(state.best().unwrap().1, 1.0);
        let candidates = state.ask(&mut rng);
        let fitnesses = vec![1.0; candidates.len()];
        state.tell(&candidates, &fitnesses).unwrap();
        assert_eq!(state.best().unwrap().1, 1.0);
    }

    #[test]
    fn best_so_far_is_monotone() {
        let mut state = CmaesState::new(vec![2.0; 6], CmaesConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut previous = f64::INFINITY;
        for _ in 0..50 {
            let candidates = state.ask(&mut rng);
            let fitnesses: Vec<f64> = candidates.iter().map(|c| sphere(c)).collect();
            state.tell(&candidates, &fitnesses).unwrap();
            let best = state.best().unwrap().1;
            assert!(best <= previous);
            previous = best;
        }
    }

    #[test]
    fn nan_fitness_is_discarded_all_nan_aborts() {
        let mut state = CmaesState::new(vec![0.0; 2], CmaesConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let candidates = state.ask(&mut rng);
        let mut fitnesses: Vec<f64> = candidates.iter().map(|c| sphere(c)).collect();
        fitnesses[0] = f64::NAN;
        state.tell(&candidates, &fitnesses).unwrap();
        assert_eq!(state.discarded_nan(), 1);

        let candidates = state.ask(&mut rng);
        let fitnesses = vec![f64::NAN; candidates.len()];
        assert!(matches!(
            state.tell(&candidates, &fitnesses),
            Err(OptimError::AllFitnessesNan { .. })
        ));
    }

    #[test]
    fn scale_equivariance_with_power_of_two_factor() {
        // Optimizing f(x) from (m0, sigma0) and f(x / a) from (a m0, a sigma0)
        // with the same seed produces identical candidate sequences up to the
        // factor a. Exact for a power-of-two factor.
        let a = 4.0;
        let dim = 3;
        let mut plain = CmaesState::new(
            vec![1.0; dim],
            CmaesConfig {
                sigma0: 0.25,
                population: None,
            },
        )
        .unwrap();
        let mut scaled = CmaesState::new(
            vec![a; dim],
            CmaesConfig {
                sigma0: 0.25 * a,
                population: None,
            },
        )
        .unwrap();
        let mut rng_plain = ChaCha8Rng::seed_from_u64(17);
        let mut rng_scaled = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let cands_plain = plain.ask(&mut rng_plain);
            let cands_scaled = scaled.ask(&mut rng_scaled);
            for (p, s) in cands_plain.iter().zip(&cands_scaled) {
                for (vp, vs) in p.iter().zip(s) {
                    assert_eq!(vp * a, *vs);
                }
            }
            let fit_plain: Vec<f64> = cands_plain.iter().map(|c| sphere(c)).collect();
            let fit_scaled: Vec<f64> = cands_scaled
                .iter()
                .map(|c| {
                    let unscaled: Vec<f64> = c.iter().map(|v| v / a).collect();
                    sphere(&unscaled)
                })
                .collect();
            assert_eq!(fit_plain, fit_scaled);
            plain.tell(&cands_plain, &fit_plain).unwrap();
            scaled.tell(&cands_scaled, &fit_scaled).unwrap();
        }
    }
}
