use rayon::prelude::*;

use crate::core::{Dataset, LossModel, ParameterVector, PriorModel};
use crate::error::{Error, Result};
use crate::numeric::cholesky;
use crate::smc::mixture::{log_target_term, TargetKind};
use crate::smc::particle::{derive_rng, ParticleSystem};
use crate::Real;

/// Diagonal floor added to the empirical proposal covariance so the Cholesky
/// factorization never fails on degenerate particle clouds.
pub const COVARIANCE_FLOOR: Real = 1e-10;

/// Gaussian random-walk proposal for the MH mutation phase.
#[derive(Debug, Clone)]
pub struct MutationKernel {
    /// Row-major lower Cholesky factor of the p x p proposal covariance.
    chol: Vec<Real>,
    dim: usize,
    steps: usize,
}

/// Acceptance bookkeeping for one mutation phase.
#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize)]
pub struct MutationStats {
    pub proposed: usize,
    pub accepted: usize,
    /// Proposals rejected because the forward model failed (counted inside
    /// `proposed` as well).
    pub forward_failures: usize,
}

impl MutationStats {
    pub fn acceptance_rate(&self) -> Real {
        if self.proposed == 0 {
            return 0.0;
        }
        self.accepted as Real / self.proposed as Real
    }

    fn merge(mut self, other: MutationStats) -> MutationStats {
        self.proposed += other.proposed;
        self.accepted += other.accepted;
        self.forward_failures += other.forward_failures;
        self
    }
}

impl MutationKernel {
    /// Kernel with an explicit covariance matrix (row-major p x p).
    pub fn from_covariance(cov: &[Real], dim: usize, steps: usize) -> Result<Self> {
        if cov.len() != dim * dim {
            return Err(Error::Config("proposal covariance shape mismatch".into()));
        }
        let mut floored = cov.to_vec();
        for k in 0..dim {
            floored[k * dim + k] += COVARIANCE_FLOOR;
        }
        let chol = cholesky(&floored, dim).ok_or_else(|| {
            Error::Config("proposal covariance is not positive definite".into())
        })?;
        Ok(Self { chol, dim, steps })
    }

    /// Adaptive kernel: 2.38^2 / p times the weighted particle covariance,
    /// floored at 1e-10 on the diagonal.
    pub fn adaptive(ps: &ParticleSystem, steps: usize) -> Result<Self> {
        let p = ps.dim();
        let mean = ps.weighted_mean();
        let mut cov = vec![0.0; p * p];
        for (theta, lw) in ps.particles().iter().zip(ps.log_weights()) {
            let w = lw.exp();
            let v = theta.values();
            for i in 0..p {
                let di = v[i] - mean[i];
                for j in 0..=i {
                    let inc = w * di * (v[j] - mean[j]);
                    cov[i * p + j] += inc;
                }
            }
        }
        // symmetrize and apply the standard RW-MH scaling
        let scale = 2.38 * 2.38 / p as Real;
        for i in 0..p {
            for j in 0..i {
                cov[i * p + j] *= scale;
                cov[j * p + i] = cov[i * p + j];
            }
            cov[i * p + i] *= scale;
        }
        Self::from_covariance(&cov, p, steps)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// One correlated Gaussian step: theta + L z with z standard normal.
    fn propose(&self, current: &[Real], rng: &mut impl rand::Rng) -> Vec<Real> {
        let p = self.dim;
        let z: Vec<Real> = (0..p)
            .map(|_| rand::Rng::sample(rng, rand_distr::StandardNormal))
            .collect();
        (0..p)
            .map(|i| {
                let mut v = current[i];
                for (k, zk) in z.iter().enumerate().take(i + 1) {
                    v += self.chol[i * p + k] * zk;
                }
                v
            })
            .collect()
    }
}

/// Advance every particle K Metropolis-Hastings steps targeting the mixture
/// (or full posterior) at W, refreshing the loss cache for moved particles.
/// Requires `resample` first so weights are uniform.
pub fn mutate(
    ps: &mut ParticleSystem,
    w: Real,
    kind: TargetKind,
    kernel: &MutationKernel,
    prior: &dyn PriorModel,
    loss: &LossModel,
    data: &Dataset,
) -> Result<MutationStats> {
    if kernel.dim() != ps.dim() {
        return Err(Error::Config("mutation kernel dimension mismatch".into()));
    }
    if kernel.steps() == 0 {
        return Ok(MutationStats::default());
    }
    let phase = ps.bump_phase();
    let master_seed = ps.master_seed();
    let names = ps.particles()[0].names().clone();

    let moved: Vec<(ParameterVector, Vec<Real>, MutationStats)> = ps
        .particles()
        .par_iter()
        .zip(ps.loss_cache().par_iter())
        .enumerate()
        .map(|(s, (theta, losses))| {
            let mut rng = derive_rng(master_seed, phase, s as u64);
            let mut current = theta.values().to_vec();
            let mut current_losses = losses.clone();
            let mut current_log_target =
                prior.log_density(theta) + log_target_term(kind, losses, w);
            let mut stats = MutationStats::default();
            for _ in 0..kernel.steps() {
                stats.proposed += 1;
                let proposal = kernel.propose(&current, &mut rng);
                // the accept/reject uniform is drawn unconditionally so the
                // RNG stream stays aligned across rejection paths
                let log_u: Real = rand::Rng::gen::<Real>(&mut rng).ln();
                let cand = match ParameterVector::new(proposal, names.clone()) {
                    Ok(c) => c,
                    Err(_) => continue,
                };
                let log_prior = prior.log_density(&cand);
                if log_prior == Real::NEG_INFINITY {
                    continue;
                }
                let cand_losses = match loss.losses(&cand, data) {
                    Ok(l) => l,
                    Err(_) => {
                        stats.forward_failures += 1;
                        continue;
                    }
                };
                let log_target = log_prior + log_target_term(kind, &cand_losses, w);
                if log_u <= log_target - current_log_target {
                    current = cand.values().to_vec();
                    current_losses = cand_losses;
                    current_log_target = log_target;
                    stats.accepted += 1;
                }
            }
            let theta = ParameterVector::new(current, names.clone())
                .expect("accepted states are finite");
            (theta, current_losses, stats)
        })
        .collect();

    let mut total = MutationStats::default();
    for (s, (theta, losses, stats)) in moved.into_iter().enumerate() {
        ps.set_particle(s, theta, losses);
        total = total.merge(stats);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{DatasetMeta, IdentityForward, ResidualForm};
    use crate::models::GaussianPrior;
    use std::sync::Arc;

    fn conjugate_setup() -> (Dataset, LossModel, GaussianPrior) {
        // prior N(0,1), L = (theta - y)^2, data {1}: Gibbs posterior at W
        // is N(2W/(2W+1), 1/(2W+1))
        let data = Dataset::new(vec![vec![1.0]], vec![0.0], DatasetMeta::default()).unwrap();
        let loss = LossModel::new(
            Arc::new(IdentityForward::new(1)),
            ResidualForm::SquaredL2,
            1.0,
        )
        .unwrap();
        (data, loss, GaussianPrior::new(0.0, 1.0).unwrap())
    }

    fn init(s: usize, seed: u64) -> (ParticleSystem, Dataset, LossModel, GaussianPrior) {
        let (data, loss, prior) = conjugate_setup();
        let ps = ParticleSystem::init_from_prior(&prior, &loss, &data, s, seed).unwrap();
        (ps, data, loss, prior)
    }

    #[test]
    fn zero_steps_is_identity() {
        let (mut ps, data, loss, prior) = init(50, 7);
        let before: Vec<Vec<Real>> =
            ps.particles().iter().map(|t| t.values().to_vec()).collect();
        let kernel = MutationKernel::adaptive(&ps, 0).unwrap();
        let stats =
            mutate(&mut ps, 0.5, TargetKind::FullPosterior, &kernel, &prior, &loss, &data)
                .unwrap();
        assert_eq!(stats.proposed, 0);
        let after: Vec<Vec<Real>> =
            ps.particles().iter().map(|t| t.values().to_vec()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn tiny_proposal_keeps_particles_and_accepts() {
        let (mut ps, data, loss, prior) = init(200, 11);
        // the 1e-10 diagonal floor caps how small the step can get: the
        // effective proposal sd is 1e-5
        let kernel = MutationKernel::from_covariance(&[1e-30], 1, 5).unwrap();
        let before: Vec<Real> = ps.particles().iter().map(|t| t.values()[0]).collect();
        let stats =
            mutate(&mut ps, 0.5, TargetKind::FullPosterior, &kernel, &prior, &loss, &data)
                .unwrap();
        assert!(stats.acceptance_rate() > 0.99, "rate {}", stats.acceptance_rate());
        for (b, t) in before.iter().zip(ps.particles()) {
            assert!((b - t.values()[0]).abs() < 1e-3);
        }
    }

    #[test]
    fn kernel_preserves_conjugate_target_moments() {
        // start from exact stationarity (the full posterior at W = 1/2 is
        // N(1/2, 1/2)) and check the kernel holds mean and variance within
        // 3 SE over 1e5 total kernel applications
        let (data, loss, prior) = conjugate_setup();
        let s = 20_000;
        let steps = 5; // 1e5 applications total
        let w = 0.5;
        let (post_mean, post_var): (Real, Real) = (0.5, 0.5);
        let mut rng = derive_rng(42, 0, 0);
        let thetas: Vec<ParameterVector> = (0..s)
            .map(|_| {
                let z: Real = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                ParameterVector::scalar(post_mean + post_var.sqrt() * z).unwrap()
            })
            .collect();
        let cache: Vec<Vec<Real>> =
            thetas.iter().map(|t| loss.losses(t, &data).unwrap()).collect();
        let uniform = -((s as Real).ln());
        let mut ps = ParticleSystem::from_parts(
            thetas,
            vec![uniform; s],
            cache,
            0,
            42,
            1,
            Vec::new(),
        )
        .unwrap();
        let kernel = MutationKernel::from_covariance(&[0.7], 1, steps).unwrap();
        let stats =
            mutate(&mut ps, w, TargetKind::FullPosterior, &kernel, &prior, &loss, &data)
                .unwrap();
        assert!(stats.acceptance_rate() > 0.2 && stats.acceptance_rate() < 0.95);
        let mean = ps.weighted_mean()[0];
        let var = ps.weighted_variance()[0];
        let se_mean = (post_var / s as Real).sqrt();
        // var of the sample variance of a Gaussian: 2 sigma^4 / (S - 1)
        let se_var = (2.0 * post_var * post_var / (s as Real - 1.0)).sqrt();
        assert!((mean - post_mean).abs() < 3.0 * se_mean, "mean {mean}");
        assert!((var - post_var).abs() < 3.0 * se_var, "var {var}");
    }

    #[test]
    fn out_of_support_proposals_rejected() {
        // Gamma prior restricts to theta > 0; a huge proposal step pushes
        // most proposals negative, and every surviving particle stays positive
        let data = Dataset::new(vec![vec![1.0]], vec![0.0], DatasetMeta::default()).unwrap();
        let loss = LossModel::new(
            Arc::new(IdentityForward::new(1)),
            ResidualForm::SquaredL2,
            1.0,
        )
        .unwrap();
        let prior = crate::models::GammaPrior::new(2.0, 1.0).unwrap();
        let mut ps = ParticleSystem::init_from_prior(&prior, &loss, &data, 300, 3).unwrap();
        let kernel = MutationKernel::from_covariance(&[100.0], 1, 10).unwrap();
        mutate(&mut ps, 0.25, TargetKind::Mixture, &kernel, &prior, &loss, &data).unwrap();
        assert!(ps.particles().iter().all(|t| t.values()[0] > 0.0));
        ps.verify_cache(&loss, &data).unwrap();
    }

    #[test]
    fn deterministic_across_runs() {
        let run = || {
            let (mut ps, data, loss, prior) = init(100, 99);
            let kernel = MutationKernel::adaptive(&ps, 4).unwrap();
            mutate(&mut ps, 0.3, TargetKind::Mixture, &kernel, &prior, &loss, &data).unwrap();
            ps.particles().iter().map(|t| t.values().to_vec()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
