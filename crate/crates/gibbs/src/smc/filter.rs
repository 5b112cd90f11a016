use serde::{Deserialize, Serialize};

use crate::calib::{estimate_r_cv, select_w, CalibrationEntry, CalibrationReport, SelectionRule};
use crate::core::{Dataset, LossModel, PriorModel};
use crate::error::{Error, Result};
use crate::smc::mixture::TargetKind;
use crate::smc::mutate::{mutate, MutationKernel, MutationStats};
use crate::smc::particle::ParticleSystem;
use crate::Real;

/// The ordered tempering grid {W_0 = 0, W_1, ..., W_T}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WGrid {
    weights: Vec<Real>,
}

impl WGrid {
    pub fn new(weights: Vec<Real>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::Config("W grid needs W_0 = 0 and at least one W > 0".into()));
        }
        if weights[0] != 0.0 {
            return Err(Error::Config(format!("W_0 must be exactly 0, got {}", weights[0])));
        }
        if weights.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("W grid must be strictly increasing".into()));
        }
        let last = *weights.last().unwrap();
        if !(last <= 1.0 && last.is_finite()) {
            return Err(Error::Config(format!("W_T must be <= 1, got {last}")));
        }
        Ok(Self { weights })
    }

    /// {0} followed by {2^-8, 2^-7, ..., 2^-1, 1}.
    pub fn default_grid() -> Self {
        let mut w = vec![0.0];
        w.extend((0..8).map(|k| (2.0 as Real).powi(k - 8)));
        w.push(1.0);
        Self::new(w).expect("static grid is valid")
    }

    pub fn weights(&self) -> &[Real] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false // at least two entries by construction
    }
}

/// Tuning knobs shared by the calibration and full-posterior filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Particle count S (>= 2).
    pub particles: usize,
    /// MH steps K per mutation phase.
    pub mh_steps: usize,
    /// Normalized-ESS threshold E_min in [0, 1]; resample + mutate when the
    /// arrival ESS falls below it. 0 disables resampling.
    pub ess_threshold: Real,
    pub seed: u64,
    /// Insert intermediate tempering steps by bisection when a reweight
    /// degenerates, instead of failing outright.
    pub adaptive_bisection: bool,
    /// Maximum bisection depth between two consecutive grid weights.
    pub max_bisection_depth: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            particles: 2000,
            mh_steps: 5,
            ess_threshold: 0.5,
            seed: 0,
            adaptive_bisection: true,
            max_bisection_depth: 6,
        }
    }
}

impl FilterConfig {
    fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(Error::Config("particles must be >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.ess_threshold) {
            return Err(Error::Config(format!(
                "ess_threshold must lie in [0, 1], got {}",
                self.ess_threshold
            )));
        }
        Ok(())
    }
}

/// Output of the calibration filter: the particle system retained at every
/// grid W (index-aligned with the grid) plus the selected report.
#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    pub grid: WGrid,
    pub systems: Vec<ParticleSystem>,
    pub report: CalibrationReport,
}

impl CalibrationOutcome {
    pub fn selected_system(&self) -> &ParticleSystem {
        &self.systems[self.report.selected_index]
    }
}

fn resample_and_mutate(
    ps: &mut ParticleSystem,
    w: Real,
    kind: TargetKind,
    config: &FilterConfig,
    loss: &LossModel,
    prior: &dyn PriorModel,
    data: &Dataset,
) -> Result<MutationStats> {
    // the proposal covariance is taken from the weighted cloud before the
    // resample collapses it to uniform weights
    let kernel = MutationKernel::adaptive(ps, config.mh_steps)?;
    ps.resample();
    mutate(ps, w, kind, &kernel, prior, loss, data)
}

/// Move the system from the mixture at `from_w` to the mixture at `to_w`,
/// bisecting the step when the reweight degenerates (if enabled). Returns the
/// arrival ESS at `to_w`.
#[allow(clippy::too_many_arguments)]
fn advance(
    ps: &mut ParticleSystem,
    from_w: Real,
    to_w: Real,
    depth: usize,
    config: &FilterConfig,
    loss: &LossModel,
    prior: &dyn PriorModel,
    data: &Dataset,
) -> Result<Real> {
    let backup = ps.clone();
    match ps.reweight(from_w, to_w) {
        Ok(()) => Ok(ps.effective_sample_size()),
        Err(Error::WeightDegeneracy { .. })
            if config.adaptive_bisection && depth < config.max_bisection_depth =>
        {
            *ps = backup;
            let mid = 0.5 * (from_w + to_w);
            let ess = advance(ps, from_w, mid, depth + 1, config, loss, prior, data)?;
            ps.push_ess(ess);
            resample_and_mutate(ps, mid, TargetKind::Mixture, config, loss, prior, data)?;
            advance(ps, mid, to_w, depth + 1, config, loss, prior, data)
        }
        Err(e) => Err(e),
    }
}

/// Algorithm 1: run the particle filter over the full W grid, recording the
/// LOOCV estimate at every grid weight and retaining the particle system at
/// each, then select W* under `rule`.
pub fn run_calibration_filter(
    grid: &WGrid,
    config: &FilterConfig,
    rule: SelectionRule,
    loss: &LossModel,
    prior: &dyn PriorModel,
    data: &Dataset,
) -> Result<CalibrationOutcome> {
    config.validate()?;
    let mut ps =
        ParticleSystem::init_from_prior(prior, loss, data, config.particles, config.seed)?;

    let mut systems = Vec::with_capacity(grid.len());
    let mut entries = Vec::with_capacity(grid.len());

    for (t, &w) in grid.weights().iter().enumerate() {
        let (ess, resampled, acceptance) = if t == 0 {
            (1.0, false, None)
        } else {
            let from_w = grid.weights()[t - 1];
            let ess = advance(&mut ps, from_w, w, 0, config, loss, prior, data)
                .map_err(|e| match e {
                    Error::WeightDegeneracy { .. } => Error::WeightDegeneracy { w },
                    other => other,
                })?;
            ps.push_ess(ess);
            if ess < config.ess_threshold {
                let stats = resample_and_mutate(
                    &mut ps,
                    w,
                    TargetKind::Mixture,
                    config,
                    loss,
                    prior,
                    data,
                )?;
                (ess, true, Some(stats.acceptance_rate()))
            } else {
                (ess, false, None)
            }
        };
        ps.set_target_index(t);
        let (r_cv, se) = estimate_r_cv(&ps, w)?;
        entries.push(CalibrationEntry { w, r_cv, se, ess, resampled, acceptance_rate: acceptance });
        systems.push(ps.clone());
    }

    let (selected_index, selected_w) = select_w(&entries, rule)?;
    let report = CalibrationReport {
        entries,
        rule,
        selected_index,
        selected_w,
        seed: config.seed,
        particles: config.particles,
    };
    Ok(CalibrationOutcome { grid: grid.clone(), systems, report })
}

/// Algorithm 2: convert a mixture-targeting system at W* into a sample from
/// the full-data Gibbs posterior at W*: one importance-weight correction,
/// then resample, then K mutation steps targeting the full posterior.
pub fn run_full_posterior_filter(
    mut ps: ParticleSystem,
    w_star: Real,
    config: &FilterConfig,
    loss: &LossModel,
    prior: &dyn PriorModel,
    data: &Dataset,
) -> Result<(ParticleSystem, MutationStats)> {
    config.validate()?;
    ps.reweight_to_full_posterior(w_star)?;
    let ess = ps.effective_sample_size();
    ps.push_ess(ess);
    let stats = resample_and_mutate(
        &mut ps,
        w_star,
        TargetKind::FullPosterior,
        config,
        loss,
        prior,
        data,
    )?;
    Ok((ps, stats))
}
