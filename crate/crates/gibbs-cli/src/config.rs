//! Run configuration: serializable experiment descriptions, shipped presets,
//! and builders that turn a config into the library objects it describes.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use gibbs::core::{
    loss_scale_estimate, Dataset, DatasetMeta, ForwardModel, IdentityForward, LossModel,
    ParameterVector, PriorModel,
};
use gibbs::models::{
    residual_form_by_name, simulate_forward_dataset, simulate_toy_dataset, BlockPrior, GammaPrior,
    GaussianPrior, NoiseSpec, OrderedUniformPrior, PiecewiseConstantFunction, ScaledBetaPrior,
    SmoothingKernelOperator, SurrogateDispersionForward, ToyFredholmForward,
};
use gibbs::models::surrogate::{MODULUS_RANGE, RADIUS_RANGE, THICKNESS_RANGE};
use gibbs::numeric::linspace;
use gibbs::smc::{FilterConfig, WGrid};
use gibbs::{Error, Result};

/// The inverse problem a run operates on. The prior, forward model, and
/// simulation recipe are all implied by the problem kind, so a config fully
/// determines the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Piecewise-constant Fredholm deconvolution on [0, 1].
    ToyFredholm {
        n: usize,
        /// Observation grid size d.
        eval_points: usize,
        /// Quadrature points of the discretized smoothing operator.
        source_points: usize,
        pieces: usize,
        truth_coefficients: Vec<f64>,
        truth_cutpoints: Vec<f64>,
        noise: NoiseSpec,
    },
    /// Closed-form dispersion-curve surrogate with box-constrained physics
    /// parameters (modulus, thickness, radius).
    SurrogateWaveguide {
        n: usize,
        truth: Vec<f64>,
        noise: NoiseSpec,
    },
    /// 1-D Gaussian conjugate problem: prior N(0,1), identity forward,
    /// squared loss. The observations are listed directly.
    Conjugate { values: Vec<f64> },
}

impl ProblemSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ProblemSpec::ToyFredholm { .. } => "toy-fredholm",
            ProblemSpec::SurrogateWaveguide { .. } => "surrogate-waveguide",
            ProblemSpec::Conjugate { .. } => "conjugate",
        }
    }

    pub fn parameter_names(&self) -> Vec<String> {
        match self {
            ProblemSpec::ToyFredholm { pieces, .. } => {
                let mut names: Vec<String> = (1..=*pieces).map(|j| format!("b_{j}")).collect();
                names.extend((1..*pieces).map(|j| format!("c_{j}")));
                names
            }
            ProblemSpec::SurrogateWaveguide { .. } => SurrogateDispersionForward::parameter_names(),
            ProblemSpec::Conjugate { .. } => vec!["theta".into()],
        }
    }

    pub fn build_forward(&self) -> Result<Arc<dyn ForwardModel>> {
        match self {
            ProblemSpec::ToyFredholm { eval_points, source_points, pieces, .. } => {
                let op = SmoothingKernelOperator::new(
                    linspace(0.0, 1.0, *eval_points),
                    *source_points,
                )?;
                Ok(Arc::new(ToyFredholmForward::new(op, *pieces)))
            }
            ProblemSpec::SurrogateWaveguide { .. } => {
                Ok(Arc::new(SurrogateDispersionForward::default_grid()))
            }
            ProblemSpec::Conjugate { .. } => Ok(Arc::new(IdentityForward::new(1))),
        }
    }

    pub fn build_prior(&self) -> Result<Box<dyn PriorModel>> {
        match self {
            ProblemSpec::ToyFredholm { pieces, .. } => {
                let mut blocks: Vec<Box<dyn PriorModel>> = Vec::new();
                for _ in 0..*pieces {
                    blocks.push(Box::new(GammaPrior::new(2.0, 1.0)?));
                }
                if *pieces > 1 {
                    blocks.push(Box::new(OrderedUniformPrior::new(pieces - 1)?));
                }
                Ok(Box::new(BlockPrior::new(blocks, self.parameter_names())?))
            }
            ProblemSpec::SurrogateWaveguide { .. } => {
                let boxes = [MODULUS_RANGE, THICKNESS_RANGE, RADIUS_RANGE];
                let mut blocks: Vec<Box<dyn PriorModel>> = Vec::new();
                for (lo, hi) in boxes {
                    blocks.push(Box::new(ScaledBetaPrior::new(1.0, 3.0, lo, hi)?));
                }
                Ok(Box::new(BlockPrior::new(blocks, self.parameter_names())?))
            }
            ProblemSpec::Conjugate { .. } => Ok(Box::new(BlockPrior::new(
                vec![Box::new(GaussianPrior::new(0.0, 1.0)?)],
                self.parameter_names(),
            )?)),
        }
    }

    pub fn truth(&self) -> Result<Option<ParameterVector>> {
        let values = match self {
            ProblemSpec::ToyFredholm { truth_coefficients, truth_cutpoints, .. } => {
                let mut v = truth_coefficients.clone();
                v.extend_from_slice(truth_cutpoints);
                v
            }
            ProblemSpec::SurrogateWaveguide { truth, .. } => truth.clone(),
            ProblemSpec::Conjugate { .. } => return Ok(None),
        };
        Ok(Some(ParameterVector::new(values, self.parameter_names().into())?))
    }

    /// Generate the dataset this problem describes. `seed` overrides the seed
    /// stored inside the noise spec so one master seed controls the run.
    pub fn simulate(&self, seed: u64) -> Result<Dataset> {
        match self {
            ProblemSpec::ToyFredholm {
                n, eval_points, source_points, pieces, noise, ..
            } => {
                let truth = self.truth()?.expect("toy problem has a truth");
                let op = SmoothingKernelOperator::new(
                    linspace(0.0, 1.0, *eval_points),
                    *source_points,
                )?;
                simulate_toy_dataset(&truth, &noise.with_seed(seed), *n, &op, *pieces)
            }
            ProblemSpec::SurrogateWaveguide { n, noise, .. } => {
                let truth = self.truth()?.expect("surrogate problem has a truth");
                let forward = SurrogateDispersionForward::default_grid();
                let grid = forward.frequencies().to_vec();
                simulate_forward_dataset(&forward, &truth, &noise.with_seed(seed), *n, &grid)
            }
            ProblemSpec::Conjugate { values } => {
                if values.is_empty() {
                    return Err(Error::Config("conjugate problem needs observations".into()));
                }
                Dataset::new(
                    values.iter().map(|&v| vec![v]).collect(),
                    vec![0.0],
                    DatasetMeta { seed: Some(seed), noise: None, truth: None },
                )
            }
        }
    }

    /// The problem's natural curve for credible-band plots: the reconstructed
    /// source function u(t) for the toy problem, the dispersion curve c(f)
    /// for the surrogate, and the (scalar) forward output otherwise.
    pub fn curve(&self, theta: &ParameterVector) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            ProblemSpec::ToyFredholm { pieces, .. } => {
                let u = PiecewiseConstantFunction::from_parameter(theta, *pieces)?;
                let grid = linspace(0.0, 1.0, 201);
                let values = grid.iter().map(|&t| u.evaluate(t)).collect();
                Ok((grid, values))
            }
            ProblemSpec::SurrogateWaveguide { .. } => {
                let forward = SurrogateDispersionForward::default_grid();
                let values = forward.apply(theta)?;
                Ok((forward.frequencies().to_vec(), values))
            }
            ProblemSpec::Conjugate { .. } => Ok((vec![0.0], theta.values().to_vec())),
        }
    }

    /// A copy with every noise sigma forced to zero (the zero-noise flag).
    pub fn without_noise(&self) -> Self {
        let zero = |noise: &NoiseSpec| match *noise {
            NoiseSpec::AdditiveGaussian { seed, .. } => {
                NoiseSpec::AdditiveGaussian { sigma: 0.0, seed }
            }
            NoiseSpec::MultiplicativeLognormalBlockwise { seed, .. } => {
                NoiseSpec::MultiplicativeLognormalBlockwise { sigma: 0.0, seed }
            }
            NoiseSpec::MultiplicativeLognormalSmooth { correlation_length, seed, .. } => {
                NoiseSpec::MultiplicativeLognormalSmooth {
                    sigma: 0.0,
                    correlation_length,
                    seed,
                }
            }
        };
        let mut spec = self.clone();
        match &mut spec {
            ProblemSpec::ToyFredholm { noise, .. }
            | ProblemSpec::SurrogateWaveguide { noise, .. } => *noise = zero(noise),
            ProblemSpec::Conjugate { .. } => {}
        }
        spec
    }

    pub fn noise_label(&self) -> &'static str {
        match self {
            ProblemSpec::Conjugate { .. } => "none",
            ProblemSpec::ToyFredholm { noise, .. }
            | ProblemSpec::SurrogateWaveguide { noise, .. } => match noise {
                NoiseSpec::AdditiveGaussian { .. } => "additive-gaussian",
                NoiseSpec::MultiplicativeLognormalBlockwise { .. } => {
                    "multiplicative-lognormal-blockwise"
                }
                NoiseSpec::MultiplicativeLognormalSmooth { .. } => {
                    "multiplicative-lognormal-smooth"
                }
            },
        }
    }
}

fn default_particles() -> usize {
    2000
}
fn default_mh_steps() -> usize {
    5
}
fn default_ess_threshold() -> f64 {
    0.5
}
fn default_rule() -> String {
    "one-se".into()
}
fn default_out() -> PathBuf {
    PathBuf::from("runs/default")
}

/// One experiment, fully determined by this document plus the seed. CLI flags
/// override individual fields; the effective config is echoed into the output
/// directory so every artifact can be reproduced from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    pub problem: ProblemSpec,
    /// Read the dataset from this CSV instead of simulating.
    #[serde(default)]
    pub dataset_csv: Option<PathBuf>,
    /// Loss names: squared_l2 | l1 | gaussian_nll | laplace_nll.
    pub losses: Vec<String>,
    /// Multiplicative loss normalization; omitted = estimate W0_hat from the
    /// data variance.
    #[serde(default)]
    pub loss_scale: Option<f64>,
    /// W grid; omitted = the default ladder {0, 2^-8, ..., 2^-1, 1}.
    #[serde(default)]
    pub w_grid: Option<Vec<f64>>,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_mh_steps")]
    pub mh_steps: usize,
    #[serde(default = "default_ess_threshold")]
    pub ess_threshold: f64,
    pub seed: u64,
    /// Selection rule: min | one-se.
    #[serde(default = "default_rule")]
    pub rule: String,
    /// Skip calibration and fix W = 1 when sampling.
    #[serde(default)]
    pub bayes: bool,
    /// Emit static SVG plots alongside the CSV reports.
    #[serde(default)]
    pub plots: bool,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            particles: self.particles,
            mh_steps: self.mh_steps,
            ess_threshold: self.ess_threshold,
            seed: self.seed,
            ..FilterConfig::default()
        }
    }

    pub fn w_grid(&self) -> Result<WGrid> {
        match &self.w_grid {
            Some(weights) => WGrid::new(weights.clone()),
            None => Ok(WGrid::default_grid()),
        }
    }

    /// Resolve the loss normalization: a fixed value if configured, else the
    /// data-driven estimate W0_hat.
    pub fn resolve_scale(&self, data: &Dataset) -> Result<f64> {
        match self.loss_scale {
            Some(s) => Ok(s),
            None => loss_scale_estimate(data),
        }
    }

    /// Build the configured losses against the problem's forward model, all
    /// sharing one normalization.
    pub fn build_losses(&self, data: &Dataset) -> Result<Vec<(String, LossModel)>> {
        if self.losses.is_empty() {
            return Err(Error::Config("no losses configured".into()));
        }
        let forward = self.problem.build_forward()?;
        let scale = self.resolve_scale(data)?;
        self.losses
            .iter()
            .map(|name| {
                let form = residual_form_by_name(name)
                    .ok_or_else(|| Error::Config(format!("unknown loss '{name}'")))?;
                Ok((name.clone(), LossModel::new(forward.clone(), form, scale)?))
            })
            .collect()
    }
}

/// Shipped presets with pinned seeds.
pub fn preset(name: &str) -> Option<RunConfig> {
    match name {
        "toy-fredholm" => Some(RunConfig {
            experiment: "toy-fredholm".into(),
            problem: ProblemSpec::ToyFredholm {
                n: 90,
                eval_points: 100,
                source_points: 400,
                pieces: 4,
                truth_coefficients: vec![4.0, 4.0, 4.0, 4.0],
                truth_cutpoints: vec![0.25, 0.5, 0.75],
                noise: NoiseSpec::MultiplicativeLognormalBlockwise { sigma: 1.0, seed: 17 },
            },
            dataset_csv: None,
            losses: vec!["l1".into()],
            loss_scale: None,
            w_grid: None,
            particles: default_particles(),
            mh_steps: default_mh_steps(),
            ess_threshold: default_ess_threshold(),
            seed: 17,
            rule: default_rule(),
            bayes: false,
            plots: false,
            out: PathBuf::from("runs/toy-fredholm"),
        }),
        "surrogate-waveguide" => Some(RunConfig {
            experiment: "surrogate-waveguide".into(),
            problem: ProblemSpec::SurrogateWaveguide {
                n: 5,
                truth: vec![50.0, 5.75, 3.0],
                noise: NoiseSpec::AdditiveGaussian { sigma: 0.1, seed: 42 },
            },
            dataset_csv: None,
            losses: vec!["l2".into(), "l1".into()],
            loss_scale: None,
            w_grid: None,
            particles: default_particles(),
            mh_steps: default_mh_steps(),
            ess_threshold: default_ess_threshold(),
            seed: 42,
            rule: default_rule(),
            bayes: false,
            plots: false,
            out: PathBuf::from("runs/surrogate-waveguide"),
        }),
        "conjugate" => Some(RunConfig {
            experiment: "conjugate".into(),
            problem: ProblemSpec::Conjugate { values: vec![1.0] },
            dataset_csv: None,
            losses: vec!["squared_l2".into()],
            loss_scale: Some(1.0),
            w_grid: None,
            particles: default_particles(),
            mh_steps: default_mh_steps(),
            ess_threshold: default_ess_threshold(),
            seed: 1,
            rule: default_rule(),
            bayes: false,
            plots: false,
            out: PathBuf::from("runs/conjugate"),
        }),
        _ => None,
    }
}

pub const PRESET_NAMES: &[&str] = &["toy-fredholm", "surrogate-waveguide", "conjugate"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_json() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            let back = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
            assert_eq!(cfg, back, "{name}");
        }
    }

    #[test]
    fn toy_preset_matches_stated_scale() {
        let cfg = preset("toy-fredholm").unwrap();
        let ds = cfg.problem.simulate(cfg.seed).unwrap();
        assert_eq!(ds.len(), 90);
        assert_eq!(ds.dim(), 100);
        assert_eq!(cfg.problem.parameter_names().len(), 7);
    }

    #[test]
    fn zero_noise_toy_rows_are_identical() {
        let cfg = preset("toy-fredholm").unwrap();
        let ds = cfg.problem.without_noise().simulate(3).unwrap();
        let first = ds.observation(0).to_vec();
        for y in ds.observations() {
            assert_eq!(*y, first);
        }
    }

    #[test]
    fn unknown_loss_is_config_error() {
        let mut cfg = preset("conjugate").unwrap();
        cfg.losses = vec!["huber".into()];
        let ds = cfg.problem.simulate(cfg.seed).unwrap();
        assert!(matches!(cfg.build_losses(&ds), Err(Error::Config(_))));
    }

    #[test]
    fn surrogate_prior_samples_stay_in_forward_support() {
        let cfg = preset("surrogate-waveguide").unwrap();
        let prior = cfg.problem.build_prior().unwrap();
        let forward = cfg.problem.build_forward().unwrap();
        use rand::SeedableRng;
        let mut rng = rand::rngs::StdRng::seed_from_u64(9);
        for _ in 0..200 {
            let theta = prior.sample(&mut rng);
            assert!(forward.apply(&theta).is_ok());
        }
    }
}
