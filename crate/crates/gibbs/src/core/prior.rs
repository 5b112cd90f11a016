use rand::RngCore;

use crate::core::param::ParameterVector;
use crate::Real;

/// A prior distribution rho_0 on the parameter space: exact log-density plus
/// a sampler. `sample` output must always lie in the support
/// (`log_density > -inf`), and 1-D instances must integrate to 1.
pub trait PriorModel: Send + Sync {
    fn dim(&self) -> usize;

    /// Log prior density, -inf outside the support.
    fn log_density(&self, theta: &ParameterVector) -> Real;

    fn sample(&self, rng: &mut dyn RngCore) -> ParameterVector;

    /// Component labels, used for reports and plots.
    fn names(&self) -> Vec<String> {
        (0..self.dim()).map(|k| format!("theta_{k}")).collect()
    }

    fn supports(&self, theta: &ParameterVector) -> bool {
        self.log_density(theta) > Real::NEG_INFINITY
    }
}

impl PriorModel for Box<dyn PriorModel> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_density(&self, theta: &ParameterVector) -> Real {
        (**self).log_density(theta)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> ParameterVector {
        (**self).sample(rng)
    }

    fn names(&self) -> Vec<String> {
        (**self).names()
    }
}
