//! Concrete forward models, priors, losses, and dataset simulators.

pub mod losses;
pub mod noise;
pub mod piecewise;
pub mod priors;
pub mod surrogate;

pub use losses::{builtin_losses, residual_form_by_name};
pub use noise::{simulate_forward_dataset, simulate_toy_dataset, NoiseSpec};
pub use piecewise::{
    toy_forward, PiecewiseConstantFunction, SmoothingKernelOperator, ToyFredholmForward,
};
pub use priors::{BlockPrior, GammaPrior, GaussianPrior, OrderedUniformPrior, ScaledBetaPrior};
pub use surrogate::{surrogate_dispersion_forward, SurrogateDispersionForward};
