//! Sequential Monte Carlo over the W-sequence of leave-one-out mixture
//! distributions: reweighting, systematic resampling, random-walk MH
//! mutation, the calibration and full-posterior filters, and checkpoints.

pub mod checkpoint;
pub mod filter;
pub mod mixture;
pub mod mutate;
pub mod particle;

pub use checkpoint::{Checkpoint, CHECKPOINT_SCHEMA_VERSION};
pub use filter::{
    run_calibration_filter, run_full_posterior_filter, CalibrationOutcome, FilterConfig, WGrid,
};
pub use mixture::{log_mixture_density_unnormalized, TargetKind};
pub use mutate::{mutate, MutationKernel, MutationStats};
pub use particle::{derive_rng, systematic_ancestors, ParticleSystem};
