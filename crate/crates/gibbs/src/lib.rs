//! Gibbs-posterior (generalized Bayes) inference for misspecified inverse
//! problems.
//!
//! The crate provides:
//!
//! - [`core`]: domain types and the loss / prior / forward-model contracts;
//! - [`models`]: the piecewise-constant Fredholm toy problem, a surrogate
//!   dispersion model, dataset simulators, and built-in losses and priors;
//! - [`smc`]: a sequential Monte Carlo sampler over a grid of regularization
//!   weights W, targeting the leave-one-out mixture distributions;
//! - [`calib`]: LOOCV risk estimation and selection of W (min rule or
//!   one-standard-error rule);
//! - [`predictive`]: Gibbs predictive densities and the P_CV model-selection
//!   criterion across losses;
//! - [`oracle`]: brute-force quadrature references and numerical verification
//!   suites (stability, finite approximation, consistency, predictive
//!   convergence, divergence inequalities).
//!
//! Numeric kernels in [`numeric`] are generic over [`num_traits::Float`];
//! everything else fixes the scalar type to [`Real`].

pub mod calib;
pub mod core;
pub mod error;
pub mod models;
pub mod numeric;
pub mod oracle;
pub mod predictive;
pub mod smc;

/// The concrete scalar type used by the inference machinery.
pub type Real = f64;

pub use error::{Error, Result};
