//! Brute-force quadrature oracles and numerical verification suites.

pub mod divergence;
pub mod grid;
pub mod verify;

pub use divergence::{divergences, Divergences};
pub use grid::{
    quadrature_mixture, quadrature_p_cv, quadrature_posterior, quadrature_posterior_held_out,
    quadrature_predictive_log_density, quadrature_r_cv, GridPosterior, DEFAULT_GRID_POINTS,
};
pub use verify::{
    conjugate_problem, verify_consistency, verify_finite_approximation, verify_inequalities,
    verify_oracle_equivalence, verify_predictive_convergence, verify_stability,
    ApproximationReport, ConsistencyReport, EquivalenceReport, InequalityReport,
    PredictiveConvergenceReport, StabilityReport,
};
