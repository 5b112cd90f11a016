use std::sync::Arc;

use crate::core::{ForwardModel, LossModel, ResidualForm};
use crate::error::Result;
use crate::Real;

/// The built-in loss family for a given forward model: squared l2, l1, and
/// the Gaussian/Laplace negative-log-likelihood wrappers. Every member is
/// translation invariant and carries the same multiplicative normalization.
pub fn builtin_losses(forward: Arc<dyn ForwardModel>, scale: Real) -> Result<Vec<LossModel>> {
    [
        ResidualForm::SquaredL2,
        ResidualForm::L1,
        ResidualForm::GaussianNll { sigma: 1.0 },
        ResidualForm::LaplaceNll { scale: 1.0 },
    ]
    .into_iter()
    .map(|form| LossModel::new(forward.clone(), form, scale))
    .collect()
}

/// Parse a loss name as used in configs and CLI flags.
pub fn residual_form_by_name(name: &str) -> Option<ResidualForm> {
    match name {
        "squared_l2" | "l2" => Some(ResidualForm::SquaredL2),
        "l1" => Some(ResidualForm::L1),
        "gaussian_nll" => Some(ResidualForm::GaussianNll { sigma: 1.0 }),
        "laplace_nll" => Some(ResidualForm::LaplaceNll { scale: 1.0 }),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::IdentityForward;
    use crate::numeric::{linspace, trapezoid_weights};

    #[test]
    fn builtin_set_contains_the_four_forms() {
        let losses = builtin_losses(Arc::new(IdentityForward::new(1)), 1.0).unwrap();
        assert_eq!(losses.len(), 4);
        assert!(losses.iter().all(|l| l.translation_invariant()));
        let labels: Vec<_> = losses.iter().map(|l| l.form().label()).collect();
        assert_eq!(labels, ["squared_l2", "l1", "gaussian_nll", "laplace_nll"]);
    }

    #[test]
    fn gaussian_nll_is_half_squared_l2_plus_constant() {
        // with unit scale: NLL = r^2/2 + log sqrt(2 pi) per coordinate, and the
        // constant makes exp(-L) integrate to 1 in d = 1 (quadrature check)
        let nll = ResidualForm::GaussianNll { sigma: 1.0 };
        let l2 = ResidualForm::SquaredL2;
        let c = 0.5 * (2.0 * std::f64::consts::PI).ln();
        for r in [-2.0, -0.3, 0.0, 1.7] {
            let diff = nll.raw(&[r]) - 0.5 * l2.raw(&[r]);
            assert!((diff - c).abs() < 1e-12);
        }
        let grid = linspace(-12.0, 12.0, 60_001);
        let w = trapezoid_weights(&grid);
        let mass: Real = grid.iter().zip(&w).map(|(&r, &wi)| wi * (-nll.raw(&[r])).exp()).sum();
        assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
    }

    #[test]
    fn name_round_trip() {
        for name in ["squared_l2", "l1", "gaussian_nll", "laplace_nll"] {
            assert_eq!(residual_form_by_name(name).unwrap().label(), name);
        }
        assert!(residual_form_by_name("huber").is_none());
    }
}
