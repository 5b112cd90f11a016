use crate::core::{Dataset, LossModel, ParameterVector, PriorModel};
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use crate::Real;

/// Which distribution a particle operation targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetKind {
    /// The leave-one-out mixture rho_mix^W: the average of the n tempered
    /// posteriors each holding out one datum.
    Mixture,
    /// The full-data Gibbs posterior rho_hat_n^W.
    FullPosterior,
}

/// log sum_i exp(-W sum_{j != i} l_j) from a per-datum loss row.
/// For W = 0 this is log n; for n = 1 the inner sum is empty and the value
/// is 0 for every W.
pub fn log_mixture_term(losses: &[Real], w: Real) -> Real {
    let total: Real = losses.iter().sum();
    let exponents: Vec<Real> = losses.iter().map(|l| -w * (total - l)).collect();
    log_sum_exp(&exponents)
}

/// -W sum_i l_i, the full-posterior data term.
pub fn log_full_term(losses: &[Real], w: Real) -> Real {
    -w * losses.iter().sum::<Real>()
}

pub fn log_target_term(kind: TargetKind, losses: &[Real], w: Real) -> Real {
    match kind {
        TargetKind::Mixture => log_mixture_term(losses, w),
        TargetKind::FullPosterior => log_full_term(losses, w),
    }
}

/// log[ rho_0(theta) * sum_i exp(-W sum_{j != i} L(theta, y_j)) ], the
/// unnormalized density of the leave-one-out mixture. Returns -inf (not an
/// error) when theta lies outside the prior support.
pub fn log_mixture_density_unnormalized(
    theta: &ParameterVector,
    w: Real,
    data: &Dataset,
    loss: &LossModel,
    prior: &dyn PriorModel,
) -> Result<Real> {
    if w < 0.0 {
        return Err(Error::Config(format!("W must be >= 0, got {w}")));
    }
    let log_prior = prior.log_density(theta);
    if log_prior == Real::NEG_INFINITY {
        return Ok(Real::NEG_INFINITY);
    }
    let losses = loss.losses(theta, data)?;
    Ok(log_prior + log_mixture_term(&losses, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{DatasetMeta, IdentityForward, ResidualForm};
    use crate::models::GaussianPrior;
    use std::sync::Arc;

    fn setup(values: &[Real]) -> (Dataset, LossModel, GaussianPrior) {
        let data = Dataset::new(
            values.iter().map(|&v| vec![v]).collect(),
            vec![0.0],
            DatasetMeta::default(),
        )
        .unwrap();
        let loss = LossModel::new(
            Arc::new(IdentityForward::new(1)),
            ResidualForm::SquaredL2,
            1.0,
        )
        .unwrap();
        (data, loss, GaussianPrior::new(0.0, 1.0).unwrap())
    }

    #[test]
    fn w_zero_gives_log_prior_plus_log_n() {
        let (data, loss, prior) = setup(&[1.0, -2.0, 0.5]);
        let theta = ParameterVector::scalar(0.7).unwrap();
        let got = log_mixture_density_unnormalized(&theta, 0.0, &data, &loss, &prior).unwrap();
        let want = prior.log_density(&theta) + 3.0f64.ln();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn n_one_mixture_equals_prior_for_all_w() {
        let (data, loss, prior) = setup(&[1.0]);
        let theta = ParameterVector::scalar(-0.3).unwrap();
        for w in [0.0, 0.25, 1.0] {
            let got = log_mixture_density_unnormalized(&theta, w, &data, &loss, &prior).unwrap();
            assert!((got - prior.log_density(&theta)).abs() < 1e-12);
        }
    }

    #[test]
    fn n_two_equal_losses_hand_expansion() {
        // equal losses c for both data: log rho_0 + log 2 - W c
        let (data, loss, prior) = setup(&[1.0, -1.0]);
        let theta = ParameterVector::scalar(0.0).unwrap(); // both losses = 1
        let w = 0.4;
        let got = log_mixture_density_unnormalized(&theta, w, &data, &loss, &prior).unwrap();
        let want = prior.log_density(&theta) + 2.0f64.ln() - w;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn permuting_observations_leaves_value_unchanged() {
        let (data, loss, prior) = setup(&[0.2, 1.5, -0.7, 3.0]);
        let perm = data.permuted(&[3, 1, 0, 2]).unwrap();
        let theta = ParameterVector::scalar(0.9).unwrap();
        let a = log_mixture_density_unnormalized(&theta, 0.3, &data, &loss, &prior).unwrap();
        let b = log_mixture_density_unnormalized(&theta, 0.3, &perm, &loss, &prior).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_w_rejected_and_outside_support_is_neg_inf() {
        let (data, loss, _) = setup(&[1.0]);
        let prior = crate::models::GammaPrior::new(2.0, 1.0).unwrap();
        let theta = ParameterVector::scalar(-1.0).unwrap();
        assert_eq!(
            log_mixture_density_unnormalized(&theta, 0.5, &data, &loss, &prior).unwrap(),
            Real::NEG_INFINITY
        );
        let inside = ParameterVector::scalar(1.0).unwrap();
        assert!(log_mixture_density_unnormalized(&inside, -0.1, &data, &loss, &prior).is_err());
    }
}
