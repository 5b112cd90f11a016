use std::sync::Arc;

use crate::core::data::Dataset;
use crate::core::param::ParameterVector;
use crate::error::{Error, Result};
use crate::Real;

/// The parameter-to-observation map F. Implementations must be deterministic
/// in theta (and mesh parameter, when present) and re-entrant.
pub trait ForwardModel: Send + Sync {
    fn output_dim(&self) -> usize;

    fn apply(&self, theta: &ParameterVector) -> Result<Vec<Real>>;

    /// Mesh parameter h for discretized models, if any.
    fn mesh(&self) -> Option<Real> {
        None
    }
}

/// Residual loss form l(F(theta), y) applied to r = F(theta) - y.
/// All built-in forms depend on y only through the residual, so every
/// [`LossModel`] built from them is translation invariant.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResidualForm {
    /// ||r||^2
    SquaredL2,
    /// ||r||_1
    L1,
    /// Gaussian negative log-likelihood with scale sigma:
    /// ||r||^2 / (2 sigma^2) + d * log(sigma * sqrt(2 pi))
    GaussianNll { sigma: Real },
    /// Laplace negative log-likelihood with scale b:
    /// ||r||_1 / b + d * log(2 b)
    LaplaceNll { scale: Real },
}

impl ResidualForm {
    pub fn raw(&self, residual: &[Real]) -> Real {
        match *self {
            ResidualForm::SquaredL2 => residual.iter().map(|r| r * r).sum(),
            ResidualForm::L1 => residual.iter().map(|r| r.abs()).sum(),
            ResidualForm::GaussianNll { sigma } => {
                let ss: Real = residual.iter().map(|r| r * r).sum();
                let d = residual.len() as Real;
                ss / (2.0 * sigma * sigma) + d * (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln()
            }
            ResidualForm::LaplaceNll { scale } => {
                let l1: Real = residual.iter().map(|r| r.abs()).sum();
                let d = residual.len() as Real;
                l1 / scale + d * (2.0 * scale).ln()
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ResidualForm::SquaredL2 => "squared_l2",
            ResidualForm::L1 => "l1",
            ResidualForm::GaussianNll { .. } => "gaussian_nll",
            ResidualForm::LaplaceNll { .. } => "laplace_nll",
        }
    }

    /// log of Z-tilde(theta) = integral over R^d of exp(-c * l(r)) dr for the
    /// form scaled by c; constant in theta by translation invariance.
    /// The Gaussian/Laplace NLL forms may produce a loss that is not bounded
    /// below by zero once c != 1; the integral itself stays finite for all
    /// c > 0.
    pub fn log_partition(&self, scale: Real, d: usize) -> Result<Real> {
        if scale <= 0.0 || !scale.is_finite() {
            return Err(Error::Config(format!("loss scale must be positive, got {scale}")));
        }
        let d = d as Real;
        let pi = std::f64::consts::PI;
        Ok(match *self {
            // integral exp(-c r^2) dr = sqrt(pi / c), per coordinate
            ResidualForm::SquaredL2 => 0.5 * d * (pi / scale).ln(),
            // integral exp(-c |r|) dr = 2 / c, per coordinate
            ResidualForm::L1 => d * (2.0 / scale).ln(),
            ResidualForm::GaussianNll { sigma } => {
                // exp(-c L) = (sigma sqrt(2 pi))^{-c d} exp(-c r^2 / (2 sigma^2))
                let per = 0.5 * (2.0 * pi * sigma * sigma / scale).ln()
                    - scale * (sigma * (2.0 * pi).sqrt()).ln();
                d * per
            }
            ResidualForm::LaplaceNll { scale: b } => {
                let per = (2.0 * b / scale).ln() - scale * (2.0 * b).ln();
                d * per
            }
        })
    }
}

/// A loss L(theta, y) = W0_hat * l(F(theta), y): a residual form composed with
/// a forward model and a multiplicative normalization so that downstream W
/// grids live on (0, 1].
#[derive(Clone)]
pub struct LossModel {
    forward: Arc<dyn ForwardModel>,
    form: ResidualForm,
    scale: Real,
}

impl LossModel {
    pub fn new(forward: Arc<dyn ForwardModel>, form: ResidualForm, scale: Real) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("loss scale must be positive, got {scale}")));
        }
        Ok(Self { forward, form, scale })
    }

    pub fn form(&self) -> ResidualForm {
        self.form
    }

    pub fn scale(&self) -> Real {
        self.scale
    }

    pub fn forward_model(&self) -> &Arc<dyn ForwardModel> {
        &self.forward
    }

    /// All built-in residual forms depend on y only through F(theta) - y.
    pub fn translation_invariant(&self) -> bool {
        true
    }

    /// A copy with the normalization replaced.
    pub fn with_scale(&self, scale: Real) -> Result<Self> {
        Self::new(self.forward.clone(), self.form, scale)
    }

    pub fn forward(&self, theta: &ParameterVector) -> Result<Vec<Real>> {
        let out = self.forward.apply(theta)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                msg: "forward model produced non-finite output".into(),
                theta: theta.values().to_vec(),
            });
        }
        Ok(out)
    }

    /// Loss against a single observation; computes F(theta) once.
    pub fn evaluate(&self, theta: &ParameterVector, y: &[Real]) -> Result<Real> {
        let f = self.forward(theta)?;
        self.evaluate_with_forward(&f, y, theta)
    }

    /// Loss given a precomputed forward output.
    pub fn evaluate_with_forward(
        &self,
        forward_output: &[Real],
        y: &[Real],
        theta: &ParameterVector,
    ) -> Result<Real> {
        if forward_output.len() != y.len() {
            return Err(Error::Config(format!(
                "forward output dimension {} != observation dimension {}",
                forward_output.len(),
                y.len()
            )));
        }
        let residual: Vec<Real> = forward_output.iter().zip(y).map(|(f, yi)| f - yi).collect();
        let raw = self.form.raw(&residual);
        let value = self.scale * raw;
        if !value.is_finite() {
            return Err(Error::Numerical {
                msg: "loss evaluated to a non-finite value".into(),
                theta: theta.values().to_vec(),
            });
        }
        Ok(value)
    }

    /// Per-datum losses l_i = L(theta, y_i), sharing one forward evaluation.
    pub fn losses(&self, theta: &ParameterVector, data: &Dataset) -> Result<Vec<Real>> {
        let f = self.forward(theta)?;
        data.observations()
            .iter()
            .map(|y| self.evaluate_with_forward(&f, y, theta))
            .collect()
    }

    /// log Z-tilde for this loss on R^d (Lebesgue reference).
    pub fn log_partition(&self, d: usize) -> Result<Real> {
        self.form.log_partition(self.scale, d)
    }
}

impl std::fmt::Debug for LossModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LossModel")
            .field("form", &self.form)
            .field("scale", &self.scale)
            .finish()
    }
}

/// Average loss R_n(theta) = (1/n) sum_i L(theta, y_i).
pub fn average_loss(loss: &LossModel, theta: &ParameterVector, data: &Dataset) -> Result<Real> {
    let l = loss.losses(theta, data)?;
    Ok(l.iter().sum::<Real>() / l.len() as Real)
}

/// Per-point sample variances below this are treated as constant coordinates
/// and excluded from the geometric mean (which zeros annihilate).
pub const VARIANCE_FLOOR: Real = 1e-12;

/// Loss normalization W0_hat = 1 / (2 s_hat), where s_hat is the geometric
/// mean over grid points of the per-point sample variance across observations.
pub fn loss_scale_estimate(data: &Dataset) -> Result<Real> {
    let n = data.len();
    if n < 2 {
        return Err(Error::Config("scale estimation needs n >= 2 observations".into()));
    }
    let d = data.dim();
    let mut log_sum = 0.0;
    let mut kept = 0usize;
    for k in 0..d {
        let col: Vec<Real> = data.observations().iter().map(|y| y[k]).collect();
        let var = crate::numeric::sample_variance(&col);
        if var > VARIANCE_FLOOR {
            log_sum += var.ln();
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Error::DegenerateData(
            "sample variance below floor at every grid point".into(),
        ));
    }
    let s_hat = (log_sum / kept as Real).exp();
    let w0 = 1.0 / (2.0 * s_hat);
    if !(w0 > 0.0 && w0.is_finite()) {
        return Err(Error::DegenerateData(format!("non-finite scale estimate {w0}")));
    }
    Ok(w0)
}

/// Identity forward map on a fixed grid (F(theta) = theta broadcast when the
/// parameter is scalar, or componentwise when dims agree). Used by the 1-D
/// verification problems.
#[derive(Debug, Clone)]
pub struct IdentityForward {
    dim: usize,
}

impl IdentityForward {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl ForwardModel for IdentityForward {
    fn output_dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, theta: &ParameterVector) -> Result<Vec<Real>> {
        let v = theta.values();
        if v.len() == self.dim {
            Ok(v.to_vec())
        } else if v.len() == 1 {
            Ok(vec![v[0]; self.dim])
        } else {
            Err(Error::Config(format!(
                "identity forward: parameter dim {} incompatible with output dim {}",
                v.len(),
                self.dim
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::data::DatasetMeta;

    fn scalar_data(values: &[Real]) -> Dataset {
        Dataset::new(
            values.iter().map(|&v| vec![v]).collect(),
            vec![0.0],
            DatasetMeta::default(),
        )
        .unwrap()
    }

    fn identity_loss(form: ResidualForm) -> LossModel {
        LossModel::new(Arc::new(IdentityForward::new(1)), form, 1.0).unwrap()
    }

    #[test]
    fn average_loss_symmetric_residuals() {
        // squared l2, F(theta) = theta, data {1, 3}, theta = 2 -> (1 + 1)/2 = 1
        let loss = identity_loss(ResidualForm::SquaredL2);
        let theta = ParameterVector::scalar(2.0).unwrap();
        let data = scalar_data(&[1.0, 3.0]);
        assert_eq!(average_loss(&loss, &theta, &data).unwrap(), 1.0);
    }

    #[test]
    fn average_loss_single_datum_identity() {
        let loss = identity_loss(ResidualForm::L1);
        let theta = ParameterVector::scalar(-0.7).unwrap();
        let data = scalar_data(&[2.5]);
        let avg = average_loss(&loss, &theta, &data).unwrap();
        let single = loss.evaluate(&theta, data.observation(0)).unwrap();
        assert_eq!(avg, single);
    }

    #[test]
    fn average_loss_l1_hand_value() {
        // l1, F(theta) = theta, data {0, 2, 4}, theta = 1 -> (1 + 1 + 3)/3 = 5/3
        let loss = identity_loss(ResidualForm::L1);
        let theta = ParameterVector::scalar(1.0).unwrap();
        let data = scalar_data(&[0.0, 2.0, 4.0]);
        let got = average_loss(&loss, &theta, &data).unwrap();
        assert!((got - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn average_loss_permutation_invariant() {
        let loss = identity_loss(ResidualForm::SquaredL2);
        let theta = ParameterVector::scalar(0.3).unwrap();
        let data = scalar_data(&[0.1, -2.0, 4.0, 1.5]);
        let perm = data.permuted(&[2, 0, 3, 1]).unwrap();
        assert_eq!(
            average_loss(&loss, &theta, &data).unwrap(),
            average_loss(&loss, &theta, &perm).unwrap()
        );
    }

    #[test]
    fn raw_residual_values() {
        let r = [1.0, -1.0, 2.0];
        assert_eq!(ResidualForm::SquaredL2.raw(&r), 6.0);
        assert_eq!(ResidualForm::L1.raw(&r), 4.0);
    }

    #[test]
    fn scale_estimate_two_scalars() {
        // n = 2, d = 1, y = {0, 2} -> sample variance 2, s_hat = 2, W0 = 1/4
        let data = scalar_data(&[0.0, 2.0]);
        assert!((loss_scale_estimate(&data).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn scale_estimate_skips_constant_coordinates() {
        // identical at grid point 0, variance 2 at grid point 1: the constant
        // coordinate must be excluded from the geometric mean
        let data = Dataset::new(
            vec![vec![5.0, 0.0], vec![5.0, 2.0]],
            vec![0.0, 1.0],
            DatasetMeta::default(),
        )
        .unwrap();
        assert!((loss_scale_estimate(&data).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn scale_estimate_degenerate_data_errors() {
        let data = Dataset::new(
            vec![vec![5.0], vec![5.0]],
            vec![0.0],
            DatasetMeta::default(),
        )
        .unwrap();
        assert!(matches!(loss_scale_estimate(&data), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn scale_estimate_needs_two_observations() {
        let data = scalar_data(&[1.0]);
        assert!(loss_scale_estimate(&data).is_err());
    }

    #[test]
    fn scale_estimate_permutation_invariant() {
        let data = Dataset::new(
            vec![vec![0.0, 1.0], vec![2.0, 5.0], vec![1.0, 2.0]],
            vec![0.0, 1.0],
            DatasetMeta::default(),
        )
        .unwrap();
        let perm = data.permuted(&[2, 1, 0]).unwrap();
        assert_eq!(
            loss_scale_estimate(&data).unwrap(),
            loss_scale_estimate(&perm).unwrap()
        );
    }

    #[test]
    fn translation_invariance_of_builtin_forms() {
        // L(theta, y) depends only on F(theta) - y for every built-in form
        let forms = [
            ResidualForm::SquaredL2,
            ResidualForm::L1,
            ResidualForm::GaussianNll { sigma: 0.7 },
            ResidualForm::LaplaceNll { scale: 1.3 },
        ];
        for form in forms {
            let a = form.raw(&[0.5, -1.0]);
            let b = form.raw(&[0.5, -1.0]); // identical residual, shifted pair
            assert_eq!(a, b);
        }
    }

    #[test]
    fn nll_loss_normalizes_to_one_at_unit_scale() {
        // exp(-L) integrates to 1 over R^d when the loss is an NLL with c = 1
        for form in [
            ResidualForm::GaussianNll { sigma: 1.0 },
            ResidualForm::GaussianNll { sigma: 0.5 },
            ResidualForm::LaplaceNll { scale: 2.0 },
        ] {
            let lz = form.log_partition(1.0, 3).unwrap();
            assert!(lz.abs() < 1e-12, "{form:?}: log Z = {lz}");
        }
    }
}
