use crate::core::{ForwardModel, ParameterDomain, ParameterVector};
use crate::error::{Error, Result};
use crate::numeric::linspace;
use crate::Real;

/// Physical boxes for the waveguide-style parameters:
/// shear modulus in [5, 95] kPa, wall thickness in [5, 6.5] mm,
/// radius in [2, 4] mm.
pub const MODULUS_RANGE: (Real, Real) = (5.0, 95.0);
pub const THICKNESS_RANGE: (Real, Real) = (5.0, 6.5);
pub const RADIUS_RANGE: (Real, Real) = (2.0, 4.0);

/// Relative sensitivity of the curve to thickness and radius. Chosen small so
/// the geometry is weakly identified while the modulus stays strongly
/// identified, mirroring the identifiability pattern of real waveguide
/// inversions.
const THICKNESS_SENSITIVITY: Real = 0.01;
const RADIUS_SENSITIVITY: Real = 0.03;

/// Closed-form stand-in for a cylindrical-waveguide dispersion solver.
///
/// The phase-velocity curve is
///
/// ```text
/// c(f; modulus, thickness, radius)
///   = sqrt(modulus) * f / (f + 1)
///     * (1 + 0.01 * t_std + 0.03 * r_std)
/// ```
///
/// with `t_std`, `r_std` the thickness and radius standardized to [-1, 1] over
/// their physical boxes. The curve is positive and strictly increasing in
/// frequency; scaling the modulus moves it up at every frequency, while
/// thickness and radius only perturb it by a few percent of its dynamic range.
#[derive(Debug, Clone)]
pub struct SurrogateDispersionForward {
    frequencies: Vec<Real>,
    domain: ParameterDomain,
}

impl SurrogateDispersionForward {
    pub fn new(frequencies: Vec<Real>) -> Result<Self> {
        if frequencies.len() < 2
            || !frequencies.windows(2).all(|w| w[0] < w[1])
            || frequencies[0] <= 0.0
        {
            return Err(Error::Config(
                "frequency grid must be positive and strictly increasing".into(),
            ));
        }
        let domain = ParameterDomain::new(
            vec![MODULUS_RANGE.0, THICKNESS_RANGE.0, RADIUS_RANGE.0],
            vec![MODULUS_RANGE.1, THICKNESS_RANGE.1, RADIUS_RANGE.1],
        )?;
        Ok(Self { frequencies, domain })
    }

    /// Default grid: 40 frequencies on [0.1, 4].
    pub fn default_grid() -> Self {
        Self::new(linspace(0.1, 4.0, 40)).expect("static grid is valid")
    }

    pub fn frequencies(&self) -> &[Real] {
        &self.frequencies
    }

    pub fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    pub fn parameter_names() -> Vec<String> {
        vec!["modulus".into(), "thickness".into(), "radius".into()]
    }
}

fn standardize(x: Real, range: (Real, Real)) -> Real {
    2.0 * (x - range.0) / (range.1 - range.0) - 1.0
}

impl ForwardModel for SurrogateDispersionForward {
    fn output_dim(&self) -> usize {
        self.frequencies.len()
    }

    fn apply(&self, theta: &ParameterVector) -> Result<Vec<Real>> {
        if theta.dim() != 3 || !self.domain.contains(theta) {
            return Err(Error::Domain(format!(
                "surrogate dispersion parameters out of physical box: {:?}",
                theta.values()
            )));
        }
        let v = theta.values();
        let (modulus, thickness, radius) = (v[0], v[1], v[2]);
        let geometry = 1.0
            + THICKNESS_SENSITIVITY * standardize(thickness, THICKNESS_RANGE)
            + RADIUS_SENSITIVITY * standardize(radius, RADIUS_RANGE);
        let amplitude = modulus.sqrt() * geometry;
        Ok(self
            .frequencies
            .iter()
            .map(|&f| amplitude * f / (f + 1.0))
            .collect())
    }
}

/// Convenience: surrogate_dispersion_forward on the default grid.
pub fn surrogate_dispersion_forward(theta: &ParameterVector) -> Result<Vec<Real>> {
    SurrogateDispersionForward::default_grid().apply(theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn theta(m: Real, t: Real, r: Real) -> ParameterVector {
        ParameterVector::new(vec![m, t, r], SurrogateDispersionForward::parameter_names().into())
            .unwrap()
    }

    #[test]
    fn box_center_curve_is_positive_and_monotone() {
        let c = surrogate_dispersion_forward(&theta(50.0, 5.75, 3.0)).unwrap();
        assert!(c.iter().all(|&v| v > 0.0 && v.is_finite()));
        assert!(c.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn thickness_weakly_identified() {
        // extreme thickness change moves the curve by < 5% of its dynamic range
        let a = surrogate_dispersion_forward(&theta(50.0, 5.0, 3.0)).unwrap();
        let b = surrogate_dispersion_forward(&theta(50.0, 6.5, 3.0)).unwrap();
        let dynamic_range = a.last().unwrap() - a.first().unwrap();
        let max_diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, Real::max);
        assert!(max_diff < 0.05 * dynamic_range, "diff {max_diff} range {dynamic_range}");
    }

    #[test]
    fn modulus_scaling_shifts_curve_up_everywhere() {
        let a = surrogate_dispersion_forward(&theta(20.0, 5.75, 3.0)).unwrap();
        let b = surrogate_dispersion_forward(&theta(40.0, 5.75, 3.0)).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| y > x));
    }

    #[test]
    fn out_of_box_is_domain_error() {
        assert!(matches!(
            surrogate_dispersion_forward(&theta(120.0, 5.75, 3.0)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            surrogate_dispersion_forward(&theta(50.0, 5.75, 4.5)),
            Err(Error::Domain(_))
        ));
    }
}
