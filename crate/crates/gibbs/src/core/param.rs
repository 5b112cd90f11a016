use std::sync::Arc;

use crate::error::{Error, Result};
use crate::Real;

/// A point theta in a box-constrained subset of R^p, with named components.
/// Immutable after creation; all components are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<Real>,
    names: Arc<[String]>,
}

impl ParameterVector {
    pub fn new(values: Vec<Real>, names: Arc<[String]>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("parameter dimension must be >= 1".into()));
        }
        if values.len() != names.len() {
            return Err(Error::Domain(format!(
                "{} values but {} names",
                values.len(),
                names.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite parameter component in {values:?}"
            )));
        }
        Ok(Self { values, names })
    }

    /// Convenience constructor with generated names `theta_0, theta_1, ...`.
    pub fn unnamed(values: Vec<Real>) -> Result<Self> {
        let names: Arc<[String]> = (0..values.len())
            .map(|k| format!("theta_{k}"))
            .collect::<Vec<_>>()
            .into();
        Self::new(values, names)
    }

    /// Scalar parameter with a single component named `theta`.
    pub fn scalar(value: Real) -> Result<Self> {
        Self::new(vec![value], vec!["theta".to_string()].into())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Real] {
        &self.values
    }

    pub fn names(&self) -> &Arc<[String]> {
        &self.names
    }

    /// A new vector with the same names and the given values.
    pub fn with_values(&self, values: Vec<Real>) -> Result<Self> {
        Self::new(values, self.names.clone())
    }
}

/// Componentwise box bounds plus optional ordering constraints
/// (pairs (i, j) with i < j requiring theta_i < theta_j).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParameterDomain {
    lower: Vec<Real>,
    upper: Vec<Real>,
    #[serde(default)]
    ordering: Vec<(usize, usize)>,
}

impl ParameterDomain {
    pub fn new(lower: Vec<Real>, upper: Vec<Real>) -> Result<Self> {
        Self::with_ordering(lower, upper, Vec::new())
    }

    pub fn with_ordering(
        lower: Vec<Real>,
        upper: Vec<Real>,
        ordering: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Config("bound vectors empty or of unequal length".into()));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            // infinite bounds allowed per side, NaN never
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(Error::Config(format!("invalid bound pair ({lo}, {hi})")));
            }
        }
        let p = lower.len();
        for &(i, j) in &ordering {
            if i >= j || j >= p {
                return Err(Error::Config(format!("invalid ordering pair ({i}, {j})")));
            }
        }
        Ok(Self { lower, upper, ordering })
    }

    /// Unbounded domain of dimension `p`.
    pub fn unbounded(p: usize) -> Self {
        Self {
            lower: vec![Real::NEG_INFINITY; p],
            upper: vec![Real::INFINITY; p],
            ordering: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[Real] {
        &self.lower
    }

    pub fn upper(&self) -> &[Real] {
        &self.upper
    }

    pub fn contains(&self, theta: &ParameterVector) -> bool {
        if theta.dim() != self.dim() {
            return false;
        }
        let v = theta.values();
        for ((x, lo), hi) in v.iter().zip(&self.lower).zip(&self.upper) {
            if !(x >= lo && x <= hi) {
                return false;
            }
        }
        self.ordering.iter().all(|&(i, j)| v[i] < v[j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan_and_empty() {
        assert!(ParameterVector::unnamed(vec![]).is_err());
        assert!(ParameterVector::unnamed(vec![f64::NAN]).is_err());
        assert!(ParameterVector::unnamed(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn box_and_ordering_membership() {
        let dom =
            ParameterDomain::with_ordering(vec![0.0, 0.0], vec![1.0, 1.0], vec![(0, 1)]).unwrap();
        let inside = ParameterVector::unnamed(vec![0.2, 0.8]).unwrap();
        let unordered = ParameterVector::unnamed(vec![0.8, 0.2]).unwrap();
        let outside = ParameterVector::unnamed(vec![-0.1, 0.5]).unwrap();
        assert!(dom.contains(&inside));
        assert!(!dom.contains(&unordered));
        assert!(!dom.contains(&outside));
    }

    #[test]
    fn bounds_validation() {
        assert!(ParameterDomain::new(vec![1.0], vec![1.0]).is_err());
        assert!(ParameterDomain::new(vec![0.0], vec![f64::INFINITY]).is_ok());
    }
}
