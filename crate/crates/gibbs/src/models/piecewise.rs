use crate::core::{ForwardModel, ParameterVector};
use crate::error::{Error, Result};
use crate::numeric::{linspace, trapezoid_weights};
use crate::Real;

/// u(t) = sum_j b_j 1{c_{j-1} <= t <= c_j} on [0,1], with implicit c_0 = 0 and
/// c_J = 1. Coefficients must be nonnegative and cutpoints strictly increasing
/// in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantFunction {
    coefficients: Vec<Real>,
    cutpoints: Vec<Real>,
}

impl PiecewiseConstantFunction {
    pub fn new(coefficients: Vec<Real>, cutpoints: Vec<Real>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Domain("at least one coefficient required".into()));
        }
        if cutpoints.len() + 1 != coefficients.len() {
            return Err(Error::Domain(format!(
                "{} coefficients need {} cutpoints, got {}",
                coefficients.len(),
                coefficients.len() - 1,
                cutpoints.len()
            )));
        }
        if coefficients.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::Domain(format!("coefficients must be >= 0: {coefficients:?}")));
        }
        let mut prev = 0.0;
        for &c in &cutpoints {
            if !(c > prev && c < 1.0) {
                return Err(Error::Domain(format!(
                    "cutpoints must satisfy 0 < c_1 < ... < c_k < 1: {cutpoints:?}"
                )));
            }
            prev = c;
        }
        Ok(Self { coefficients, cutpoints })
    }

    /// Decode theta = (b_1..b_J, c_1..c_{J-1}).
    pub fn from_parameter(theta: &ParameterVector, pieces: usize) -> Result<Self> {
        let expected = 2 * pieces - 1;
        if theta.dim() != expected {
            return Err(Error::Domain(format!(
                "piecewise function with {pieces} pieces needs {expected} parameters, got {}",
                theta.dim()
            )));
        }
        let v = theta.values();
        Self::new(v[..pieces].to_vec(), v[pieces..].to_vec())
    }

    pub fn pieces(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[Real] {
        &self.coefficients
    }

    pub fn cutpoints(&self) -> &[Real] {
        &self.cutpoints
    }

    /// Index of the block containing `t` (blocks are closed on the left,
    /// the last block closed on both sides).
    pub fn block_index(&self, t: Real) -> usize {
        self.cutpoints.iter().take_while(|&&c| t >= c).count()
    }

    pub fn evaluate(&self, t: Real) -> Real {
        self.coefficients[self.block_index(t)]
    }
}

/// Discretized smoothing operator (Kv)(t) = integral of v(s) / (1 + (s-t)^2)^{3/2}
/// over [0,1], evaluated by the trapezoid rule on `m` source points.
#[derive(Debug, Clone)]
pub struct SmoothingKernelOperator {
    source: Vec<Real>,
    eval: Vec<Real>,
    /// kernel[t][s] already includes the quadrature weight for s.
    kernel: Vec<Vec<Real>>,
}

impl SmoothingKernelOperator {
    pub fn new(eval_grid: Vec<Real>, source_points: usize) -> Result<Self> {
        if eval_grid.len() < 2 || !eval_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("evaluation grid must be strictly increasing".into()));
        }
        if source_points < 2 {
            return Err(Error::Config("need at least two source points".into()));
        }
        let source = linspace(0.0, 1.0, source_points);
        let weights = trapezoid_weights(&source);
        let kernel = eval_grid
            .iter()
            .map(|&t| {
                source
                    .iter()
                    .zip(&weights)
                    .map(|(&s, &w)| {
                        let dz = s - t;
                        w / (1.0 + dz * dz).powf(1.5)
                    })
                    .collect()
            })
            .collect();
        Ok(Self { source, eval: eval_grid, kernel })
    }

    pub fn eval_grid(&self) -> &[Real] {
        &self.eval
    }

    pub fn source_grid(&self) -> &[Real] {
        &self.source
    }

    pub fn source_points(&self) -> usize {
        self.source.len()
    }

    /// Apply to a function sampled at the source grid.
    pub fn apply_samples(&self, v: &[Real]) -> Vec<Real> {
        self.kernel
            .iter()
            .map(|row| row.iter().zip(v).map(|(k, vi)| k * vi).sum())
            .collect()
    }

    pub fn apply_fn(&self, v: impl Fn(Real) -> Real) -> Vec<Real> {
        let samples: Vec<Real> = self.source.iter().map(|&s| v(s)).collect();
        self.apply_samples(&samples)
    }
}

/// K u(theta) on the evaluation grid; errors if theta does not encode a valid
/// piecewise constant function.
pub fn toy_forward(theta: &ParameterVector, op: &SmoothingKernelOperator, pieces: usize) -> Result<Vec<Real>> {
    let u = PiecewiseConstantFunction::from_parameter(theta, pieces)?;
    Ok(op.apply_fn(|s| u.evaluate(s)))
}

/// Forward model for the piecewise-constant Fredholm problem.
#[derive(Debug, Clone)]
pub struct ToyFredholmForward {
    op: SmoothingKernelOperator,
    pieces: usize,
}

impl ToyFredholmForward {
    pub fn new(op: SmoothingKernelOperator, pieces: usize) -> Self {
        Self { op, pieces }
    }

    pub fn operator(&self) -> &SmoothingKernelOperator {
        &self.op
    }

    pub fn pieces(&self) -> usize {
        self.pieces
    }
}

impl ForwardModel for ToyFredholmForward {
    fn output_dim(&self) -> usize {
        self.op.eval_grid().len()
    }

    fn apply(&self, theta: &ParameterVector) -> Result<Vec<Real>> {
        toy_forward(theta, &self.op, self.pieces)
    }

    fn mesh(&self) -> Option<Real> {
        Some(1.0 / (self.op.source_points() - 1) as Real)
    }
}
