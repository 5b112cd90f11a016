use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::core::{Dataset, DatasetMeta, ForwardModel, ParameterVector};
use crate::error::{Error, Result};
use crate::models::piecewise::{PiecewiseConstantFunction, SmoothingKernelOperator};
use crate::numeric::cholesky;
use crate::Real;

/// Observation noise specification. Multiplicative log-normal kinds always use
/// location -sigma^2/2 so the noise mean is exactly 1; the location is derived,
/// never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseSpec {
    /// y = F(truth) + sigma * z, z iid standard normal per grid point.
    AdditiveGaussian { sigma: Real, seed: u64 },
    /// One LogNormal(-sigma^2/2, sigma) coefficient per block of the truth,
    /// applied to u before the smoothing operator.
    MultiplicativeLognormalBlockwise { sigma: Real, seed: u64 },
    /// exp(g - sigma^2/2) with g a stationary Gaussian process over the grid
    /// (squared-exponential correlation), applied pointwise to the output curve.
    MultiplicativeLognormalSmooth {
        sigma: Real,
        correlation_length: Real,
        seed: u64,
    },
}

impl NoiseSpec {
    pub fn seed(&self) -> u64 {
        match *self {
            NoiseSpec::AdditiveGaussian { seed, .. }
            | NoiseSpec::MultiplicativeLognormalBlockwise { seed, .. }
            | NoiseSpec::MultiplicativeLognormalSmooth { seed, .. } => seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        match &mut s {
            NoiseSpec::AdditiveGaussian { seed: x, .. }
            | NoiseSpec::MultiplicativeLognormalBlockwise { seed: x, .. }
            | NoiseSpec::MultiplicativeLognormalSmooth { seed: x, .. } => *x = seed,
        }
        s
    }

    fn sigma(&self) -> Real {
        match *self {
            NoiseSpec::AdditiveGaussian { sigma, .. }
            | NoiseSpec::MultiplicativeLognormalBlockwise { sigma, .. }
            | NoiseSpec::MultiplicativeLognormalSmooth { sigma, .. } => sigma,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma() >= 0.0 && self.sigma().is_finite()) {
            return Err(Error::Config(format!("noise sigma must be >= 0, got {}", self.sigma())));
        }
        if let NoiseSpec::MultiplicativeLognormalSmooth { correlation_length, .. } = self {
            if !(*correlation_length > 0.0) {
                return Err(Error::Config("correlation length must be positive".into()));
            }
        }
        Ok(())
    }
}

/// One LogNormal(-sigma^2/2, sigma) draw; mean exactly 1 when sigma = 0.
fn lognormal_unit_mean(sigma: Real, rng: &mut dyn RngCore) -> Real {
    let z: Real = Normal::new(0.0, 1.0).unwrap().sample(rng);
    (sigma * z - 0.5 * sigma * sigma).exp()
}

/// Samples of a unit-mean log-normal field with squared-exponential
/// correlation over `grid`.
fn lognormal_smooth_field(
    grid: &[Real],
    sigma: Real,
    correlation_length: Real,
    rng: &mut dyn RngCore,
) -> Result<Vec<Real>> {
    let d = grid.len();
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let dz = (grid[i] - grid[j]) / correlation_length;
            cov[i * d + j] = sigma * sigma * (-0.5 * dz * dz).exp();
        }
        cov[i * d + i] += 1e-10; // jitter for the factorization
    }
    let l = cholesky(&cov, d)
        .ok_or_else(|| Error::Config("noise covariance is not positive definite".into()))?;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let z: Vec<Real> = (0..d).map(|_| normal.sample(rng)).collect();
    Ok((0..d)
        .map(|i| {
            let g: Real = (0..=i).map(|k| l[i * d + k] * z[k]).sum();
            (g - 0.5 * sigma * sigma).exp()
        })
        .collect())
}

/// Simulate n observations of the Fredholm toy problem: y = K(eps * u(truth)),
/// with blockwise noise defined on the truth's own blocks. Reproducible from
/// the noise seed.
pub fn simulate_toy_dataset(
    truth: &ParameterVector,
    noise: &NoiseSpec,
    n: usize,
    op: &SmoothingKernelOperator,
    pieces: usize,
) -> Result<Dataset> {
    noise.validate()?;
    if n == 0 {
        return Err(Error::Config("need n >= 1 observations".into()));
    }
    let u = PiecewiseConstantFunction::from_parameter(truth, pieces)?;
    let clean = op.apply_fn(|s| u.evaluate(s));
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed());
    let mut observations = Vec::with_capacity(n);
    for _ in 0..n {
        let y = match noise {
            NoiseSpec::AdditiveGaussian { sigma, .. } => {
                let normal = Normal::new(0.0, *sigma).map_err(|e| Error::Config(e.to_string()))?;
                clean.iter().map(|&v| v + normal.sample(&mut rng)).collect()
            }
            NoiseSpec::MultiplicativeLognormalBlockwise { sigma, .. } => {
                let eps: Vec<Real> = (0..pieces)
                    .map(|_| lognormal_unit_mean(*sigma, &mut rng))
                    .collect();
                op.apply_fn(|s| eps[u.block_index(s)] * u.evaluate(s))
            }
            NoiseSpec::MultiplicativeLognormalSmooth { sigma, correlation_length, .. } => {
                let field =
                    lognormal_smooth_field(op.eval_grid(), *sigma, *correlation_length, &mut rng)?;
                clean.iter().zip(&field).map(|(v, e)| v * e).collect()
            }
        };
        observations.push(y);
    }
    let meta = DatasetMeta {
        seed: Some(noise.seed()),
        noise: Some(serde_json::to_value(noise)?),
        truth: Some(truth.values().to_vec()),
    };
    Dataset::new(observations, op.eval_grid().to_vec(), meta)
}

/// Simulate n observations from an arbitrary forward model on `grid`.
/// Blockwise noise is specific to the piecewise toy problem and rejected here.
pub fn simulate_forward_dataset(
    forward: &dyn ForwardModel,
    truth: &ParameterVector,
    noise: &NoiseSpec,
    n: usize,
    grid: &[Real],
) -> Result<Dataset> {
    noise.validate()?;
    if n == 0 {
        return Err(Error::Config("need n >= 1 observations".into()));
    }
    if grid.len() != forward.output_dim() {
        return Err(Error::Config("grid length must match forward output dimension".into()));
    }
    let clean = forward.apply(truth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed());
    let mut observations = Vec::with_capacity(n);
    for _ in 0..n {
        let y: Vec<Real> = match noise {
            NoiseSpec::AdditiveGaussian { sigma, .. } => {
                let normal = Normal::new(0.0, *sigma).map_err(|e| Error::Config(e.to_string()))?;
                clean.iter().map(|&v| v + normal.sample(&mut rng)).collect()
            }
            NoiseSpec::MultiplicativeLognormalBlockwise { .. } => {
                return Err(Error::Config(
                    "blockwise noise requires the piecewise toy simulator".into(),
                ));
            }
            NoiseSpec::MultiplicativeLognormalSmooth { sigma, correlation_length, .. } => {
                let field = lognormal_smooth_field(grid, *sigma, *correlation_length, &mut rng)?;
                clean.iter().zip(&field).map(|(v, e)| v * e).collect()
            }
        };
        observations.push(y);
    }
    let meta = DatasetMeta {
        seed: Some(noise.seed()),
        noise: Some(serde_json::to_value(noise)?),
        truth: Some(truth.values().to_vec()),
    };
    Dataset::new(observations, grid.to_vec(), meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::piecewise::toy_forward;
    use crate::numeric::{linspace, mean};

    fn op() -> SmoothingKernelOperator {
        SmoothingKernelOperator::new(linspace(0.0, 1.0, 20), 100).unwrap()
    }

    fn truth() -> ParameterVector {
        ParameterVector::unnamed(vec![4.0, 4.0, 0.5]).unwrap()
    }

    #[test]
    fn zero_noise_collapses_to_forward() {
        let noise = NoiseSpec::MultiplicativeLognormalBlockwise { sigma: 0.0, seed: 1 };
        let ds = simulate_toy_dataset(&truth(), &noise, 3, &op(), 2).unwrap();
        let clean = toy_forward(&truth(), &op(), 2).unwrap();
        for y in ds.observations() {
            for (a, b) in y.iter().zip(&clean) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn same_seed_bit_identical() {
        let noise = NoiseSpec::MultiplicativeLognormalBlockwise { sigma: 1.0, seed: 42 };
        let a = simulate_toy_dataset(&truth(), &noise, 5, &op(), 2).unwrap();
        let b = simulate_toy_dataset(&truth(), &noise, 5, &op(), 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lognormal_unit_mean_monte_carlo() {
        // E[LogNormal(-0.5, 1)] = 1: sample mean over 1e5 draws in [0.99, 1.01]
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws: Vec<Real> = (0..100_000).map(|_| lognormal_unit_mean(1.0, &mut rng)).collect();
        let m = mean(&draws);
        assert!((0.99..=1.01).contains(&m), "mean {m}");
    }

    #[test]
    fn blockwise_noise_has_unit_mean_curves() {
        // empirical mean of many curves approaches K u(truth)
        let noise = NoiseSpec::MultiplicativeLognormalBlockwise { sigma: 1.0, seed: 3 };
        let n = 4000;
        let ds = simulate_toy_dataset(&truth(), &noise, n, &op(), 2).unwrap();
        let clean = toy_forward(&truth(), &op(), 2).unwrap();
        for k in [0usize, 10, 19] {
            let col: Vec<Real> = ds.observations().iter().map(|y| y[k]).collect();
            let m = mean(&col);
            let se = (crate::numeric::sample_variance(&col) / n as Real).sqrt();
            assert!(
                (m - clean[k]).abs() < 3.5 * se,
                "grid point {k}: mean {m}, clean {}, se {se}",
                clean[k]
            );
        }
    }

    #[test]
    fn smooth_field_unit_mean() {
        let grid = linspace(0.0, 1.0, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut acc = vec![0.0; 30];
        let reps = 20_000;
        for _ in 0..reps {
            let f = lognormal_smooth_field(&grid, 0.5, 0.2, &mut rng).unwrap();
            for (a, v) in acc.iter_mut().zip(&f) {
                *a += v;
            }
        }
        for a in &acc {
            let m = a / reps as Real;
            assert!((m - 1.0).abs() < 0.02, "field mean {m}");
        }
    }

    #[test]
    fn generic_simulator_rejects_blockwise() {
        let fwd = crate::core::IdentityForward::new(2);
        let theta = ParameterVector::unnamed(vec![1.0, 2.0]).unwrap();
        let noise = NoiseSpec::MultiplicativeLognormalBlockwise { sigma: 0.5, seed: 0 };
        assert!(simulate_forward_dataset(&fwd, &theta, &noise, 2, &[0.0, 1.0]).is_err());
    }
}
