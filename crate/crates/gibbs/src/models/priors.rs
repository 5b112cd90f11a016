use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Beta as BetaDist, Distribution, Gamma as GammaDist, Normal};
use statrs::function::gamma::ln_gamma;

use crate::core::{ParameterVector, PriorModel};
use crate::error::{Error, Result};
use crate::Real;

/// Gamma(shape, rate) prior on a single positive component.
#[derive(Debug, Clone)]
pub struct GammaPrior {
    shape: Real,
    rate: Real,
    sampler: GammaDist<Real>,
}

impl GammaPrior {
    pub fn new(shape: Real, rate: Real) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0) {
            return Err(Error::Config(format!("invalid Gamma({shape}, {rate}) hyperparameters")));
        }
        let sampler = GammaDist::new(shape, 1.0 / rate)
            .map_err(|e| Error::Config(format!("Gamma sampler: {e}")))?;
        Ok(Self { shape, rate, sampler })
    }

    pub fn log_density_scalar(&self, x: Real) -> Real {
        if x <= 0.0 {
            return Real::NEG_INFINITY;
        }
        self.shape * self.rate.ln() - ln_gamma(self.shape) + (self.shape - 1.0) * x.ln()
            - self.rate * x
    }
}

impl PriorModel for GammaPrior {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, theta: &ParameterVector) -> Real {
        self.log_density_scalar(theta.values()[0])
    }

    fn sample(&self, rng: &mut dyn RngCore) -> ParameterVector {
        ParameterVector::scalar(self.sampler.sample(rng)).expect("gamma draw is finite")
    }
}

/// Joint prior of k ordered Uniform[0,1] cutpoints: density k! on the ordered
/// region {0 < c_1 < ... < c_k < 1}, zero elsewhere.
#[derive(Debug, Clone)]
pub struct OrderedUniformPrior {
    k: usize,
    log_norm: Real,
}

impl OrderedUniformPrior {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("ordered uniform prior needs k >= 1".into()));
        }
        Ok(Self { k, log_norm: ln_gamma(k as Real + 1.0) })
    }
}

impl PriorModel for OrderedUniformPrior {
    fn dim(&self) -> usize {
        self.k
    }

    fn log_density(&self, theta: &ParameterVector) -> Real {
        let v = theta.values();
        let mut prev = 0.0;
        for &c in v {
            if !(c > prev && c < 1.0) {
                return Real::NEG_INFINITY;
            }
            prev = c;
        }
        self.log_norm
    }

    fn sample(&self, rng: &mut dyn RngCore) -> ParameterVector {
        let mut draws: Vec<Real> = (0..self.k).map(|_| rng.gen::<Real>()).collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ParameterVector::unnamed(draws).expect("uniform draws are finite")
    }
}

/// Beta(alpha, beta) translated and scaled to support [lo, hi].
#[derive(Debug, Clone)]
pub struct ScaledBetaPrior {
    alpha: Real,
    beta: Real,
    lo: Real,
    hi: Real,
    sampler: BetaDist<Real>,
}

impl ScaledBetaPrior {
    pub fn new(alpha: Real, beta: Real, lo: Real, hi: Real) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::Config(format!(
                "invalid scaled Beta({alpha}, {beta}) on [{lo}, {hi}]"
            )));
        }
        let sampler = BetaDist::new(alpha, beta)
            .map_err(|e| Error::Config(format!("Beta sampler: {e}")))?;
        Ok(Self { alpha, beta, lo, hi, sampler })
    }

    pub fn log_density_scalar(&self, x: Real) -> Real {
        let width = self.hi - self.lo;
        let u = (x - self.lo) / width;
        if !(0.0..=1.0).contains(&u) {
            return Real::NEG_INFINITY;
        }
        let log_beta_norm =
            ln_gamma(self.alpha + self.beta) - ln_gamma(self.alpha) - ln_gamma(self.beta);
        // u^{alpha-1} (1-u)^{beta-1}; 0^0 = 1 at the endpoints
        let term = |base: Real, exp: Real| -> Real {
            if exp == 0.0 {
                0.0
            } else {
                exp * base.ln()
            }
        };
        log_beta_norm + term(u, self.alpha - 1.0) + term(1.0 - u, self.beta - 1.0) - width.ln()
    }
}

impl PriorModel for ScaledBetaPrior {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, theta: &ParameterVector) -> Real {
        self.log_density_scalar(theta.values()[0])
    }

    fn sample(&self, rng: &mut dyn RngCore) -> ParameterVector {
        let u: Real = self.sampler.sample(rng);
        ParameterVector::scalar(self.lo + (self.hi - self.lo) * u).expect("beta draw is finite")
    }
}

/// Univariate Gaussian prior.
#[derive(Debug, Clone)]
pub struct GaussianPrior {
    mean: Real,
    sd: Real,
    sampler: Normal<Real>,
}

impl GaussianPrior {
    pub fn new(mean: Real, sd: Real) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
            return Err(Error::Config(format!("invalid Gaussian({mean}, {sd}) hyperparameters")));
        }
        let sampler = Normal::new(mean, sd).map_err(|e| Error::Config(format!("{e}")))?;
        Ok(Self { mean, sd, sampler })
    }

    pub fn log_density_scalar(&self, x: Real) -> Real {
        let z = (x - self.mean) / self.sd;
        -0.5 * z * z - self.sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }
}

impl PriorModel for GaussianPrior {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, theta: &ParameterVector) -> Real {
        self.log_density_scalar(theta.values()[0])
    }

    fn sample(&self, rng: &mut dyn RngCore) -> ParameterVector {
        ParameterVector::scalar(self.sampler.sample(rng)).expect("normal draw is finite")
    }
}

/// Independent product of component priors, concatenated in order, with
/// component names supplied by the caller.
pub struct BlockPrior {
    blocks: Vec<Box<dyn PriorModel>>,
    names: Arc<[String]>,
}

impl BlockPrior {
    pub fn new(blocks: Vec<Box<dyn PriorModel>>, names: Vec<String>) -> Result<Self> {
        let dim: usize = blocks.iter().map(|b| b.dim()).sum();
        if dim == 0 {
            return Err(Error::Config("block prior has dimension zero".into()));
        }
        if names.len() != dim {
            return Err(Error::Config(format!("{dim} components but {} names", names.len())));
        }
        Ok(Self { blocks, names: names.into() })
    }
}

impl PriorModel for BlockPrior {
    fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }

    fn log_density(&self, theta: &ParameterVector) -> Real {
        if theta.dim() != self.dim() {
            return Real::NEG_INFINITY;
        }
        let v = theta.values();
        let mut offset = 0;
        let mut total = 0.0;
        for block in &self.blocks {
            let sub = &v[offset..offset + block.dim()];
            let sub_theta = ParameterVector::unnamed(sub.to_vec()).expect("finite components");
            let ld = block.log_density(&sub_theta);
            if ld == Real::NEG_INFINITY {
                return Real::NEG_INFINITY;
            }
            total += ld;
            offset += block.dim();
        }
        total
    }

    fn sample(&self, rng: &mut dyn RngCore) -> ParameterVector {
        let mut values = Vec::with_capacity(self.dim());
        for block in &self.blocks {
            values.extend_from_slice(block.sample(rng).values());
        }
        ParameterVector::new(values, self.names.clone()).expect("block draws are finite")
    }

    fn names(&self) -> Vec<String> {
        self.names.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{linspace, trapezoid_weights};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Quadrature integral of exp(log_density) over [lo, hi].
    fn density_mass(f: impl Fn(Real) -> Real, lo: Real, hi: Real, n: usize) -> Real {
        let grid = linspace(lo, hi, n);
        let w = trapezoid_weights(&grid);
        grid.iter().zip(&w).map(|(&x, &wi)| wi * f(x).exp()).sum()
    }

    /// One-sample KS statistic against a numeric CDF built by quadrature.
    fn ks_statistic(samples: &mut [Real], f: impl Fn(Real) -> Real, lo: Real, hi: Real) -> Real {
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let grid = linspace(lo, hi, 8192);
        let w = trapezoid_weights(&grid);
        let mut cdf = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        for (x, wi) in grid.iter().zip(&w) {
            acc += wi * f(*x).exp();
            cdf.push(acc.min(1.0));
        }
        let eval_cdf = |x: Real| -> Real {
            match grid.binary_search_by(|g| g.partial_cmp(&x).unwrap()) {
                Ok(i) => cdf[i],
                Err(0) => 0.0,
                Err(i) if i >= grid.len() => 1.0,
                Err(i) => cdf[i - 1],
            }
        };
        let n = samples.len() as Real;
        samples
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let e_lo = i as Real / n;
                let e_hi = (i + 1) as Real / n;
                let c = eval_cdf(x);
                (c - e_lo).abs().max((c - e_hi).abs())
            })
            .fold(0.0, Real::max)
    }

    #[test]
    fn gamma_log_density_at_one() {
        // Gamma(2,1) density at 1 is 1 * e^{-1}
        let p = GammaPrior::new(2.0, 1.0).unwrap();
        assert!((p.log_density_scalar(1.0) - (-1.0)).abs() < 1e-12);
        assert_eq!(p.log_density_scalar(-0.5), Real::NEG_INFINITY);
    }

    #[test]
    fn gamma_density_integrates_to_one() {
        let p = GammaPrior::new(2.0, 1.0).unwrap();
        let mass = density_mass(|x| p.log_density_scalar(x), 1e-9, 60.0, 200_000);
        assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
    }

    #[test]
    fn ordered_uniform_density_value() {
        let p = OrderedUniformPrior::new(2).unwrap();
        let inside = ParameterVector::unnamed(vec![0.2, 0.7]).unwrap();
        let outside = ParameterVector::unnamed(vec![0.7, 0.2]).unwrap();
        assert!((p.log_density(&inside) - 2.0f64.ln()).abs() < 1e-12);
        assert_eq!(p.log_density(&outside), Real::NEG_INFINITY);
    }

    #[test]
    fn ordered_uniform_samples_in_support() {
        let p = OrderedUniformPrior::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let theta = p.sample(&mut rng);
            assert!(p.supports(&theta));
        }
    }

    #[test]
    fn scaled_beta_endpoint_densities() {
        // Beta(1,3) on [5, 95]: density 3/90 at the left endpoint, 0 at the right
        let p = ScaledBetaPrior::new(1.0, 3.0, 5.0, 95.0).unwrap();
        assert!((p.log_density_scalar(5.0) - (3.0 / 90.0f64).ln()).abs() < 1e-12);
        assert_eq!(p.log_density_scalar(95.0), Real::NEG_INFINITY);
        let mass = density_mass(|x| p.log_density_scalar(x), 5.0, 95.0, 100_000);
        assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
    }

    #[test]
    fn gaussian_density_integrates_to_one() {
        let p = GaussianPrior::new(0.3, 1.7).unwrap();
        let mass = density_mass(|x| p.log_density_scalar(x), -20.0, 20.0, 100_000);
        assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
    }

    #[test]
    fn samplers_match_densities_ks() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 10_000;

        let gamma = GammaPrior::new(2.0, 1.0).unwrap();
        let mut draws: Vec<Real> =
            (0..n).map(|_| gamma.sample(&mut rng).values()[0]).collect();
        let ks = ks_statistic(&mut draws, |x| gamma.log_density_scalar(x), 1e-9, 60.0);
        assert!(ks < 0.02, "gamma KS {ks}");

        let beta = ScaledBetaPrior::new(1.0, 3.0, 5.0, 95.0).unwrap();
        let mut draws: Vec<Real> = (0..n).map(|_| beta.sample(&mut rng).values()[0]).collect();
        let ks = ks_statistic(&mut draws, |x| beta.log_density_scalar(x), 5.0, 95.0);
        assert!(ks < 0.02, "beta KS {ks}");

        let normal = GaussianPrior::new(0.0, 1.0).unwrap();
        let mut draws: Vec<Real> =
            (0..n).map(|_| normal.sample(&mut rng).values()[0]).collect();
        let ks = ks_statistic(&mut draws, |x| normal.log_density_scalar(x), -10.0, 10.0);
        assert!(ks < 0.02, "gaussian KS {ks}");

        // ordered uniform, k = 2: marginal of c_1 is 2(1 - x) on [0, 1]
        let ordered = OrderedUniformPrior::new(2).unwrap();
        let mut draws: Vec<Real> =
            (0..n).map(|_| ordered.sample(&mut rng).values()[0]).collect();
        let ks = ks_statistic(&mut draws, |x| (2.0 * (1.0 - x)).ln(), 0.0, 1.0);
        assert!(ks < 0.02, "ordered uniform KS {ks}");
    }

    #[test]
    fn block_prior_concatenates() {
        let prior = BlockPrior::new(
            vec![
                Box::new(GammaPrior::new(2.0, 1.0).unwrap()),
                Box::new(OrderedUniformPrior::new(2).unwrap()),
            ],
            vec!["b_1".into(), "c_1".into(), "c_2".into()],
        )
        .unwrap();
        assert_eq!(prior.dim(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta = prior.sample(&mut rng);
        assert!(prior.supports(&theta));
        // product structure: joint log density is the sum of block densities
        let g = GammaPrior::new(2.0, 1.0).unwrap();
        let o = OrderedUniformPrior::new(2).unwrap();
        let v = theta.values();
        let expect = g.log_density_scalar(v[0])
            + o.log_density(&ParameterVector::unnamed(v[1..].to_vec()).unwrap());
        assert!((prior.log_density(&theta) - expect).abs() < 1e-12);
    }

    #[test]
    fn invalid_hyperparameters_are_config_errors() {
        assert!(GammaPrior::new(-1.0, 1.0).is_err());
        assert!(ScaledBetaPrior::new(1.0, 3.0, 4.0, 2.0).is_err());
        assert!(GaussianPrior::new(0.0, 0.0).is_err());
        assert!(OrderedUniformPrior::new(0).is_err());
    }
}
