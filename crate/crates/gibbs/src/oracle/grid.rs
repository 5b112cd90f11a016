use serde::{Deserialize, Serialize};

use crate::core::{Dataset, LossModel, ParameterVector, PriorModel};
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, trapezoid_weights};
use crate::Real;

/// Default grid resolution per dimension for quadrature oracles.
pub const DEFAULT_GRID_POINTS: usize = 4096;

/// Relative boundary density above which the grid is considered to truncate
/// the target's support (coverage failure).
const BOUNDARY_TOLERANCE: Real = 1e-10;

/// A brute-force posterior on a 1-D or 2-D tensor grid: normalized
/// log-density values plus the log partition function of the unnormalized
/// input. This is the independent oracle SMC output is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPosterior {
    /// One axis per parameter dimension (1 or 2).
    axes: Vec<Vec<Real>>,
    /// Normalized log-density at each grid point, row-major over axes.
    log_density: Vec<Real>,
    /// Tensor-product trapezoid weight per grid point.
    quad_weights: Vec<Real>,
    /// log Z of the unnormalized input density.
    log_z: Real,
}

impl GridPosterior {
    /// Build from unnormalized log-density values on the tensor grid.
    pub fn from_log_density(axes: Vec<Vec<Real>>, log_values: Vec<Real>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::Config("grid posterior supports 1 or 2 dimensions".into()));
        }
        for axis in &axes {
            if axis.len() < 2 || axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Config("grid axes must be strictly increasing".into()));
            }
        }
        let total: usize = axes.iter().map(|a| a.len()).product();
        if log_values.len() != total {
            return Err(Error::Config(format!(
                "expected {total} grid values, got {}",
                log_values.len()
            )));
        }
        let per_axis: Vec<Vec<Real>> = axes.iter().map(|a| trapezoid_weights(a)).collect();
        let quad_weights: Vec<Real> = if axes.len() == 1 {
            per_axis[0].clone()
        } else {
            let (wa, wb) = (&per_axis[0], &per_axis[1]);
            wa.iter().flat_map(|&x| wb.iter().map(move |&y| x * y)).collect()
        };
        let weighted: Vec<Real> = log_values
            .iter()
            .zip(&quad_weights)
            .map(|(&lv, &w)| lv + w.ln())
            .collect();
        let log_z = log_sum_exp(&weighted);
        if !log_z.is_finite() {
            return Err(Error::Numerical {
                msg: "grid posterior has zero or non-finite total mass".into(),
                theta: Vec::new(),
            });
        }
        let log_density: Vec<Real> = log_values.iter().map(|&lv| lv - log_z).collect();
        Ok(Self { axes, log_density, quad_weights, log_z })
    }

    pub fn axes(&self) -> &[Vec<Real>] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn log_z(&self) -> Real {
        self.log_z
    }

    pub fn log_density(&self) -> &[Real] {
        &self.log_density
    }

    pub fn quad_weights(&self) -> &[Real] {
        &self.quad_weights
    }

    /// Normalized density values (linear scale).
    pub fn density(&self) -> Vec<Real> {
        self.log_density.iter().map(|l| l.exp()).collect()
    }

    /// Total mass under the grid's own quadrature; 1 by construction up to
    /// rounding.
    pub fn mass(&self) -> Real {
        self.log_density
            .iter()
            .zip(&self.quad_weights)
            .map(|(l, w)| w * l.exp())
            .sum()
    }

    /// Expectation of g(theta) under the posterior.
    pub fn expectation(&self, g: impl Fn(&[Real]) -> Real) -> Real {
        let mut acc = 0.0;
        self.for_each_point(|point, k| {
            acc += self.quad_weights[k] * self.log_density[k].exp() * g(point);
        });
        acc
    }

    /// Posterior mean per dimension.
    pub fn mean(&self) -> Vec<Real> {
        (0..self.dim())
            .map(|d| self.expectation(|p| p[d]))
            .collect()
    }

    /// Posterior variance per dimension.
    pub fn variance(&self) -> Vec<Real> {
        let mean = self.mean();
        (0..self.dim())
            .map(|d| self.expectation(|p| (p[d] - mean[d]) * (p[d] - mean[d])))
            .collect()
    }

    /// Mass of the set {theta : |theta_d - center| > radius} (1-D only).
    pub fn mass_outside(&self, center: Real, radius: Real) -> Result<Real> {
        if self.dim() != 1 {
            return Err(Error::Config("mass_outside is 1-D only".into()));
        }
        Ok(self.expectation(|p| if (p[0] - center).abs() > radius { 1.0 } else { 0.0 }))
    }

    fn for_each_point(&self, mut f: impl FnMut(&[Real], usize)) {
        match self.axes.len() {
            1 => {
                for (k, &x) in self.axes[0].iter().enumerate() {
                    f(&[x], k);
                }
            }
            _ => {
                let nb = self.axes[1].len();
                for (i, &x) in self.axes[0].iter().enumerate() {
                    for (j, &y) in self.axes[1].iter().enumerate() {
                        f(&[x, y], i * nb + j);
                    }
                }
            }
        }
    }

    /// Check that the unnormalized density is negligible at the grid
    /// boundary relative to its maximum (truncation-coverage guard).
    fn check_coverage(&self) -> Result<()> {
        let max = self.log_density.iter().cloned().fold(Real::NEG_INFINITY, Real::max);
        let mut worst = Real::NEG_INFINITY;
        match self.axes.len() {
            1 => {
                let n = self.axes[0].len();
                worst = self.log_density[0].max(self.log_density[n - 1]);
            }
            _ => {
                let (na, nb) = (self.axes[0].len(), self.axes[1].len());
                self.for_each_point(|_, k| {
                    let i = k / nb;
                    let j = k % nb;
                    if i == 0 || i == na - 1 || j == 0 || j == nb - 1 {
                        worst = worst.max(self.log_density[k]);
                    }
                });
            }
        }
        if worst - max > BOUNDARY_TOLERANCE.ln() {
            return Err(Error::Coverage { mass: (worst - max).exp() });
        }
        Ok(())
    }
}

/// The exact (to quadrature tolerance) Gibbs posterior
/// rho-hat_n^W proportional to exp(-W sum_i L(theta, y_i)) rho_0(theta) on a
/// tensor grid. `held_out` excludes one datum (the LOO posterior) when set.
pub fn quadrature_posterior_held_out(
    loss: &LossModel,
    prior: &dyn PriorModel,
    data: &Dataset,
    w: Real,
    axes: Vec<Vec<Real>>,
    held_out: Option<usize>,
) -> Result<GridPosterior> {
    if w < 0.0 {
        return Err(Error::Config(format!("W must be >= 0, got {w}")));
    }
    if axes.len() != prior.dim() {
        return Err(Error::Config("grid dimension must match the prior dimension".into()));
    }
    let points: Vec<Vec<Real>> = match axes.len() {
        1 => axes[0].iter().map(|&x| vec![x]).collect(),
        2 => axes[0]
            .iter()
            .flat_map(|&x| axes[1].iter().map(move |&y| vec![x, y]))
            .collect(),
        _ => return Err(Error::Config("quadrature posterior supports p <= 2".into())),
    };
    let mut log_values = Vec::with_capacity(points.len());
    for p in points {
        let theta = ParameterVector::unnamed(p)?;
        let lp = prior.log_density(&theta);
        if lp == Real::NEG_INFINITY {
            log_values.push(Real::NEG_INFINITY);
            continue;
        }
        let losses = loss.losses(&theta, data)?;
        let total: Real = losses
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != held_out)
            .map(|(_, l)| l)
            .sum();
        log_values.push(lp - w * total);
    }
    let post = GridPosterior::from_log_density(axes, log_values)?;
    post.check_coverage()?;
    Ok(post)
}

/// Full-data quadrature Gibbs posterior.
pub fn quadrature_posterior(
    loss: &LossModel,
    prior: &dyn PriorModel,
    data: &Dataset,
    w: Real,
    axes: Vec<Vec<Real>>,
) -> Result<GridPosterior> {
    quadrature_posterior_held_out(loss, prior, data, w, axes, None)
}

/// Mixture quadrature density rho_mix^W on a 1-D grid (oracle for the SMC
/// targets).
pub fn quadrature_mixture(
    loss: &LossModel,
    prior: &dyn PriorModel,
    data: &Dataset,
    w: Real,
    axis: Vec<Real>,
) -> Result<GridPosterior> {
    if w < 0.0 {
        return Err(Error::Config(format!("W must be >= 0, got {w}")));
    }
    let mut log_values = Vec::with_capacity(axis.len());
    for &x in &axis {
        let theta = ParameterVector::scalar(x)?;
        let lp = prior.log_density(&theta);
        if lp == Real::NEG_INFINITY {
            log_values.push(Real::NEG_INFINITY);
            continue;
        }
        let losses = loss.losses(&theta, data)?;
        log_values.push(lp + crate::smc::mixture::log_mixture_term(&losses, w));
    }
    let post = GridPosterior::from_log_density(vec![axis], log_values)?;
    post.check_coverage()?;
    Ok(post)
}

/// Brute-force LOOCV risk R_CV(W): the average over i of the expectation of
/// L(theta, y_i) under the n leave-one-out quadrature posteriors.
pub fn quadrature_r_cv(
    loss: &LossModel,
    prior: &dyn PriorModel,
    data: &Dataset,
    w: Real,
    axis: Vec<Real>,
) -> Result<Real> {
    let n = data.len();
    let mut total = 0.0;
    for i in 0..n {
        let post = quadrature_posterior_held_out(
            loss,
            prior,
            data,
            w,
            vec![axis.clone()],
            Some(i),
        )?;
        let y = data.observation(i).to_vec();
        total += post.expectation(|p| {
            let theta = ParameterVector::scalar(p[0]).unwrap();
            loss.evaluate(&theta, &y).unwrap()
        });
    }
    Ok(total / n as Real)
}

/// Brute-force predictive criterion P_CV: the average over i of
/// log Z-tilde - log E_{rho_(-i)}[exp(-L(theta, y_i))].
pub fn quadrature_p_cv(
    loss: &LossModel,
    prior: &dyn PriorModel,
    data: &Dataset,
    w: Real,
    axis: Vec<Real>,
) -> Result<Real> {
    let n = data.len();
    let d = data.dim();
    let log_z = loss.log_partition(d)?;
    let mut total = 0.0;
    for i in 0..n {
        let post = quadrature_posterior_held_out(
            loss,
            prior,
            data,
            w,
            vec![axis.clone()],
            Some(i),
        )?;
        let y = data.observation(i).to_vec();
        let kernel_mean = post.expectation(|p| {
            let theta = ParameterVector::scalar(p[0]).unwrap();
            (-loss.evaluate(&theta, &y).unwrap()).exp()
        });
        total += log_z - kernel_mean.ln();
    }
    Ok(total / n as Real)
}

/// Gibbs predictive density at y under a 1-D quadrature posterior:
/// E[exp(-L(theta, y))] / Z-tilde.
pub fn quadrature_predictive_log_density(
    post: &GridPosterior,
    loss: &LossModel,
    y: &[Real],
) -> Result<Real> {
    let log_z = loss.log_partition(y.len())?;
    let kernel_mean = post.expectation(|p| {
        let theta = ParameterVector::unnamed(p.to_vec()).unwrap();
        (-loss.evaluate(&theta, y).unwrap()).exp()
    });
    Ok(kernel_mean.ln() - log_z)
}
