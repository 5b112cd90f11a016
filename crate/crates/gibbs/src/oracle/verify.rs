//! Numerical verification suites for the stability, approximation,
//! consistency, and predictive-convergence theorems, plus the divergence
//! inequality chain and SMC-vs-quadrature equivalence.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calib::{estimate_r_cv, SelectionRule};
use crate::core::{Dataset, DatasetMeta, IdentityForward, LossModel, PriorModel, ResidualForm};
use crate::error::Result;
use crate::models::{GammaPrior, GaussianPrior, ToyFredholmForward, SmoothingKernelOperator};
use crate::numeric::linspace;
use crate::oracle::divergence::{divergences, Divergences};
use crate::oracle::grid::{
    quadrature_p_cv, quadrature_posterior, quadrature_r_cv, GridPosterior, DEFAULT_GRID_POINTS,
};
use crate::predictive::estimate_p_cv;
use crate::smc::{
    derive_rng, run_calibration_filter, run_full_posterior_filter, FilterConfig, WGrid,
};
use crate::Real;

/// The 1-D Gaussian conjugate verification problem: prior N(0,1),
/// L = (theta - y)^2, identity forward.
pub fn conjugate_problem(values: &[Real]) -> (Dataset, LossModel, GaussianPrior) {
    let data = Dataset::new(
        values.iter().map(|&v| vec![v]).collect(),
        vec![0.0],
        DatasetMeta::default(),
    )
    .expect("static conjugate data is valid");
    let loss = LossModel::new(
        Arc::new(IdentityForward::new(1)),
        ResidualForm::SquaredL2,
        1.0,
    )
    .expect("unit scale is valid");
    (data, loss, GaussianPrior::new(0.0, 1.0).expect("valid prior"))
}

fn conjugate_axis() -> Vec<Real> {
    linspace(-14.0, 14.0, DEFAULT_GRID_POINTS)
}

// ---------------------------------------------------------------------------
// Stability (data perturbations, plus W-continuity)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub delta: Real,
    pub kl: Real,
    pub hellinger: Real,
    pub tv: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Rows in decreasing delta order, ending with delta = 0.
    pub rows: Vec<StabilityRow>,
    /// OLS slope of log KL against log delta over the nonzero deltas.
    pub rate_exponent: Real,
    /// KL(delta) / KL(delta/2) for consecutive schedule entries.
    pub halving_ratios: Vec<Real>,
    /// (W' - W, Hellinger distance) rows for the W-continuity companion,
    /// in decreasing |W' - W| order ending at 0.
    pub w_rows: Vec<(Real, Real)>,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        let nonzero: Vec<&StabilityRow> =
            self.rows.iter().filter(|r| r.delta > 0.0).collect();
        let zero_ok = self
            .rows
            .iter()
            .filter(|r| r.delta == 0.0)
            .all(|r| r.kl < 1e-10 && r.hellinger < 1e-10 && r.tv < 1e-10);
        let decreasing = nonzero.windows(2).all(|w| w[1].kl < w[0].kl);
        let hellinger_bounded = self.rows.iter().all(|r| r.hellinger <= 1.0);
        let rate_ok = (1.5..=2.5).contains(&self.rate_exponent);
        let ratios_ok = self.halving_ratios.iter().all(|r| (2.5..=6.0).contains(r));
        let w_ok = self.w_rows.windows(2).all(|w| w[1].1 <= w[0].1)
            && self.w_rows.last().map(|r| r.1 < 1e-10).unwrap_or(false);
        zero_ok && decreasing && hellinger_bounded && rate_ok && ratios_ok && w_ok
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("delta,KL,hellinger,TV\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.delta, r.kl, r.hellinger, r.tv));
        }
        out
    }
}

/// Perturb the conjugate problem's datum by each delta in the schedule and
/// measure the divergences between the quadrature posteriors, then sweep
/// W' -> W for the continuity companion.
pub fn verify_stability(deltas: &[Real]) -> Result<StabilityReport> {
    let w = 0.5;
    let axis = conjugate_axis();
    let (base_data, loss, prior) = conjugate_problem(&[1.0]);
    let base = quadrature_posterior(&loss, &prior, &base_data, w, vec![axis.clone()])?;

    let mut rows = Vec::new();
    let mut schedule: Vec<Real> = deltas.to_vec();
    schedule.sort_by(|a, b| b.partial_cmp(a).unwrap());
    schedule.push(0.0);
    for &delta in &schedule {
        let (data, _, _) = conjugate_problem(&[1.0 + delta]);
        let perturbed = quadrature_posterior(&loss, &prior, &data, w, vec![axis.clone()])?;
        let d = divergences(&base, &perturbed)?;
        rows.push(StabilityRow { delta, kl: d.kl_pq, hellinger: d.hellinger, tv: d.tv });
    }

    let nonzero: Vec<&StabilityRow> = rows.iter().filter(|r| r.delta > 0.0).collect();
    let xs: Vec<Real> = nonzero.iter().map(|r| r.delta.ln()).collect();
    let ys: Vec<Real> = nonzero.iter().map(|r| r.kl.ln()).collect();
    let rate_exponent = ols_slope(&xs, &ys);
    let halving_ratios: Vec<Real> =
        nonzero.windows(2).map(|p| p[0].kl / p[1].kl).collect();

    let mut w_rows = Vec::new();
    for &dw in &[0.2, 0.1, 0.05, 0.025, 0.0] {
        let shifted =
            quadrature_posterior(&loss, &prior, &base_data, w + dw, vec![axis.clone()])?;
        let d = divergences(&base, &shifted)?;
        w_rows.push((dw, d.hellinger));
    }

    Ok(StabilityReport { rows, rate_exponent, halving_ratios, w_rows })
}

fn ols_slope(xs: &[Real], ys: &[Real]) -> Real {
    let n = xs.len() as Real;
    let mx = xs.iter().sum::<Real>() / n;
    let my = ys.iter().sum::<Real>() / n;
    let sxy: Real = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: Real = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

// ---------------------------------------------------------------------------
// Finite mesh approximation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproximationRow {
    pub source_points: usize,
    pub mesh: Real,
    pub kl: Real,
    pub hellinger: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationReport {
    /// Coarse-to-fine mesh rows, ending with the reference mesh itself.
    pub rows: Vec<ApproximationRow>,
    pub reference_points: usize,
}

impl ApproximationReport {
    pub fn passed(&self) -> bool {
        let (non_ref, reference): (Vec<&ApproximationRow>, Vec<&ApproximationRow>) = self
            .rows
            .iter()
            .partition(|r| r.source_points != self.reference_points);
        let decreasing = non_ref.windows(2).all(|w| w[1].kl < w[0].kl);
        let vanishes = reference.iter().all(|r| r.kl < 1e-10 && r.hellinger < 1e-10);
        // the bound form sqrt(1 - exp(-x)) must stay in [0,1] and increase in
        // its argument along the fitted KL curve
        let bound: Vec<Real> =
            self.rows.iter().map(|r| (1.0 - (-r.kl).exp()).max(0.0).sqrt()).collect();
        let bound_ok = bound.iter().all(|b| (0.0..=1.0).contains(b))
            && non_ref
                .windows(2)
                .all(|w| {
                    let f = |kl: Real| (1.0 - (-kl).exp()).max(0.0).sqrt();
                    f(w[1].kl) <= f(w[0].kl)
                });
        decreasing && vanishes && bound_ok
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("source_points,mesh,KL,hellinger\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.source_points, r.mesh, r.kl, r.hellinger));
        }
        out
    }
}

/// One-coefficient Fredholm problem: compare posteriors built with coarse
/// kernel discretizations against an m = `reference` oracle.
pub fn verify_finite_approximation(meshes: &[usize], reference: usize) -> Result<ApproximationReport> {
    let d = 20;
    let eval_grid = linspace(0.0, 1.0, d);
    let b_true = 2.0;
    let sigma = 0.05;
    let n = 5;
    let w = 0.5;

    // data from the reference forward plus seeded Gaussian noise
    let ref_forward = ToyFredholmForward::new(
        SmoothingKernelOperator::new(eval_grid.clone(), reference)?,
        1,
    );
    let truth = crate::core::ParameterVector::unnamed(vec![b_true])?;
    let clean = crate::core::ForwardModel::apply(&ref_forward, &truth)?;
    let mut rng = derive_rng(7_000, 0, 0);
    let observations: Vec<Vec<Real>> = (0..n)
        .map(|_| {
            clean
                .iter()
                .map(|&v| {
                    let z: Real = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                    v + sigma * z
                })
                .collect()
        })
        .collect();
    let data = Dataset::new(observations, eval_grid.clone(), DatasetMeta::default())?;

    let prior = GammaPrior::new(2.0, 1.0)?;
    let axis = linspace(1e-9, 10.0, 2048);
    let posterior_at = |m: usize| -> Result<GridPosterior> {
        let forward = ToyFredholmForward::new(
            SmoothingKernelOperator::new(eval_grid.clone(), m)?,
            1,
        );
        let loss = LossModel::new(Arc::new(forward), ResidualForm::SquaredL2, 1.0)?;
        quadrature_posterior(&loss, &prior, &data, w, vec![axis.clone()])
    };

    let reference_post = posterior_at(reference)?;
    let mut rows = Vec::new();
    let mut schedule = meshes.to_vec();
    schedule.sort_unstable();
    schedule.push(reference);
    for m in schedule {
        let post = posterior_at(m)?;
        let dv = divergences(&reference_post, &post)?;
        rows.push(ApproximationRow {
            source_points: m,
            mesh: 1.0 / (m - 1) as Real,
            kl: dv.kl_pq,
            hellinger: dv.hellinger,
        });
    }
    Ok(ApproximationReport { rows, reference_points: reference })
}

// ---------------------------------------------------------------------------
// Consistency (well-specified + misspecified companion)
// ---------------------------------------------------------------------------

/// Constants for the 1-D consistency toy: theta* = 1/2, Gaussian noise
/// sigma = 0.3, loss (theta - y)^2 scaled by 1/(2 sigma^2), fixed W = 1/4,
/// prior N(0, 4).
pub const CONSISTENCY_THETA_STAR: Real = 0.5;
pub const CONSISTENCY_SIGMA: Real = 0.3;
pub const CONSISTENCY_W: Real = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub n: usize,
    pub mass_outside: Real,
    pub posterior_mean: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub epsilon: Real,
    /// Well-specified rows, n increasing, starting at n = 0 (prior only).
    pub rows: Vec<ConsistencyRow>,
    /// Misspecified companion (Laplace noise, squared loss): concentration
    /// target located by brute-force risk minimization.
    pub misspecified_theta_star: Real,
    pub misspecified_rows: Vec<ConsistencyRow>,
}

impl ConsistencyReport {
    pub fn passed(&self) -> bool {
        let decreasing = self.rows.windows(2).all(|w| w[1].mass_outside < w[0].mass_outside);
        let final_ok = self.rows.last().map(|r| r.mass_outside < 0.01).unwrap_or(false);
        let mis_decreasing = self
            .misspecified_rows
            .windows(2)
            .all(|w| w[1].mass_outside < w[0].mass_outside);
        let mis_final =
            self.misspecified_rows.last().map(|r| r.mass_outside < 0.01).unwrap_or(false);
        decreasing && final_ok && mis_decreasing && mis_final
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("case,n,mass_outside,posterior_mean\n");
        for r in &self.rows {
            out.push_str(&format!("well_specified,{},{},{}\n", r.n, r.mass_outside, r.posterior_mean));
        }
        for r in &self.misspecified_rows {
            out.push_str(&format!("misspecified,{},{},{}\n", r.n, r.mass_outside, r.posterior_mean));
        }
        out
    }
}

fn consistency_loss() -> LossModel {
    let scale = 1.0 / (2.0 * CONSISTENCY_SIGMA * CONSISTENCY_SIGMA);
    LossModel::new(Arc::new(IdentityForward::new(1)), ResidualForm::SquaredL2, scale)
        .expect("valid scale")
}

fn consistency_prior() -> GaussianPrior {
    GaussianPrior::new(0.0, 4.0).expect("valid prior")
}

fn consistency_axis() -> Vec<Real> {
    linspace(-16.0, 16.0, 2 * DEFAULT_GRID_POINTS)
}

fn gaussian_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = derive_rng(seed, n as u64, 0);
    let obs: Vec<Vec<Real>> = (0..n)
        .map(|_| {
            let z: Real = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
            vec![CONSISTENCY_THETA_STAR + CONSISTENCY_SIGMA * z]
        })
        .collect();
    Dataset::new(obs, vec![0.0], DatasetMeta::default()).expect("valid dataset")
}

fn laplace_sample(rng: &mut impl rand::Rng, location: Real, scale: Real) -> Real {
    let u: Real = rng.gen::<Real>() - 0.5;
    location - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

fn laplace_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = derive_rng(seed, n as u64, 1);
    let obs: Vec<Vec<Real>> = (0..n)
        .map(|_| vec![laplace_sample(&mut rng, CONSISTENCY_THETA_STAR, CONSISTENCY_SIGMA)])
        .collect();
    Dataset::new(obs, vec![0.0], DatasetMeta::default()).expect("valid dataset")
}

/// Well-specified quadrature posterior for the consistency toy at sample
/// size n (n = 0 gives the prior).
pub fn consistency_posterior(n: usize, seed: u64) -> Result<GridPosterior> {
    let loss = consistency_loss();
    let prior = consistency_prior();
    let axis = consistency_axis();
    if n == 0 {
        let vals: Vec<Real> = axis
            .iter()
            .map(|&x| prior.log_density(&crate::core::ParameterVector::scalar(x).unwrap()))
            .collect();
        return GridPosterior::from_log_density(vec![axis], vals);
    }
    let data = gaussian_dataset(n, seed);
    quadrature_posterior(&loss, &prior, &data, CONSISTENCY_W, vec![axis])
}

/// Posterior mass outside the epsilon-ball around theta* over the n schedule,
/// plus the misspecified (Laplace-noise) companion.
pub fn verify_consistency(ns: &[usize], epsilon: Real, seed: u64) -> Result<ConsistencyReport> {
    let loss = consistency_loss();
    let prior = consistency_prior();
    let axis = consistency_axis();

    let mut rows = Vec::new();
    let mut schedule = vec![0];
    schedule.extend(ns.iter().copied());
    for n in schedule {
        let post = consistency_posterior(n, seed)?;
        rows.push(ConsistencyRow {
            n,
            mass_outside: post.mass_outside(CONSISTENCY_THETA_STAR, epsilon)?,
            posterior_mean: post.mean()[0],
        });
    }

    // misspecified target: brute-force minimizer of the Monte Carlo risk
    let mut rng = derive_rng(seed, 0, 2);
    let draws: Vec<Real> = (0..100_000)
        .map(|_| laplace_sample(&mut rng, CONSISTENCY_THETA_STAR, CONSISTENCY_SIGMA))
        .collect();
    let theta_grid = linspace(0.0, 1.0, 2001);
    let (mut best_theta, mut best_risk) = (0.0, Real::INFINITY);
    for &t in &theta_grid {
        let risk: Real =
            draws.iter().map(|&y| (t - y) * (t - y)).sum::<Real>() / draws.len() as Real;
        if risk < best_risk {
            best_risk = risk;
            best_theta = t;
        }
    }

    let mut misspecified_rows = Vec::new();
    for &n in ns {
        let data = laplace_dataset(n, seed);
        let post = quadrature_posterior(&loss, &prior, &data, CONSISTENCY_W, vec![axis.clone()])?;
        misspecified_rows.push(ConsistencyRow {
            n,
            mass_outside: post.mass_outside(best_theta, epsilon)?,
            posterior_mean: post.mean()[0],
        });
    }

    Ok(ConsistencyReport {
        epsilon,
        rows,
        misspecified_theta_star: best_theta,
        misspecified_rows,
    })
}

// ---------------------------------------------------------------------------
// Predictive convergence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveGapRow {
    pub n: usize,
    /// Delta_n = KL(P || p-hat_n) - KL(P || p-tilde_theta*), by Monte Carlo.
    pub gap: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveConvergenceReport {
    pub rows: Vec<PredictiveGapRow>,
    /// KL(P || p-tilde_theta*) under the misspecified (Laplace) truth: must
    /// be strictly positive (the plug-in predictive is not P).
    pub misspecified_plugin_kl: Real,
}

impl PredictiveConvergenceReport {
    pub fn passed(&self) -> bool {
        let decreasing = self.rows.windows(2).all(|w| w[1].gap < w[0].gap);
        let final_ok = self.rows.last().map(|r| r.gap.abs() < 0.02).unwrap_or(false);
        decreasing && final_ok && self.misspecified_plugin_kl > 0.0
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("n,gap\n");
        for r in &self.rows {
            out.push_str(&format!("{},{}\n", r.n, r.gap));
        }
        out
    }
}

/// Monte Carlo estimate of the predictive KL gap over the n schedule. The
/// plug-in predictive p-tilde at theta* equals the true density N(theta*,
/// sigma^2) here, so the gap is KL(P || p-hat_n) itself; common random
/// numbers are used across n.
pub fn verify_predictive_convergence(ns: &[usize], seed: u64) -> Result<PredictiveConvergenceReport> {
    let scale = 1.0 / (2.0 * CONSISTENCY_SIGMA * CONSISTENCY_SIGMA);
    let draws = 10_000;
    let mut rng = derive_rng(seed, 0, 3);
    let y_new: Vec<Real> = (0..draws)
        .map(|_| {
            let z: Real = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
            CONSISTENCY_THETA_STAR + CONSISTENCY_SIGMA * z
        })
        .collect();
    // log Z-tilde of the scaled squared loss in d = 1
    let log_z = 0.5 * (std::f64::consts::PI / scale).ln();

    let mut rows = Vec::new();
    for &n in ns {
        let post = consistency_posterior(n, seed)?;
        let axis = &post.axes()[0];
        let point_mass: Vec<Real> = post
            .log_density()
            .iter()
            .zip(post.quad_weights())
            .map(|(ld, w)| w * ld.exp())
            .collect();
        let mut gap = 0.0;
        for &y in &y_new {
            // log p-tilde_theta*(y): exact N(theta*, sigma^2) log-density
            let r = CONSISTENCY_THETA_STAR - y;
            let log_plugin = -scale * r * r - log_z;
            let kernel_mean: Real = axis
                .iter()
                .zip(&point_mass)
                .map(|(&t, &m)| {
                    let rr = t - y;
                    m * (-scale * rr * rr).exp()
                })
                .sum();
            let log_predictive = kernel_mean.ln() - log_z;
            gap += log_plugin - log_predictive;
        }
        rows.push(PredictiveGapRow { n, gap: gap / draws as Real });
    }

    // misspecified sanity: KL(Laplace truth || Gaussian plug-in) > 0
    let mut rng = derive_rng(seed, 1, 3);
    let mut kl = 0.0;
    for _ in 0..draws {
        let y = laplace_sample(&mut rng, CONSISTENCY_THETA_STAR, CONSISTENCY_SIGMA);
        let r = (y - CONSISTENCY_THETA_STAR).abs();
        let log_p = -(r / CONSISTENCY_SIGMA) - (2.0 * CONSISTENCY_SIGMA).ln();
        let log_q = -scale * r * r - log_z;
        kl += log_p - log_q;
    }
    Ok(PredictiveConvergenceReport {
        rows,
        misspecified_plugin_kl: kl / draws as Real,
    })
}

// ---------------------------------------------------------------------------
// Bretagnolle-Huber inequality suite
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub pairs: usize,
    pub violations: usize,
    pub worst_slack: Real,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Check d_H^2 <= d_TV <= sqrt(1 - e^{-min KL}) on `pairs` randomized
/// quadrature posterior pairs built from the conjugate family.
pub fn verify_inequalities(pairs: usize, seed: u64) -> Result<InequalityReport> {
    let axis = conjugate_axis();
    let mut rng = derive_rng(seed, 0, 4);
    let mut violations = 0;
    let mut worst_slack: Real = 0.0;
    for _ in 0..pairs {
        let make = |rng: &mut rand_chacha::ChaCha8Rng| -> Result<GridPosterior> {
            let n = 1 + rand::Rng::gen_range(rng, 0..3usize);
            let values: Vec<Real> =
                (0..n).map(|_| rand::Rng::gen_range(rng, -2.0..2.0)).collect();
            let w = rand::Rng::gen_range(rng, 0.05..1.0);
            let mu0 = rand::Rng::gen_range(rng, -1.0..1.0);
            let (data, loss, _) = conjugate_problem(&values);
            let prior = GaussianPrior::new(mu0, 1.0)?;
            quadrature_posterior(&loss, &prior, &data, w, vec![axis.clone()])
        };
        let p = make(&mut rng)?;
        let q = make(&mut rng)?;
        let d: Divergences = divergences(&p, &q)?;
        if !d.bretagnolle_huber_holds(1e-9) {
            violations += 1;
        }
        let upper = (1.0 - (-d.min_kl()).exp()).max(0.0).sqrt();
        worst_slack = worst_slack
            .max(d.hellinger * d.hellinger - d.tv)
            .max(d.tv - upper);
    }
    Ok(InequalityReport { pairs, violations, worst_slack })
}

// ---------------------------------------------------------------------------
// SMC vs quadrature equivalence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRow {
    pub w: Real,
    pub smc_mean: Real,
    pub quad_mean: Real,
    pub mean_se: Real,
    pub smc_r_cv: Real,
    pub quad_r_cv: Real,
    pub r_cv_se: Real,
    pub smc_p_cv: Real,
    pub quad_p_cv: Real,
    pub p_cv_se: Real,
}

impl EquivalenceRow {
    pub fn within_three_se(&self) -> bool {
        (self.smc_mean - self.quad_mean).abs() <= 3.0 * self.mean_se
            && (self.smc_r_cv - self.quad_r_cv).abs() <= 3.0 * self.r_cv_se
            && (self.smc_p_cv - self.quad_p_cv).abs() <= 3.0 * self.p_cv_se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub rows: Vec<EquivalenceRow>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.within_three_se())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "W,smc_mean,quad_mean,mean_SE,smc_R_CV,quad_R_CV,R_CV_SE,smc_P_CV,quad_P_CV,P_CV_SE\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.w,
                r.smc_mean,
                r.quad_mean,
                r.mean_se,
                r.smc_r_cv,
                r.quad_r_cv,
                r.r_cv_se,
                r.smc_p_cv,
                r.quad_p_cv,
                r.p_cv_se
            ));
        }
        out
    }
}

/// For every W in the default grid on the conjugate problem, compare SMC
/// estimates of the full-posterior mean, R_CV, and P_CV against brute-force
/// quadrature. Standard errors are particle-level Monte Carlo SEs (the
/// across-datum SE vanishes at n = 1).
pub fn verify_oracle_equivalence(seed: u64) -> Result<EquivalenceReport> {
    let (data, loss, prior) = conjugate_problem(&[1.0]);
    let axis = conjugate_axis();
    let grid = WGrid::default_grid();
    let config = FilterConfig { particles: 2000, mh_steps: 10, seed, ..Default::default() };
    let out = run_calibration_filter(&grid, &config, SelectionRule::Min, &loss, &prior, &data)?;

    let mut rows = Vec::new();
    for (t, &w) in grid.weights().iter().enumerate() {
        let ps = &out.systems[t];
        let s = ps.len() as Real;

        // full posterior mean
        let (full, _) =
            run_full_posterior_filter(ps.clone(), w, &config, &loss, &prior, &data)?;
        let smc_mean = full.weighted_mean()[0];
        let mean_se = (full.weighted_variance()[0] / s).sqrt();
        let quad = quadrature_posterior(&loss, &prior, &data, w, vec![axis.clone()])?;
        let quad_mean = quad.mean()[0];

        // R_CV: particle-level SE from the weighted spread of the losses
        let (smc_r_cv, _) = estimate_r_cv(ps, w)?;
        let weights = ps.weights();
        let losses: Vec<Real> = ps.loss_cache().iter().map(|row| row[0]).collect();
        let var_l: Real = losses
            .iter()
            .zip(&weights)
            .map(|(&l, &wt)| wt * (l - smc_r_cv) * (l - smc_r_cv))
            .sum();
        let r_cv_se = (var_l / s).sqrt();
        let quad_r_cv = quadrature_r_cv(&loss, &prior, &data, w, axis.clone())?;

        // P_CV: delta-method SE for log of a weighted mean of exp(-l)
        let (smc_p_cv, _) = estimate_p_cv(ps, w, &loss)?;
        let kernel: Vec<Real> = losses.iter().map(|&l| (-l).exp()).collect();
        let kmean: Real = kernel.iter().zip(&weights).map(|(&k, &wt)| wt * k).sum();
        let kvar: Real = kernel
            .iter()
            .zip(&weights)
            .map(|(&k, &wt)| wt * (k - kmean) * (k - kmean))
            .sum();
        let p_cv_se = (kvar / s).sqrt() / kmean;
        let quad_p_cv = quadrature_p_cv(&loss, &prior, &data, w, axis.clone())?;

        rows.push(EquivalenceRow {
            w,
            smc_mean,
            quad_mean,
            mean_se,
            smc_r_cv,
            quad_r_cv,
            r_cv_se,
            smc_p_cv,
            quad_p_cv,
            p_cv_se,
        });
    }
    Ok(EquivalenceReport { rows })
}
