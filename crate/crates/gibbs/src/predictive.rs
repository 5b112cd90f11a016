//! Gibbs predictive densities and the P_CV model-selection criterion.

use serde::{Deserialize, Serialize};

use crate::calib::loo_log_weights;
use crate::core::{Dataset, LossModel, ParameterVector};
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, mean, sample_variance};
use crate::smc::ParticleSystem;
use crate::Real;

/// log Z-tilde(theta) = log of the integral of exp(-L(theta, y')) over R^d
/// with Lebesgue reference. For translation-invariant losses this is a
/// closed-form constant in theta.
pub fn log_loss_partition(loss: &LossModel, d: usize) -> Result<Real> {
    if !loss.translation_invariant() {
        return Err(Error::Config(
            "loss partition requires a translation-invariant loss".into(),
        ));
    }
    loss.log_partition(d)
}

/// Z-tilde(theta); constant in theta for translation-invariant losses, so the
/// theta argument only fixes the signature of the predictive integrand.
pub fn loss_partition(_theta: &ParameterVector, loss: &LossModel, d: usize) -> Result<Real> {
    Ok(log_loss_partition(loss, d)?.exp())
}

/// log of the Gibbs predictive density at y_new under the particle system
/// (which should target the full-data Gibbs posterior):
/// log[sum_s w_s exp(-L(theta_s, y_new))] - log[sum_s w_s Z-tilde(theta_s)].
/// Returns -inf (not an error) when every exp(-L) underflows.
pub fn log_predictive_density(
    ps: &ParticleSystem,
    y_new: &[Real],
    loss: &LossModel,
) -> Result<Real> {
    let log_z = log_loss_partition(loss, y_new.len())?;
    let terms: Vec<Real> = ps
        .particles()
        .iter()
        .zip(ps.log_weights())
        .map(|(theta, &lw)| Ok(lw - loss.evaluate(theta, y_new)?))
        .collect::<Result<_>>()?;
    Ok(log_sum_exp(&terms) - log_z)
}

/// The LOOCV predictive criterion and its standard error:
/// P-hat_CV = (1/n) sum_i [log sum_s r-bar_i(s) Z-tilde - log sum_s r-bar_i(s) exp(-l[s][i])],
/// with the same self-normalized LOO weights r-bar_i as the calibration
/// objective. Lower is predictively better.
pub fn estimate_p_cv(ps: &ParticleSystem, w: Real, loss: &LossModel) -> Result<(Real, Real)> {
    let n = ps.data_len();
    let d = loss.forward_model().output_dim();
    let log_z = log_loss_partition(loss, d)?;
    let mut terms = Vec::with_capacity(n);
    for i in 0..n {
        let log_r = loo_log_weights(ps, w, i)?;
        let log_num: Vec<Real> = log_r
            .iter()
            .zip(ps.loss_cache())
            .map(|(lr, row)| lr - row[i])
            .collect();
        // log sum_s r-bar_i(s) Z-tilde = log_z since sum_s r-bar_i(s) = 1
        terms.push(log_z - log_sum_exp(&log_num));
    }
    let p_cv = mean(&terms);
    if !p_cv.is_finite() {
        return Err(Error::Numerical {
            msg: format!("non-finite P_CV estimate at W = {w}"),
            theta: Vec::new(),
        });
    }
    let se = if n >= 2 { (sample_variance(&terms) / n as Real).sqrt() } else { 0.0 };
    Ok((p_cv, se))
}

/// One model entered into the predictive comparison: a loss, its calibrated
/// W, and the mixture-targeting particle system retained at that W.
pub struct ModelCandidate {
    pub label: String,
    pub loss: LossModel,
    pub w: Real,
    pub system: ParticleSystem,
}

/// Per-candidate P_CV values with ascending ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveEntry {
    pub label: String,
    pub w: Real,
    pub p_cv: Real,
    pub se: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveReport {
    /// In input order.
    pub entries: Vec<PredictiveEntry>,
    /// Indices into `entries`, sorted by ascending P_CV (best first).
    pub ranking: Vec<usize>,
    /// Pairs whose P_CV difference is smaller than the sum of their SEs
    /// (statistically overlapping, including exact ties).
    pub overlaps: Vec<(usize, usize)>,
}

impl PredictiveReport {
    pub fn best(&self) -> &PredictiveEntry {
        &self.entries[self.ranking[0]]
    }

    /// Human-readable table with columns loss, W, P_CV, SE.
    pub fn to_table_string(&self) -> String {
        let mut out = String::from("loss\tW\tP_CV\tSE\n");
        for &k in &self.ranking {
            let e = &self.entries[k];
            out.push_str(&format!("{}\t{}\t{}\t{}\n", e.label, e.w, e.p_cv, e.se));
        }
        out
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("loss,W,P_CV,SE\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{},{}\n", e.label, e.w, e.p_cv, e.se));
        }
        out
    }
}

/// Evaluate P_CV for every candidate and rank them. All candidates must have
/// been calibrated on the same dataset.
pub fn compare_models(candidates: &[ModelCandidate], data: &Dataset) -> Result<PredictiveReport> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidates to compare".into()));
    }
    let n = data.len();
    let mut entries = Vec::with_capacity(candidates.len());
    for c in candidates {
        if c.system.data_len() != n {
            return Err(Error::Config(format!(
                "candidate '{}' was calibrated on {} observations but the dataset has {}",
                c.label,
                c.system.data_len(),
                n
            )));
        }
        c.system.verify_cache(&c.loss, data).map_err(|_| {
            Error::Config(format!(
                "candidate '{}' loss cache does not match the supplied dataset",
                c.label
            ))
        })?;
        let (p_cv, se) = estimate_p_cv(&c.system, c.w, &c.loss)?;
        entries.push(PredictiveEntry { label: c.label.clone(), w: c.w, p_cv, se });
    }
    let mut ranking: Vec<usize> = (0..entries.len()).collect();
    ranking.sort_by(|&a, &b| entries[a].p_cv.partial_cmp(&entries[b].p_cv).unwrap());
    let mut overlaps = Vec::new();
    for a in 0..entries.len() {
        for b in a + 1..entries.len() {
            let (ea, eb) = (&entries[a], &entries[b]);
            if (ea.p_cv - eb.p_cv).abs() <= ea.se + eb.se {
                overlaps.push((a, b));
            }
        }
    }
    Ok(PredictiveReport { entries, ranking, overlaps })
}
