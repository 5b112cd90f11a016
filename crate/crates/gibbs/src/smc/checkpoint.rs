use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::core::{Dataset, ParameterVector};
use crate::error::{Error, Result};
use crate::smc::particle::ParticleSystem;
use crate::Real;

/// Version of the checkpoint JSON schema accepted by this build.
pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// A serialized particle system at one retained W, sufficient to resume
/// deterministically: particles, weights, loss cache, and RNG counters.
/// Round-trips bit-exactly through JSON (all floats are finite and JSON
/// numbers use shortest-round-trip formatting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub w: Real,
    pub target_index: usize,
    /// SHA-256 of the dataset's canonical CSV; downstream commands validate
    /// it before using the checkpoint.
    pub dataset_hash: String,
    pub master_seed: u64,
    pub phase: u64,
    pub parameter_names: Vec<String>,
    pub particles: Vec<Vec<Real>>,
    pub log_weights: Vec<Real>,
    pub loss_cache: Vec<Vec<Real>>,
    pub ess_trace: Vec<Real>,
}

impl Checkpoint {
    pub fn from_system(ps: &ParticleSystem, w: Real, data: &Dataset) -> Result<Self> {
        let finite = ps.log_weights().iter().all(|v| v.is_finite())
            && ps.particles().iter().all(|t| t.values().iter().all(|v| v.is_finite()))
            && ps.loss_cache().iter().all(|row| row.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Numerical {
                msg: "checkpoint requires finite particles, weights, and losses".into(),
                theta: Vec::new(),
            });
        }
        Ok(Self {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            w,
            target_index: ps.target_index(),
            dataset_hash: data.content_hash(),
            master_seed: ps.master_seed(),
            phase: ps.phase(),
            parameter_names: ps.particles()[0].names().to_vec(),
            particles: ps.particles().iter().map(|t| t.values().to_vec()).collect(),
            log_weights: ps.log_weights().to_vec(),
            loss_cache: ps.loss_cache().to_vec(),
            ess_trace: ps.ess_trace().to_vec(),
        })
    }

    /// Rebuild the particle system, checking the dataset hash first.
    pub fn restore(&self, data: &Dataset) -> Result<ParticleSystem> {
        if self.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint schema version {} (expected {})",
                self.schema_version, CHECKPOINT_SCHEMA_VERSION
            )));
        }
        let hash = data.content_hash();
        if hash != self.dataset_hash {
            return Err(Error::Provenance(format!(
                "checkpoint was built for dataset {} but got {}",
                self.dataset_hash, hash
            )));
        }
        let names: std::sync::Arc<[String]> = self.parameter_names.clone().into();
        let particles = self
            .particles
            .iter()
            .map(|v| ParameterVector::new(v.clone(), names.clone()))
            .collect::<Result<Vec<_>>>()?;
        ParticleSystem::from_parts(
            particles,
            self.log_weights.clone(),
            self.loss_cache.clone(),
            self.target_index,
            self.master_seed,
            self.phase,
            self.ess_trace.clone(),
        )
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}
