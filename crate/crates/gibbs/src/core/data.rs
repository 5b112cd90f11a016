use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::Real;

/// Sidecar metadata describing how a dataset was generated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: Option<u64>,
    /// Noise description; for simulated data this is the serialized NoiseSpec.
    pub noise: Option<serde_json::Value>,
    /// Ground-truth parameter values when the data are simulated.
    pub truth: Option<Vec<Real>>,
}

/// `n` i.i.d. observation vectors in R^d on a common strictly increasing
/// evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<Vec<Real>>,
    grid: Vec<Real>,
    meta: DatasetMeta,
}

impl Dataset {
    pub fn new(observations: Vec<Vec<Real>>, grid: Vec<Real>, meta: DatasetMeta) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Config("dataset needs n >= 1 observations".into()));
        }
        let d = grid.len();
        if d == 0 {
            return Err(Error::Config("empty evaluation grid".into()));
        }
        if !grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("grid must be strictly increasing".into()));
        }
        for (i, y) in observations.iter().enumerate() {
            if y.len() != d {
                return Err(Error::Config(format!(
                    "observation {i} has dimension {} but grid has {d}",
                    y.len()
                )));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("observation {i} has non-finite entries")));
            }
        }
        Ok(Self { observations, grid, meta })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 1 by construction
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn observations(&self) -> &[Vec<Real>] {
        &self.observations
    }

    pub fn observation(&self, i: usize) -> &[Real] {
        &self.observations[i]
    }

    pub fn grid(&self) -> &[Real] {
        &self.grid
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    /// Canonical CSV encoding: header = grid values, one row per observation.
    /// Numbers are written with Rust's shortest round-trip formatting, so the
    /// bytes identify the float values exactly.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.grid.iter().map(|t| format!("{t}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for y in &self.observations {
            let row: Vec<String> = y.iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv_string(text: &str, meta: DatasetMeta) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let grid: Vec<Real> = rdr
            .headers()?
            .iter()
            .map(|s| s.trim().parse::<Real>().map_err(|e| Error::Config(format!("bad grid value {s:?}: {e}"))))
            .collect::<Result<_>>()?;
        let mut observations = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let row: Vec<Real> = record
                .iter()
                .map(|s| s.trim().parse::<Real>().map_err(|e| Error::Config(format!("bad value {s:?}: {e}"))))
                .collect::<Result<_>>()?;
            observations.push(row);
        }
        Self::new(observations, grid, meta)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        let sidecar = path.with_extension("meta.json");
        std::fs::write(sidecar, serde_json::to_string_pretty(&self.meta)?)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let sidecar = path.with_extension("meta.json");
        let meta = if sidecar.exists() {
            serde_json::from_str(&std::fs::read_to_string(sidecar)?)?
        } else {
            DatasetMeta::default()
        };
        Self::from_csv_string(&text, meta)
    }

    /// Content hash of the canonical CSV encoding (grid + observations only;
    /// metadata does not participate). Used for checkpoint provenance checks.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_csv_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// A copy with the observations permuted by `perm` (a permutation of 0..n).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::Config("permutation length mismatch".into()));
        }
        let observations = perm.iter().map(|&i| self.observations[i].clone()).collect();
        Self::new(observations, self.grid.clone(), self.meta.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(
            vec![vec![1.0, 2.0], vec![3.0, 4.5]],
            vec![0.0, 1.0],
            DatasetMeta { seed: Some(7), noise: None, truth: None },
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = toy();
        let text = ds.to_csv_string();
        let back = Dataset::from_csv_string(&text, ds.meta().clone()).unwrap();
        assert_eq!(ds, back);
        assert_eq!(ds.content_hash(), back.content_hash());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Dataset::new(vec![], vec![0.0], DatasetMeta::default()).is_err());
        assert!(Dataset::new(vec![vec![1.0]], vec![1.0, 0.5], DatasetMeta::default()).is_err());
        assert!(Dataset::new(vec![vec![1.0, 2.0]], vec![0.0], DatasetMeta::default()).is_err());
    }

    #[test]
    fn hash_ignores_metadata_but_not_values() {
        let ds = toy();
        let other = Dataset::new(
            vec![vec![1.0, 2.0], vec![3.0, 4.5]],
            vec![0.0, 1.0],
            DatasetMeta::default(),
        )
        .unwrap();
        assert_eq!(ds.content_hash(), other.content_hash());
        let changed = Dataset::new(
            vec![vec![1.0, 2.0], vec![3.0, 4.6]],
            vec![0.0, 1.0],
            DatasetMeta::default(),
        )
        .unwrap();
        assert_ne!(ds.content_hash(), changed.content_hash());
    }
}
