//! Trained weights on disk: a versioned TOML file of per-cell records.

use std::path::Path;

use metalevel::policies::WeightVector;
use serde::{Deserialize, Serialize};

use crate::config::Domain;
use crate::error::{BenchError, Result};

pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsRecord {
    pub domain: Domain,
    /// Arms, tree height or cities.
    pub size: usize,
    pub cost: f64,
    pub horizon: usize,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub seed: u64,
    /// Mean return of the selected weights during training.
    pub train_mean: f64,
}

impl WeightsRecord {
    pub fn new(domain: Domain, size: usize, cost: f64, horizon: usize, w: WeightVector, seed: u64, train_mean: f64) -> Self {
        WeightsRecord { domain, size, cost, horizon, w1: w.w1, w2: w.w2, w3: w.w3, w4: w.w4, seed, train_mean }
    }

    pub fn weights(&self) -> Result<WeightVector> {
        Ok(WeightVector::new(self.w1, self.w2, self.w3, self.w4, self.horizon)?)
    }

    pub fn matches(&self, domain: Domain, size: usize, cost: f64) -> bool {
        self.domain == domain && self.size == size && same_cost(self.cost, cost)
    }
}

fn same_cost(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsFile {
    pub version: u32,
    #[serde(default, rename = "record")]
    pub records: Vec<WeightsRecord>,
}

impl WeightsFile {
    pub fn new(mut records: Vec<WeightsRecord>) -> Self {
        records.sort_by(|a, b| (a.domain, a.size).cmp(&(b.domain, b.size)).then(a.cost.total_cmp(&b.cost)));
        WeightsFile { version: WEIGHTS_VERSION, records }
    }

    pub fn find(&self, domain: Domain, size: usize, cost: f64) -> Result<&WeightsRecord> {
        self.records.iter().find(|r| r.matches(domain, size, cost)).ok_or_else(|| {
            BenchError::MissingArtifact(format!("no trained weights for {domain} size={size} cost={cost}"))
        })
    }

    /// Adds records, replacing any for the same cell.
    pub fn merge(self, new: Vec<WeightsRecord>) -> Self {
        let mut records: Vec<WeightsRecord> =
            self.records.into_iter().filter(|r| !new.iter().any(|n| n.matches(r.domain, r.size, r.cost))).collect();
        records.extend(new);
        WeightsFile::new(records)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("weights are always serializable")
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let file: WeightsFile =
            toml::from_str(text).map_err(|e| BenchError::Parse { path: path.into(), message: e.to_string() })?;
        if file.version != WEIGHTS_VERSION {
            return Err(BenchError::Parse {
                path: path.into(),
                message: format!("weights version {} unsupported (expected {WEIGHTS_VERSION})", file.version),
            });
        }
        for r in &file.records {
            r.weights()?;
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => BenchError::MissingArtifact(format!("weights file {}", path.display())),
            _ => BenchError::io(path, e),
        })?;
        Self::from_text(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| BenchError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(size: usize, cost: f64) -> WeightsRecord {
        let w = WeightVector::new(0.2, 0.3, 0.5, 2.0, 25).unwrap();
        WeightsRecord::new(Domain::Bandit, size, cost, 25, w, 7, 0.6)
    }

    #[test]
    fn text_round_trip_is_exact() {
        let f = WeightsFile::new(vec![record(3, 0.01), record(2, 1e-4)]);
        let text = f.to_text();
        assert!(text.starts_with("version = 1"));
        let back = WeightsFile::from_text(&text, Path::new("w.toml")).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.records[0].size, 2);
    }

    #[test]
    fn lookup_and_merge() {
        let f = WeightsFile::new(vec![record(3, 0.01)]);
        assert!(f.find(Domain::Bandit, 3, 0.01).is_ok());
        let err = f.find(Domain::Bandit, 4, 0.01).unwrap_err();
        assert_eq!(err.category(), "missing-artifact");
        assert!(err.to_string().contains("size=4"));
        let mut newer = record(3, 0.01);
        newer.seed = 9;
        let merged = f.merge(vec![newer, record(5, 0.1)]);
        assert_eq!(merged.records.len(), 2);
        assert_eq!(merged.find(Domain::Bandit, 3, 0.01).unwrap().seed, 9);
    }

    #[test]
    fn rejects_bad_files() {
        let p = Path::new("w.toml");
        assert_eq!(WeightsFile::from_text("version = 2", p).unwrap_err().category(), "parse");
        let bad = "version = 1\n[[record]]\ndomain = \"bandit\"\nsize = 2\ncost = 0.1\nhorizon = 25\nw1 = 0.9\nw2 = 0.9\nw3 = 0.0\nw4 = 1.0\nseed = 0\ntrain_mean = 0.0\n";
        assert_eq!(WeightsFile::from_text(bad, p).unwrap_err().category(), "constraint");
        assert_eq!(WeightsFile::load(Path::new("/nonexistent/w.toml")).unwrap_err().category(), "missing-artifact");
    }
}
