use std::fmt;
use std::path::Path;
use std::str::FromStr;

use metalevel::domains::{BanditMdp, StoppingMdp, StoppingScoring};
use metalevel::optimizer::SearchSpec;
use metalevel::policies::PolicyKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Stopping,
    Bandit,
    Tree,
    Tornado,
}

impl Domain {
    pub fn name(&self) -> &'static str {
        match self {
            Domain::Stopping => "stopping",
            Domain::Bandit => "bandit",
            Domain::Tree => "tree",
            Domain::Tornado => "tornado",
        }
    }

    /// Policies that exist for this domain.
    pub fn supports(&self, policy: PolicyKind) -> bool {
        use PolicyKind::*;
        match self {
            Domain::Stopping => matches!(policy, Optimal | Bmps | MetaGreedy | Full),
            Domain::Bandit => matches!(policy, Optimal | Bmps | Blinkered | MetaGreedy | Full),
            Domain::Tree => matches!(policy, Optimal | Bmps | RecursiveBlinkered | MetaGreedy | Full),
            Domain::Tornado => matches!(policy, Bmps | Uniform | MetaGreedy | Full),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stopping" => Ok(Domain::Stopping),
            "bandit" => Ok(Domain::Bandit),
            "tree" => Ok(Domain::Tree),
            "tornado" => Ok(Domain::Tornado),
            _ => Err(BenchError::Config(format!("unknown domain {s:?} (stopping, bandit, tree, tornado)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TornadoConfig {
    /// Hours until decisions are due.
    pub total_time: f64,
    /// Hours per weather simulation.
    pub t_sim: Vec<f64>,
    /// Hours of metareasoning per simulation; measured when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_mr: Option<f64>,
    pub rollouts: usize,
    /// Cities and simulation budget of the cell the reusable weights are
    /// trained on.
    pub train_cities: usize,
    pub train_budget: usize,
}

impl Default for TornadoConfig {
    fn default() -> Self {
        TornadoConfig {
            total_time: 24.0,
            t_sim: (-2..=4).map(|e| 2f64.powi(e)).collect(),
            t_mr: None,
            rollouts: 5000,
            train_cities: 20,
            train_budget: 50,
        }
    }
}

/// One experiment matrix. `sizes` are arm counts (bandit), tree heights
/// (tree) or city counts (tornado); stopping has a single computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: Domain,
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub costs: Vec<f64>,
    /// Metalevel horizon for stopping and bandit cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    pub policies: Vec<PolicyKind>,
    pub test_episodes: usize,
    #[serde(default)]
    pub seed: u64,
    pub search: SearchSpec,
    #[serde(default)]
    pub scoring: StoppingScoring,
    #[serde(default)]
    pub tornado: TornadoConfig,
}

pub fn stopping_costs() -> Vec<f64> {
    vec![0.001, 0.0025, 0.005, 0.01, 0.025, 0.05, 0.1]
}

pub fn bandit_costs() -> Vec<f64> {
    vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
}

pub fn tree_costs() -> Vec<f64> {
    (-7..=0).map(|e| 2f64.powi(e)).collect()
}

impl ExperimentConfig {
    /// The published protocol for a domain.
    pub fn paper(domain: Domain) -> Self {
        use PolicyKind::*;
        let base = ExperimentConfig {
            domain,
            sizes: vec![],
            costs: vec![],
            horizon: None,
            policies: vec![],
            test_episodes: 0,
            seed: 0,
            search: SearchSpec::stopping(),
            scoring: StoppingScoring::Signed,
            tornado: TornadoConfig::default(),
        };
        match domain {
            Domain::Stopping => ExperimentConfig {
                sizes: vec![1],
                costs: stopping_costs(),
                horizon: Some(StoppingMdp::DEFAULT_HORIZON),
                policies: vec![Optimal, Bmps, MetaGreedy, Full],
                test_episodes: 10_000,
                ..base
            },
            Domain::Bandit => ExperimentConfig {
                sizes: vec![2, 3, 4, 5],
                costs: bandit_costs(),
                horizon: Some(BanditMdp::DEFAULT_HORIZON),
                policies: vec![Optimal, Bmps, Blinkered, MetaGreedy, Full],
                test_episodes: 2000,
                search: SearchSpec::bandit(),
                ..base
            },
            Domain::Tree => ExperimentConfig {
                sizes: vec![2, 3, 4, 5, 6],
                costs: tree_costs(),
                policies: vec![Optimal, Bmps, RecursiveBlinkered, MetaGreedy, Full],
                test_episodes: 5000,
                search: SearchSpec::tree(),
                ..base
            },
            Domain::Tornado => ExperimentConfig {
                sizes: vec![10, 30],
                policies: vec![Bmps, Uniform],
                test_episodes: 5000,
                search: SearchSpec::tornado(),
                ..base
            },
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| BenchError::Parse { path: path.into(), message: e.to_string() })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        if self.test_episodes == 0 {
            return Err(BenchError::Config("test_episodes must be positive".into()));
        }
        if self.policies.is_empty() {
            return Err(BenchError::Config("policy list is empty".into()));
        }
        for p in &self.policies {
            if !self.domain.supports(*p) {
                return Err(BenchError::Config(format!("policy {p} is not available for the {} domain", self.domain)));
            }
        }
        if self.domain != Domain::Tornado {
            if self.costs.is_empty() {
                return Err(BenchError::Config("cost grid is empty".into()));
            }
            if let Some(c) = self.costs.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
                return Err(BenchError::Config(format!("cost {c} must be finite and non-negative")));
            }
        }
        if self.domain != Domain::Stopping && self.sizes.is_empty() {
            return Err(BenchError::Config("size grid is empty".into()));
        }
        if self.domain == Domain::Tornado {
            let t = &self.tornado;
            if t.t_sim.is_empty() || t.t_sim.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(BenchError::Config("tornado t_sim grid must be non-empty and positive".into()));
            }
            if !(t.total_time.is_finite() && t.total_time >= 0.0) {
                return Err(BenchError::Config(format!("total_time = {} must be non-negative", t.total_time)));
            }
            if t.t_mr.is_some_and(|x| !(x.is_finite() && x >= 0.0)) {
                return Err(BenchError::Config("t_mr must be non-negative".into()));
            }
            if t.rollouts == 0 || t.train_cities == 0 {
                return Err(BenchError::Config("rollouts and train_cities must be positive".into()));
            }
        }
        Ok(())
    }

    /// Cell sizes; stopping has the single size 1.
    pub fn cell_sizes(&self) -> Vec<usize> {
        if self.domain == Domain::Stopping {
            vec![1]
        } else {
            self.sizes.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for d in [Domain::Stopping, Domain::Bandit, Domain::Tree, Domain::Tornado] {
            let c = ExperimentConfig::paper(d);
            c.validate().unwrap();
            let back: ExperimentConfig = toml::from_str(&c.to_toml()).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.hash(), c.hash());
        }
        assert_eq!(tree_costs().len(), 8);
        assert_eq!(ExperimentConfig::paper(Domain::Tornado).tornado.t_sim.len(), 7);
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::paper(Domain::Bandit);
        let b = ExperimentConfig { seed: 1, ..a.clone() };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn rejects_unavailable_policy() {
        let c = ExperimentConfig { policies: vec![PolicyKind::Blinkered], ..ExperimentConfig::paper(Domain::Tree) };
        assert!(c.validate().is_err());
        assert!("forest".parse::<Domain>().is_err());
    }
}
