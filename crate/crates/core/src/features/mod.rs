//! Value-of-information features: the myopic VOI of one computation, the
//! value of perfect information about every parameter, and the value of
//! perfect information about the parameters one computation is relevant to.
//!
//! Every domain has an exact (closed-form, quadrature or integer-DP) route;
//! a generic Monte-Carlo route over sampled parameter vectors is kept as an
//! alternative and as an independent check.

mod bandit;
mod stopping;
mod tornado;
mod tree;

use std::hash::{Hash, Hasher};
use std::sync::Arc;

use parking_lot::RwLock;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::{FxHashMap, FxHasher};
use serde::{Deserialize, Serialize};

use crate::error::{MetaError, Result};
use crate::mdp::{enumerate_successors, MetaAction, MetaMdp};

pub use tree::{tree_full_information_pmf, PathPmf};

/// The four BMPS features of one computation at one belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub voi1: f64,
    pub vpi: f64,
    pub vpi_sub: f64,
    pub cost: f64,
}

impl FeatureVector {
    pub fn as_array(&self) -> [f64; 4] {
        [self.voi1, self.vpi, self.vpi_sub, self.cost]
    }

    pub fn scaled(&self, s: f64) -> FeatureVector {
        FeatureVector { voi1: self.voi1 * s, vpi: self.vpi * s, vpi_sub: self.vpi_sub * s, cost: self.cost * s }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMethod {
    #[default]
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub method: FeatureMethod,
    pub mc_samples: usize,
    pub quadrature_points: usize,
    /// Share one parameter sample set across all computations at a belief.
    pub common_random_numbers: bool,
    pub seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            method: FeatureMethod::Exact,
            mc_samples: 3000,
            quadrature_points: 513,
            common_random_numbers: true,
            seed: 0,
        }
    }
}

impl FeatureConfig {
    pub fn monte_carlo(mc_samples: usize, seed: u64) -> Self {
        FeatureConfig { method: FeatureMethod::MonteCarlo, mc_samples, seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.method == FeatureMethod::MonteCarlo && self.mc_samples < 100 {
            return Err(MetaError::Config(format!("mc_samples must be at least 100, got {}", self.mc_samples)));
        }
        if self.quadrature_points < 3 {
            return Err(MetaError::Config("quadrature_points must be at least 3".into()));
        }
        Ok(())
    }
}

/// Cost-free features of every computation at one belief.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefFeatures {
    pub vpi: f64,
    pub voi1: Vec<f64>,
    pub vpi_sub: Vec<f64>,
    /// Whether each computation can change the belief.
    pub informative: Vec<bool>,
}

impl BeliefFeatures {
    pub fn vector(&self, c: usize, cost: f64) -> FeatureVector {
        FeatureVector { voi1: self.voi1[c], vpi: self.vpi, vpi_sub: self.vpi_sub[c], cost }
    }

    pub fn num_computations(&self) -> usize {
        self.voi1.len()
    }

    pub fn any_informative(&self) -> bool {
        self.informative.iter().any(|&x| x)
    }
}

/// Domain hooks for the feature computations.
pub trait VoiFeatures: MetaMdp {
    /// Features of every computation by the domain's exact route.
    fn exact_features(&self, belief: &Self::Belief, config: &FeatureConfig) -> BeliefFeatures;

    /// Draws a parameter vector from the belief.
    fn sample_parameters(&self, belief: &Self::Belief, rng: &mut ChaCha8Rng, out: &mut Vec<f64>);

    /// Terminal utility when parameter `i` is known to equal `theta[i]`
    /// wherever `revealed[i]`, and keeps its current belief elsewhere.
    fn utility_with_revealed(&self, belief: &Self::Belief, theta: &[f64], revealed: &[bool]) -> f64;
}

/// `Σ_b' P(b'|b,c) U(b') − U(b)` over the exact successor support.
pub fn voi1_enumerated<M: MetaMdp>(mdp: &M, belief: &M::Belief, c: usize) -> f64 {
    let after: f64 = mdp.successors(belief, c).iter().map(|(b, p)| p * mdp.termination_utility(b)).sum();
    after - mdp.termination_utility(belief)
}

pub fn voi1<M: MetaMdp>(mdp: &M, belief: &M::Belief, action: MetaAction) -> Result<f64> {
    let succ = enumerate_successors(mdp, belief, action)?;
    let after: f64 = succ.iter().map(|(b, p)| p * mdp.termination_utility(b)).sum();
    Ok(after - mdp.termination_utility(belief))
}

pub fn vpi<M: VoiFeatures>(mdp: &M, belief: &M::Belief, config: &FeatureConfig) -> f64 {
    belief_features(mdp, belief, config).vpi
}

pub fn vpi_sub<M: VoiFeatures>(mdp: &M, belief: &M::Belief, action: MetaAction, config: &FeatureConfig) -> Result<f64> {
    let c = computation_index(mdp, action)?;
    Ok(belief_features(mdp, belief, config).vpi_sub[c])
}

pub fn features<M: VoiFeatures>(
    mdp: &M,
    belief: &M::Belief,
    action: MetaAction,
    config: &FeatureConfig,
) -> Result<FeatureVector> {
    let c = computation_index(mdp, action)?;
    Ok(belief_features(mdp, belief, config).vector(c, mdp.spec().cost))
}

fn computation_index<M: MetaMdp>(mdp: &M, action: MetaAction) -> Result<usize> {
    match action {
        MetaAction::Terminate => Err(MetaError::TerminateNotComputation),
        MetaAction::Compute(c) => {
            let count = mdp.spec().num_computations;
            if c >= count {
                Err(MetaError::InvalidAction { index: c, count })
            } else {
                Ok(c)
            }
        }
    }
}

/// Features of all computations, by the configured method.
pub fn belief_features<M: VoiFeatures>(mdp: &M, belief: &M::Belief, config: &FeatureConfig) -> BeliefFeatures {
    match config.method {
        FeatureMethod::Exact => mdp.exact_features(belief, config),
        FeatureMethod::MonteCarlo => monte_carlo_features(mdp, belief, config),
    }
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Seed for the sample set at a belief; stable across runs and threads.
pub fn belief_seed<B: Hash>(base: u64, belief: &B, stream: u64) -> u64 {
    let mut h = FxHasher::default();
    belief.hash(&mut h);
    stream.hash(&mut h);
    base ^ h.finish()
}

/// Unclamped MC estimate of the value of revealing the parameters in `revealed`.
pub fn vpi_subset_mc<M: VoiFeatures>(
    mdp: &M,
    belief: &M::Belief,
    revealed: &[bool],
    samples: usize,
    seed: u64,
) -> McEstimate {
    let base = mdp.termination_utility(belief);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = Vec::with_capacity(mdp.num_parameters());
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        mdp.sample_parameters(belief, &mut rng, &mut theta);
        let gain = mdp.utility_with_revealed(belief, &theta, revealed) - base;
        sum += gain;
        sum_sq += gain * gain;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    McEstimate { mean, std_error: (var / n).sqrt() }
}

/// VOI₁ exact; VPI and VPI_sub by sampling, clamped at zero.
pub fn monte_carlo_features<M: VoiFeatures>(mdp: &M, belief: &M::Belief, config: &FeatureConfig) -> BeliefFeatures {
    let n = mdp.spec().num_computations;
    let p = mdp.num_parameters();
    let all = vec![true; p];
    let vpi = vpi_subset_mc(mdp, belief, &all, config.mc_samples, belief_seed(config.seed, belief, 0)).mean;
    let masks: Vec<Vec<bool>> = (0..n).map(|c| (0..p).map(|i| mdp.relevance(c, i)).collect()).collect();
    let vpi_sub = if config.common_random_numbers {
        let base = mdp.termination_utility(belief);
        let mut rng = ChaCha8Rng::seed_from_u64(belief_seed(config.seed, belief, 0));
        let mut theta = Vec::with_capacity(p);
        let mut sums = vec![0.0; n];
        for _ in 0..config.mc_samples {
            mdp.sample_parameters(belief, &mut rng, &mut theta);
            for (c, mask) in masks.iter().enumerate() {
                sums[c] += mdp.utility_with_revealed(belief, &theta, mask) - base;
            }
        }
        sums.into_iter().map(|s| (s / config.mc_samples as f64).max(0.0)).collect()
    } else {
        masks
            .iter()
            .enumerate()
            .map(|(c, mask)| {
                let seed = belief_seed(config.seed, belief, c as u64 + 1);
                vpi_subset_mc(mdp, belief, mask, config.mc_samples, seed).mean.max(0.0)
            })
            .collect()
    };
    BeliefFeatures {
        vpi: vpi.max(0.0),
        voi1: (0..n).map(|c| voi1_enumerated(mdp, belief, c).max(0.0)).collect(),
        vpi_sub,
        informative: (0..n).map(|c| mdp.is_informative(belief, c)).collect(),
    }
}

/// Memoizing feature evaluator bound to one domain instance. Features do
/// not depend on the computation cost or on policy weights, so one engine
/// can serve every policy evaluated on the same domain.
pub struct FeatureEngine<M: VoiFeatures> {
    config: FeatureConfig,
    capacity: usize,
    cache: RwLock<FxHashMap<M::Belief, Arc<BeliefFeatures>>>,
}

impl<M: VoiFeatures> FeatureEngine<M> {
    /// Roughly this many bytes of cached features before the cache is reset.
    pub const DEFAULT_BUDGET_BYTES: usize = 256 << 20;

    pub fn new(mdp: &M, config: FeatureConfig) -> Result<Self> {
        config.validate()?;
        let per_entry = 96 + 17 * mdp.spec().num_computations + std::mem::size_of::<M::Belief>();
        Ok(Self::with_capacity(config, Self::DEFAULT_BUDGET_BYTES / per_entry))
    }

    pub fn with_capacity(config: FeatureConfig, capacity: usize) -> Self {
        FeatureEngine { config, capacity: capacity.max(1), cache: RwLock::new(FxHashMap::default()) }
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn get(&self, mdp: &M, belief: &M::Belief) -> Arc<BeliefFeatures> {
        if let Some(f) = self.cache.read().get(belief) {
            return Arc::clone(f);
        }
        let f = Arc::new(belief_features(mdp, belief, &self.config));
        let mut cache = self.cache.write();
        if cache.len() >= self.capacity {
            cache.clear();
        }
        cache.insert(belief.clone(), Arc::clone(&f));
        f
    }

    pub fn len(&self) -> usize {
        self.cache.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.cache.write().clear();
    }
}

impl<M: VoiFeatures> std::fmt::Debug for FeatureEngine<M> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeatureEngine").field("config", &self.config).field("cached", &self.len()).finish()
    }
}
