//! Concrete metalevel MDPs.

mod bandit;
mod stopping;
mod tornado;
mod tree;

use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

pub use bandit::{bandit_terminal, BanditBelief, BanditMdp};
pub use stopping::{stopping_terminal, StoppingBelief, StoppingMdp, StoppingScoring};
pub use tornado::{
    tornado_budget, tornado_terminal, TornadoBelief, TornadoMdp, TornadoTimingModel, DAMAGE_PRIOR,
    EVACUATION_COST, FALSE_NEGATIVE_COST,
};
pub use tree::{tree_terminal, TreeBelief, TreeMdp, TreeTopology, MAX_TREE_HEIGHT};

/// Parameters of a Beta distribution. Equality and hashing are bitwise, which
/// is exact here because beliefs only ever move by unit increments from a
/// fixed prior.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub const UNIFORM: BetaParams = BetaParams { alpha: 1.0, beta: 1.0 };

    pub fn new(alpha: f64, beta: f64) -> Self {
        BetaParams { alpha, beta }
    }

    #[inline]
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.alpha + self.beta
    }

    #[inline]
    pub fn observe(&self, success: bool) -> Self {
        if success {
            BetaParams { alpha: self.alpha + 1.0, beta: self.beta }
        } else {
            BetaParams { alpha: self.alpha, beta: self.beta + 1.0 }
        }
    }

    pub fn is_valid(&self) -> bool {
        self.alpha > 0.0 && self.beta > 0.0 && self.alpha.is_finite() && self.beta.is_finite()
    }
}

impl PartialEq for BetaParams {
    fn eq(&self, other: &Self) -> bool {
        self.alpha.to_bits() == other.alpha.to_bits() && self.beta.to_bits() == other.beta.to_bits()
    }
}

impl Eq for BetaParams {}

impl Hash for BetaParams {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.alpha.to_bits().hash(state);
        self.beta.to_bits().hash(state);
    }
}

impl std::fmt::Display for BetaParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.alpha, self.beta)
    }
}
