//! Metalevel policies: BMPS and the baselines it is compared against.

mod baselines;
mod blinkered;
mod bmps;
mod recursive;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MetaError, Result};
use crate::mdp::{BeliefState, MetaAction, MetaMdp};

pub use baselines::{Deliberation, FullDeliberationPolicy, ImmediateTerminatePolicy, MetaGreedyPolicy, UniformAllocationPolicy};
pub use blinkered::BlinkeredPolicy;
pub use bmps::{BmpsPolicy, WeightVector};
pub use recursive::{recursive_blinkered_subproblem, RecursiveBlinkeredPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Bmps,
    MetaGreedy,
    Full,
    Uniform,
    Blinkered,
    RecursiveBlinkered,
    Optimal,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::Bmps,
        PolicyKind::MetaGreedy,
        PolicyKind::Full,
        PolicyKind::Uniform,
        PolicyKind::Blinkered,
        PolicyKind::RecursiveBlinkered,
        PolicyKind::Optimal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Bmps => "bmps",
            PolicyKind::MetaGreedy => "meta_greedy",
            PolicyKind::Full => "full",
            PolicyKind::Uniform => "uniform",
            PolicyKind::Blinkered => "blinkered",
            PolicyKind::RecursiveBlinkered => "recursive_blinkered",
            PolicyKind::Optimal => "optimal",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = MetaError;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| MetaError::Config(format!("unknown policy '{s}'")))
    }
}

pub(crate) fn check_live<B>(state: &BeliefState<B>) -> Result<()> {
    if state.absorbed {
        Err(MetaError::Lifecycle("policy asked to act on an absorbed belief"))
    } else {
        Ok(())
    }
}

/// Picks the highest-scoring computation if its score is strictly positive,
/// preferring the lowest index on ties; otherwise terminates.
pub fn argmax_or_terminate(scores: impl IntoIterator<Item = (usize, f64)>) -> MetaAction {
    let mut best: Option<(usize, f64)> = None;
    for (c, v) in scores {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((c, v));
        }
    }
    match best {
        Some((c, v)) if v > 0.0 => MetaAction::Compute(c),
        _ => MetaAction::Terminate,
    }
}

/// Shared preamble: lifecycle check and the forced stop at step h−1.
pub(crate) fn forced<M: MetaMdp>(mdp: &M, state: &BeliefState<M::Belief>) -> Result<Option<MetaAction>> {
    check_live(state)?;
    if state.must_terminate(mdp.spec().horizon) {
        Ok(Some(MetaAction::Terminate))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("dqn".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn argmax_rules() {
        assert_eq!(argmax_or_terminate([(0, 0.1), (1, 0.1)]), MetaAction::Compute(0));
        assert_eq!(argmax_or_terminate([(0, 0.1), (1, 0.2)]), MetaAction::Compute(1));
        assert_eq!(argmax_or_terminate([(0, 0.0), (1, -0.2)]), MetaAction::Terminate);
        assert_eq!(argmax_or_terminate(std::iter::empty()), MetaAction::Terminate);
    }
}
