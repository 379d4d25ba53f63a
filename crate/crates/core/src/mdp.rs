//! Metalevel MDP abstraction: beliefs, computations, the termination action
//! and the belief-update dynamics shared by every domain.

use std::fmt::Debug;
use std::hash::Hash;

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{MetaError, Result};

/// A metalevel action: run computation `i` or stop deliberating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetaAction {
    Compute(usize),
    Terminate,
}

impl MetaAction {
    pub fn is_terminate(&self) -> bool {
        matches!(self, MetaAction::Terminate)
    }
}

/// Cost, horizon and action count of a bound domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaMdpSpec {
    /// Reward units charged per computation.
    pub cost: f64,
    /// Maximum number of metalevel actions, the last of which must terminate.
    pub horizon: usize,
    pub num_computations: usize,
}

/// A domain belief together with the metalevel bookkeeping needed to run it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BeliefState<B> {
    pub belief: B,
    /// Metalevel actions taken so far.
    pub step: usize,
    /// Set once the termination action has been taken.
    pub absorbed: bool,
}

impl<B> BeliefState<B> {
    pub fn new(belief: B) -> Self {
        BeliefState { belief, step: 0, absorbed: false }
    }

    pub fn at_step(belief: B, step: usize) -> Self {
        BeliefState { belief, step, absorbed: false }
    }

    /// True when only the termination action remains (step h-1).
    pub fn must_terminate(&self, horizon: usize) -> bool {
        self.step + 1 >= horizon
    }

    /// Computations that may still be performed before the forced stop.
    pub fn computations_left(&self, horizon: usize) -> usize {
        horizon.saturating_sub(self.step + 1)
    }
}

pub type Successors<B> = SmallVec<[(B, f64); 2]>;

/// A metalevel MDP with finite transition support.
///
/// Implementors describe the belief dynamics and terminal reward; the
/// horizon bookkeeping lives in [`BeliefState`] and is handled by the free
/// functions in this module.
pub trait MetaMdp: Send + Sync {
    type Belief: Clone + Eq + Hash + Debug + Send + Sync;

    fn spec(&self) -> MetaMdpSpec;

    fn initial_belief(&self) -> Self::Belief;

    /// Number of environment parameters the belief ranges over.
    fn num_parameters(&self) -> usize;

    /// `r_meta(b, ⊥)`: expected utility of acting on the belief now.
    fn termination_utility(&self, belief: &Self::Belief) -> f64;

    /// Exact successor distribution of computation `c` (assumed in range).
    fn successors(&self, belief: &Self::Belief, c: usize) -> Successors<Self::Belief>;

    /// Draws one successor. Consumes exactly one uniform variate so that
    /// policies sharing a seed see common random numbers.
    fn sample_successor<R: Rng + ?Sized>(&self, belief: &Self::Belief, c: usize, rng: &mut R) -> Self::Belief {
        let succ = self.successors(belief, c);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let last = succ.len() - 1;
        for (i, (b, p)) in succ.into_iter().enumerate() {
            acc += p;
            if u < acc || i == last {
                return b;
            }
        }
        unreachable!("successor list is never empty")
    }

    /// Whether computation `c` can change the belief at all.
    fn is_informative(&self, belief: &Self::Belief, c: usize) -> bool {
        let succ = self.successors(belief, c);
        succ.len() > 1 || succ[0].0 != *belief
    }

    /// Relevance function: does computation `c` inform parameter `i`?
    fn relevance(&self, c: usize, i: usize) -> bool;

    fn initial_state(&self) -> BeliefState<Self::Belief> {
        BeliefState::new(self.initial_belief())
    }
}

fn check_index<M: MetaMdp>(mdp: &M, c: usize) -> Result<()> {
    let count = mdp.spec().num_computations;
    if c >= count {
        return Err(MetaError::InvalidAction { index: c, count });
    }
    Ok(())
}

/// Samples `T_meta(b, a, ·)` and returns the successor state with its reward.
pub fn sample_transition<M: MetaMdp, R: Rng + ?Sized>(
    mdp: &M,
    state: &BeliefState<M::Belief>,
    action: MetaAction,
    rng: &mut R,
) -> Result<(BeliefState<M::Belief>, f64)> {
    if state.absorbed {
        return Err(MetaError::Lifecycle("action taken on an absorbed belief"));
    }
    let spec = mdp.spec();
    if state.step >= spec.horizon {
        return Err(MetaError::Lifecycle("horizon exhausted"));
    }
    match action {
        MetaAction::Terminate => {
            let reward = mdp.termination_utility(&state.belief);
            let next = BeliefState { belief: state.belief.clone(), step: state.step + 1, absorbed: true };
            Ok((next, reward))
        }
        MetaAction::Compute(c) => {
            check_index(mdp, c)?;
            if state.must_terminate(spec.horizon) {
                return Err(MetaError::Lifecycle("the last metalevel action must terminate"));
            }
            let belief = mdp.sample_successor(&state.belief, c, rng);
            Ok((BeliefState::at_step(belief, state.step + 1), -spec.cost))
        }
    }
}

/// Exact support of `T_meta(b, c, ·)`.
pub fn enumerate_successors<M: MetaMdp>(
    mdp: &M,
    belief: &M::Belief,
    action: MetaAction,
) -> Result<Successors<M::Belief>> {
    match action {
        MetaAction::Terminate => Err(MetaError::TerminateNotComputation),
        MetaAction::Compute(c) => {
            check_index(mdp, c)?;
            Ok(mdp.successors(belief, c))
        }
    }
}

pub fn termination_utility<M: MetaMdp>(mdp: &M, belief: &M::Belief) -> f64 {
    mdp.termination_utility(belief)
}

/// A metalevel policy: maps a belief state to the next metalevel action.
pub trait Policy<M: MetaMdp>: Sync {
    fn act(&self, mdp: &M, state: &BeliefState<M::Belief>) -> Result<MetaAction>;
}

impl<M: MetaMdp, P: Policy<M> + ?Sized> Policy<M> for &P {
    fn act(&self, mdp: &M, state: &BeliefState<M::Belief>) -> Result<MetaAction> {
        (**self).act(mdp, state)
    }
}

impl<M: MetaMdp> Policy<M> for Box<dyn Policy<M> + Send + Sync + '_> {
    fn act(&self, mdp: &M, state: &BeliefState<M::Belief>) -> Result<MetaAction> {
        (**self).act(mdp, state)
    }
}
