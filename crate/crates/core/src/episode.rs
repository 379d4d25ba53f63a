//! Episode simulation and Monte-Carlo policy evaluation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MetaError, Result};
use crate::mdp::{sample_transition, BeliefState, MetaAction, MetaMdp, Policy};
use crate::par;

/// z-value of a two-sided 95% normal interval.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace<B> {
    pub actions: Vec<MetaAction>,
    pub rewards: Vec<f64>,
    pub final_belief: BeliefState<B>,
    pub return_total: f64,
    pub seed: u64,
}

impl<B> EpisodeTrace<B> {
    pub fn num_computations(&self) -> usize {
        self.actions.len().saturating_sub(1)
    }
}

pub fn episode_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Core loop. `record` sees every (action, reward) pair in order.
fn simulate<M, P, F>(
    mdp: &M,
    initial: &BeliefState<M::Belief>,
    policy: &P,
    seed: u64,
    mut record: F,
) -> Result<BeliefState<M::Belief>>
where
    M: MetaMdp,
    P: Policy<M> + ?Sized,
    F: FnMut(MetaAction, f64),
{
    let horizon = mdp.spec().horizon;
    let mut rng = episode_rng(seed);
    let mut state = initial.clone();
    loop {
        let action = if state.must_terminate(horizon) {
            MetaAction::Terminate
        } else {
            policy.act(mdp, &state)?
        };
        let (next, reward) = sample_transition(mdp, &state, action, &mut rng)?;
        record(action, reward);
        state = next;
        if state.absorbed {
            return Ok(state);
        }
    }
}

/// Runs one episode, forcing termination at step h-1.
pub fn run_episode<M, P>(
    mdp: &M,
    initial: &BeliefState<M::Belief>,
    policy: &P,
    seed: u64,
) -> Result<EpisodeTrace<M::Belief>>
where
    M: MetaMdp,
    P: Policy<M> + ?Sized,
{
    if initial.absorbed {
        return Err(MetaError::Lifecycle("episode started from an absorbed belief"));
    }
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    let final_belief = simulate(mdp, initial, policy, seed, |a, r| {
        actions.push(a);
        rewards.push(r);
    })?;
    let return_total = rewards.iter().sum();
    Ok(EpisodeTrace { actions, rewards, final_belief, return_total, seed })
}

/// Return and number of computations of one episode, without building a trace.
pub fn episode_return<M, P>(
    mdp: &M,
    initial: &BeliefState<M::Belief>,
    policy: &P,
    seed: u64,
) -> Result<(f64, usize)>
where
    M: MetaMdp,
    P: Policy<M> + ?Sized,
{
    let mut total = 0.0;
    let mut computations = 0usize;
    simulate(mdp, initial, policy, seed, |a, r| {
        total += r;
        if !a.is_terminate() {
            computations += 1;
        }
    })?;
    Ok((total, computations))
}

/// Summary of a batch of episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean: f64,
    pub sd: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
    pub base_seed: u64,
    pub mean_computations: f64,
    #[serde(skip)]
    pub returns: Vec<f64>,
}

impl EvalReport {
    pub fn from_returns(returns: Vec<f64>, computations: &[usize], base_seed: u64) -> Self {
        let n = returns.len();
        let (mean, sd) = mean_sd(&returns);
        let half = Z95 * sd / (n as f64).sqrt();
        let mean_computations = if computations.is_empty() {
            0.0
        } else {
            computations.iter().sum::<usize>() as f64 / computations.len() as f64
        };
        EvalReport { mean, sd, ci_lo: mean - half, ci_hi: mean + half, n, base_seed, mean_computations, returns }
    }

    pub fn std_error(&self) -> f64 {
        self.sd / (self.n as f64).sqrt()
    }

    pub fn ci_half_width(&self) -> f64 {
        0.5 * (self.ci_hi - self.ci_lo)
    }

    /// Scales every return (used for per-height normalisation of tree results).
    pub fn scaled(&self, factor: f64) -> EvalReport {
        let returns: Vec<f64> = self.returns.iter().map(|r| r * factor).collect();
        let (lo, hi) = if factor >= 0.0 {
            (self.ci_lo * factor, self.ci_hi * factor)
        } else {
            (self.ci_hi * factor, self.ci_lo * factor)
        };
        EvalReport {
            mean: self.mean * factor,
            sd: self.sd * factor.abs(),
            ci_lo: lo,
            ci_hi: hi,
            n: self.n,
            base_seed: self.base_seed,
            mean_computations: self.mean_computations,
            returns,
        }
    }
}

/// Sample mean and (n-1)-normalised standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Evaluates a policy over `n_episodes` episodes seeded `base_seed..base_seed+n`.
pub fn evaluate_policy<M, P>(
    mdp: &M,
    initial: &BeliefState<M::Belief>,
    policy: &P,
    n_episodes: usize,
    base_seed: u64,
) -> Result<EvalReport>
where
    M: MetaMdp,
    P: Policy<M> + ?Sized,
{
    if n_episodes == 0 {
        return Err(MetaError::Config("n_episodes must be at least 1".into()));
    }
    let results = par::try_map_range(n_episodes, |i| {
        episode_return(mdp, initial, policy, base_seed.wrapping_add(i as u64))
    })?;
    let (returns, computations): (Vec<f64>, Vec<usize>) = results.into_iter().unzip();
    Ok(EvalReport::from_returns(returns, &computations, base_seed))
}

/// Paired difference `a - b` over common seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedDiff {
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
}

impl PairedDiff {
    pub fn significantly_positive(&self) -> bool {
        self.ci_lo > 0.0
    }
}

pub fn paired_difference(a: &EvalReport, b: &EvalReport) -> Result<PairedDiff> {
    if a.base_seed != b.base_seed || a.returns.len() != b.returns.len() {
        return Err(MetaError::Config("paired comparison needs identical seed sets".into()));
    }
    let diffs: Vec<f64> = a.returns.iter().zip(&b.returns).map(|(x, y)| x - y).collect();
    let (mean, sd) = mean_sd(&diffs);
    let half = Z95 * sd / (diffs.len() as f64).sqrt();
    Ok(PairedDiff { mean, ci_lo: mean - half, ci_hi: mean + half, n: diffs.len() })
}
