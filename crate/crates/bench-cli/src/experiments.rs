//! Experiment cells: one (domain, size, cost) combination each.

use std::sync::Arc;

use metalevel::domains::{BanditMdp, StoppingMdp, StoppingScoring, TornadoMdp, TreeMdp};
use metalevel::episode::{evaluate_policy, EvalReport};
use metalevel::features::{FeatureConfig, FeatureEngine, VoiFeatures};
use metalevel::optimizer::{optimize_weights, seed_block, BmpsObjective, SearchOutcome, SearchSpec};
use metalevel::par;
use metalevel::policies::{
    BlinkeredPolicy, BmpsPolicy, Deliberation, FullDeliberationPolicy, MetaGreedyPolicy, PolicyKind,
    RecursiveBlinkeredPolicy, UniformAllocationPolicy, WeightVector,
};
use metalevel::solver::{
    fit_voc_regression, reachable_layers, solve_layers, voc_regression_points, OptimalPolicy, Solvable, SolverConfig,
    ValueTable, VocRegression,
};
use metalevel::{BeliefState, MetaError, MetaMdp, Policy};
use serde::{Deserialize, Serialize};

use crate::config::{Domain, ExperimentConfig};
use crate::error::{BenchError, Result};
use crate::output::{ComparisonRow, ResultRow};
use crate::records::{WeightsFile, WeightsRecord};

const TEST_BLOCK: u64 = 4;

/// Largest tree height whose belief lattice fits the solver.
pub const MAX_SOLVABLE_TREE_HEIGHT: usize = 3;

/// First test-episode seed for a config seed; disjoint from training seeds.
pub fn test_seed(seed: u64) -> u64 {
    seed_block(seed, TEST_BLOCK)
}

pub type BoxedPolicy<M> = Box<dyn Policy<M>>;

/// A domain MDP the harness can build policies for.
pub trait CellMdp: VoiFeatures + Deliberation + Sized + 'static {
    /// Policies beyond BMPS, meta-greedy and full deliberation.
    fn special_policy(&self, kind: PolicyKind, table: Option<&Arc<ValueTable>>) -> Result<BoxedPolicy<Self>>;
}

fn unavailable(kind: PolicyKind, domain: &str) -> BenchError {
    BenchError::Config(format!("policy {kind} is not available for the {domain} domain"))
}

fn optimal<M: Solvable>(table: Option<&Arc<ValueTable>>) -> Result<BoxedPolicy<M>> {
    let table = table.ok_or_else(|| BenchError::MissingArtifact("value table for the optimal policy".into()))?;
    Ok(Box::new(OptimalPolicy::new(Arc::clone(table))))
}

impl CellMdp for StoppingMdp {
    fn special_policy(&self, kind: PolicyKind, table: Option<&Arc<ValueTable>>) -> Result<BoxedPolicy<Self>> {
        match kind {
            PolicyKind::Optimal => optimal(table),
            _ => Err(unavailable(kind, "stopping")),
        }
    }
}

impl CellMdp for BanditMdp {
    fn special_policy(&self, kind: PolicyKind, table: Option<&Arc<ValueTable>>) -> Result<BoxedPolicy<Self>> {
        match kind {
            PolicyKind::Optimal => optimal(table),
            PolicyKind::Blinkered => Ok(Box::new(BlinkeredPolicy)),
            _ => Err(unavailable(kind, "bandit")),
        }
    }
}

impl CellMdp for TreeMdp {
    fn special_policy(&self, kind: PolicyKind, table: Option<&Arc<ValueTable>>) -> Result<BoxedPolicy<Self>> {
        match kind {
            PolicyKind::Optimal => optimal(table),
            PolicyKind::RecursiveBlinkered => Ok(Box::new(RecursiveBlinkeredPolicy::new(self))),
            _ => Err(unavailable(kind, "tree")),
        }
    }
}

impl CellMdp for TornadoMdp {
    fn special_policy(&self, kind: PolicyKind, _table: Option<&Arc<ValueTable>>) -> Result<BoxedPolicy<Self>> {
        match kind {
            PolicyKind::Uniform => Ok(Box::new(UniformAllocationPolicy)),
            _ => Err(unavailable(kind, "tornado")),
        }
    }
}

/// Everything a cell's policies may need.
pub struct CellContext<M: VoiFeatures> {
    pub engine: Arc<FeatureEngine<M>>,
    pub weights: Option<WeightVector>,
    pub table: Option<Arc<ValueTable>>,
}

impl<M: VoiFeatures> CellContext<M> {
    pub fn new(mdp: &M) -> Result<Self> {
        Ok(CellContext { engine: Arc::new(FeatureEngine::new(mdp, FeatureConfig::default())?), weights: None, table: None })
    }
}

pub fn build_policy<M: CellMdp>(mdp: &M, kind: PolicyKind, ctx: &CellContext<M>) -> Result<BoxedPolicy<M>> {
    match kind {
        PolicyKind::Bmps => {
            let w = ctx.weights.ok_or_else(|| BenchError::MissingArtifact("BMPS weights".into()))?;
            Ok(Box::new(BmpsPolicy::new(mdp, w, Arc::clone(&ctx.engine))?))
        }
        PolicyKind::MetaGreedy => Ok(Box::new(MetaGreedyPolicy::new(Arc::clone(&ctx.engine)))),
        PolicyKind::Full => Ok(Box::new(FullDeliberationPolicy)),
        _ => mdp.special_policy(kind, ctx.table.as_ref()),
    }
}

/// Evaluates each policy on the same test seeds.
pub fn evaluate_policies<M: CellMdp>(
    mdp: &M,
    kinds: &[PolicyKind],
    ctx: &CellContext<M>,
    initial: &BeliefState<M::Belief>,
    n_episodes: usize,
    base_seed: u64,
) -> Result<Vec<(PolicyKind, EvalReport)>> {
    kinds
        .iter()
        .map(|&k| {
            let p = build_policy(mdp, k, ctx)?;
            Ok((k, evaluate_policy(mdp, initial, p.as_ref(), n_episodes, base_seed)?))
        })
        .collect()
}

/// Exact solution of a cell, refusing lattices that cannot fit.
pub fn solve<M: Solvable>(mdp: &M) -> Result<ValueTable> {
    let layers = reachable_layers(mdp, &SolverConfig::default())?;
    Ok(solve_layers(mdp, &layers)?)
}

pub fn solve_tree(mdp: &TreeMdp) -> Result<ValueTable> {
    if mdp.height > MAX_SOLVABLE_TREE_HEIGHT {
        // 3^(nodes − 1) beliefs at the last layer alone
        return Err(MetaError::ResourceLimit { cap: SolverConfig::default().state_cap }.into());
    }
    solve(mdp)
}

pub fn train_cell<M: VoiFeatures>(mdp: &M, spec: &SearchSpec) -> Result<SearchOutcome> {
    let engine = Arc::new(FeatureEngine::new(mdp, FeatureConfig::default())?);
    Ok(optimize_weights(&BmpsObjective::new(mdp, engine), spec)?)
}

pub fn stopping_mdp(cost: f64, config: &ExperimentConfig) -> Result<StoppingMdp> {
    let h = config.horizon.unwrap_or(StoppingMdp::DEFAULT_HORIZON);
    Ok(StoppingMdp::new(cost, h)?.with_scoring(config.scoring))
}

pub fn bandit_mdp(k: usize, cost: f64, config: &ExperimentConfig) -> Result<BanditMdp> {
    Ok(BanditMdp::new(k, cost, config.horizon.unwrap_or(BanditMdp::DEFAULT_HORIZON))?)
}

/// The cells of a config, in output order.
pub fn cells(config: &ExperimentConfig) -> Vec<(usize, f64)> {
    if config.domain == Domain::Tornado {
        return vec![(config.tornado.train_cities, 0.0)];
    }
    config.cell_sizes().into_iter().flat_map(|s| config.costs.iter().map(move |&c| (s, c))).collect()
}

/// Trained weights of one cell with the search that produced them.
#[derive(Debug, Clone)]
pub struct TrainedCell {
    pub record: WeightsRecord,
    pub outcome: SearchOutcome,
}

fn trained<M: VoiFeatures>(
    domain: Domain,
    size: usize,
    cost: f64,
    mdp: &M,
    spec: &SearchSpec,
) -> Result<TrainedCell> {
    let outcome = train_cell(mdp, spec)?;
    let record =
        WeightsRecord::new(domain, size, cost, mdp.spec().horizon, outcome.best.weights, spec.seed, outcome.best.mean_return);
    Ok(TrainedCell { record, outcome })
}

/// Trains every cell of the config; cells run in parallel.
pub fn train(config: &ExperimentConfig) -> Result<Vec<TrainedCell>> {
    config.validate()?;
    let spec = config.search.with_seed(config.seed);
    let cells = cells(config);
    let out = par::map_slice(&cells, |&(size, cost)| -> Result<TrainedCell> {
        match config.domain {
            Domain::Stopping => trained(Domain::Stopping, size, cost, &stopping_mdp(cost, config)?, &spec),
            Domain::Bandit => trained(Domain::Bandit, size, cost, &bandit_mdp(size, cost, config)?, &spec),
            Domain::Tree => trained(Domain::Tree, size, cost, &TreeMdp::new(size, cost)?, &spec),
            Domain::Tornado => {
                let mdp = TornadoMdp::new(size, config.tornado.train_budget)?;
                trained(Domain::Tornado, size, cost, &mdp, &spec)
            }
        }
    });
    out.into_iter().collect()
}

/// Test results of one cell, in the config's policy order.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub size: usize,
    pub cost: f64,
    pub reports: Vec<(PolicyKind, EvalReport)>,
}

impl CellResult {
    pub fn report(&self, kind: PolicyKind) -> Option<&EvalReport> {
        self.reports.iter().find(|(k, _)| *k == kind).map(|(_, r)| r)
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub cells: Vec<CellResult>,
    pub rows: Vec<ResultRow>,
    pub comparisons: Vec<ComparisonRow>,
}

fn evaluate_generic<M: CellMdp>(
    mdp: &M,
    kinds: &[PolicyKind],
    weights: Option<WeightVector>,
    table: Option<ValueTable>,
    n: usize,
    seed: u64,
) -> Result<Vec<(PolicyKind, EvalReport)>> {
    let mut ctx = CellContext::new(mdp)?;
    ctx.weights = weights;
    ctx.table = table.map(Arc::new);
    evaluate_policies(mdp, kinds, &ctx, &mdp.initial_state(), n, seed)
}

/// Evaluates every cell. BMPS rows need trained weights for their cell;
/// tree optimal rows are produced only where the tree can be solved.
pub fn evaluate(config: &ExperimentConfig, weights: Option<&WeightsFile>) -> Result<Evaluation> {
    config.validate()?;
    if config.domain == Domain::Tornado {
        return Err(BenchError::Config("tornado cells are evaluated by the tornado command".into()));
    }
    let hash = config.hash();
    let seed = test_seed(config.seed);
    let n = config.test_episodes;
    let mut cells_out = Vec::new();
    for (size, cost) in cells(config) {
        let w = if config.policies.contains(&PolicyKind::Bmps) {
            let file = weights.ok_or_else(|| BenchError::MissingArtifact("weights file for bmps rows".into()))?;
            Some(file.find(config.domain, size, cost)?.weights()?)
        } else {
            None
        };
        let wants_optimal = config.policies.contains(&PolicyKind::Optimal);
        let reports = match config.domain {
            Domain::Stopping => {
                let mdp = stopping_mdp(cost, config)?;
                let table = wants_optimal.then(|| solve(&mdp)).transpose()?;
                evaluate_generic(&mdp, &config.policies, w, table, n, seed)?
            }
            Domain::Bandit => {
                let mdp = bandit_mdp(size, cost, config)?;
                let table = wants_optimal.then(|| solve(&mdp)).transpose()?;
                evaluate_generic(&mdp, &config.policies, w, table, n, seed)?
            }
            Domain::Tree => {
                let mdp = TreeMdp::new(size, cost)?;
                let solvable = size <= MAX_SOLVABLE_TREE_HEIGHT;
                let kinds: Vec<PolicyKind> =
                    config.policies.iter().copied().filter(|&k| k != PolicyKind::Optimal || solvable).collect();
                let table = (wants_optimal && solvable).then(|| solve_tree(&mdp)).transpose()?;
                let scale = 1.0 / size as f64;
                evaluate_generic(&mdp, &kinds, w, table, n, seed)?
                    .into_iter()
                    .map(|(k, r)| (k, r.scaled(scale)))
                    .collect()
            }
            Domain::Tornado => unreachable!(),
        };
        cells_out.push(CellResult { size, cost, reports });
    }
    let domain = config.domain.name();
    let mut rows = Vec::new();
    let mut comparisons = Vec::new();
    for cell in &cells_out {
        for (k, r) in &cell.reports {
            rows.push(ResultRow::from_report(domain, cell.size, cell.cost, k.name(), r, &hash));
        }
        if let Some(bmps) = cell.report(PolicyKind::Bmps) {
            for (k, r) in cell.reports.iter().filter(|(k, _)| *k != PolicyKind::Bmps) {
                comparisons.push(ComparisonRow::paired(domain, cell.size, cell.cost, ("bmps", bmps), (k.name(), r), &hash)?);
            }
        }
    }
    Ok(Evaluation { cells: cells_out, rows, comparisons })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub cost: f64,
    pub coef_vpi: f64,
    pub coef_voi1: f64,
    pub coef_cost: f64,
    pub r_squared: f64,
    pub n: usize,
}

impl From<VocRegression> for RegressionRow {
    fn from(r: VocRegression) -> Self {
        RegressionRow {
            cost: r.cost,
            coef_vpi: r.coef_vpi,
            coef_voi1: r.coef_voi1,
            coef_cost: r.coef_cost,
            r_squared: r.r_squared,
            n: r.n,
        }
    }
}

/// Exact VOC against the features at one reachable (belief, step, computation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub step: usize,
    pub alpha: f64,
    pub beta: f64,
    pub vpi: f64,
    pub voi1: f64,
    pub voc: f64,
    pub fitted: f64,
}

fn all_states(mdp: &StoppingMdp) -> Result<(ValueTable, Vec<BeliefState<<StoppingMdp as MetaMdp>::Belief>>)> {
    let layers = reachable_layers(mdp, &SolverConfig::default())?;
    let table = solve_layers(mdp, &layers)?;
    let states = layers
        .iter()
        .enumerate()
        .flat_map(|(t, layer)| layer.iter().map(move |b| BeliefState::at_step(*b, t)))
        .collect();
    Ok((table, states))
}

/// VOC regression on the stopping domain at each cost.
pub fn regress(costs: &[f64], horizon: usize, scoring: StoppingScoring) -> Result<Vec<RegressionRow>> {
    costs
        .iter()
        .map(|&cost| {
            let mdp = StoppingMdp::new(cost, horizon)?.with_scoring(scoring);
            let (table, states) = all_states(&mdp)?;
            Ok(fit_voc_regression(&mdp, &table, &states, &FeatureConfig::default())?.into())
        })
        .collect()
}

/// Every regression observation at one cost with its fitted value.
pub fn regression_scatter(cost: f64, horizon: usize, scoring: StoppingScoring) -> Result<Vec<ScatterRow>> {
    let mdp = StoppingMdp::new(cost, horizon)?.with_scoring(scoring);
    let (table, states) = all_states(&mdp)?;
    let config = FeatureConfig::default();
    let fit = fit_voc_regression(&mdp, &table, &states, &config)?;
    Ok(voc_regression_points(&mdp, &table, &states, &config)?
        .into_iter()
        .map(|p| ScatterRow {
            step: p.state.step,
            alpha: p.state.belief.alpha,
            beta: p.state.belief.beta,
            vpi: p.vpi,
            voi1: p.voi1,
            voc: p.voc,
            fitted: fit.predict(p.vpi, p.voi1),
        })
        .collect())
}
