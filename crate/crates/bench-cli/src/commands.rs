//! The five subcommands. Each writes its files under `out` and returns the
//! lines it wants printed.

use std::io::BufWriter;
use std::path::{Path, PathBuf};

use metalevel::domains::TreeMdp;
use metalevel::solver::{Solvable, ValueTable};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Domain, ExperimentConfig};
use crate::error::{BenchError, Result};
use crate::experiments::{self, bandit_mdp, regression_scatter, solve, solve_tree, stopping_mdp, test_seed};
use crate::output::{write_csv, RESULTS_SCHEMA};
use crate::records::WeightsFile;
use crate::tornado;

pub const WEIGHTS_FILE: &str = "weights.toml";

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))
}

fn cost_tag(cost: f64) -> String {
    format!("{cost:e}")
}

fn meta(config: &ExperimentConfig) -> String {
    format!("domain={} config_hash={}", config.domain, config.hash())
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    source: &'static str,
    w1: f64,
    w2: f64,
    w3: f64,
    w4: f64,
    mean: f64,
    std_error: f64,
    best_so_far: f64,
}

/// Trains every cell, merges the records into `out/weights.toml` and writes
/// one trace CSV per cell.
pub fn cmd_train(config: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    ensure_dir(out)?;
    let trained = experiments::train(config)?;
    let weights_path = out.join(WEIGHTS_FILE);
    let existing = match WeightsFile::load(&weights_path) {
        Ok(f) => f,
        Err(BenchError::MissingArtifact(_)) => WeightsFile::new(vec![]),
        Err(e) => return Err(e),
    };
    let mut lines = Vec::new();
    for t in &trained {
        let r = &t.record;
        let rows: Vec<TraceRow> = t
            .outcome
            .trace
            .entries
            .iter()
            .map(|e| {
                let w = e.candidate.weights;
                TraceRow {
                    iteration: e.iteration,
                    source: match e.source {
                        metalevel::optimizer::ProbeSource::Initial => "initial",
                        metalevel::optimizer::ProbeSource::Model => "model",
                        metalevel::optimizer::ProbeSource::QuasiRandom => "quasi_random",
                    },
                    w1: w.w1,
                    w2: w.w2,
                    w3: w.w3,
                    w4: w.w4,
                    mean: e.candidate.mean_return,
                    std_error: e.candidate.std_error,
                    best_so_far: e.best_so_far,
                }
            })
            .collect();
        let name = format!("trace_{}_{}_{}.csv", r.domain, r.size, cost_tag(r.cost));
        write_csv(&out.join(&name), "metalevel-trace v1", &meta(config), &rows)?;
        lines.push(format!(
            "{} size={} cost={} -> w=({:.4}, {:.4}, {:.4}, {:.3}) train_mean={:.5} best_probe={:.5}",
            r.domain,
            r.size,
            r.cost,
            r.w1,
            r.w2,
            r.w3,
            r.w4,
            r.train_mean,
            t.outcome.trace.final_best().unwrap_or(f64::NAN)
        ));
    }
    existing.merge(trained.into_iter().map(|t| t.record).collect()).save(&weights_path)?;
    lines.push(format!("wrote {}", weights_path.display()));
    Ok(lines)
}

/// Evaluates every cell into `out/results_<domain>.csv` and the paired BMPS
/// comparisons into `out/comparisons_<domain>.csv`.
pub fn cmd_evaluate(config: &ExperimentConfig, weights: Option<&Path>, out: &Path) -> Result<Vec<String>> {
    ensure_dir(out)?;
    let file = weights.map(WeightsFile::load).transpose()?;
    let eval = experiments::evaluate(config, file.as_ref())?;
    let results = out.join(format!("results_{}.csv", config.domain));
    let comparisons = out.join(format!("comparisons_{}.csv", config.domain));
    let mut m = meta(config);
    if config.domain == Domain::Tree {
        m.push_str(" normalization=per_level");
    }
    write_csv(&results, RESULTS_SCHEMA, &m, &eval.rows)?;
    write_csv(&comparisons, "metalevel-comparisons v1", &m, &eval.comparisons)?;
    let mut lines: Vec<String> = eval
        .rows
        .iter()
        .map(|r| format!("{} {:>2} {:<9} {:<20} {:.5} [{:.5}, {:.5}]", r.domain, r.k_or_h, r.cost, r.policy, r.mean, r.ci_lo, r.ci_hi))
        .collect();
    lines.push(format!("wrote {} and {}", results.display(), comparisons.display()));
    Ok(lines)
}

/// Tornado timing sweep with the reusable weights record.
pub fn cmd_tornado(config: &ExperimentConfig, weights: &Path, out: &Path) -> Result<Vec<String>> {
    config.validate()?;
    if config.domain != Domain::Tornado {
        return Err(BenchError::Config(format!("the tornado command needs domain = tornado, got {}", config.domain)));
    }
    ensure_dir(out)?;
    let file = WeightsFile::load(weights)?;
    let w = file.find(Domain::Tornado, config.tornado.train_cities, 0.0)?.weights()?;
    let hash = config.hash();
    let (t_mrs, cells) = tornado::run_sweep(&config.sizes, &config.tornado, w, test_seed(config.seed))?;
    let rows: Vec<_> = cells.iter().flat_map(|c| c.result_rows(&hash)).collect();
    let budgets: Vec<_> = cells.iter().map(|c| c.budget_row()).collect();
    let advantages: Vec<_> = cells.iter().map(|c| c.advantage_row(&hash)).collect();
    let m = format!("{} total_time={}", meta(config), config.tornado.total_time);
    write_csv(&out.join("results_tornado.csv"), RESULTS_SCHEMA, &m, &rows)?;
    write_csv(&out.join("tornado_budgets.csv"), "metalevel-tornado-budgets v1", &m, &budgets)?;
    write_csv(&out.join("tornado_advantage.csv"), "metalevel-tornado-advantage v1", &m, &advantages)?;
    let mut lines: Vec<String> = t_mrs.iter().map(|(k, t)| format!("k={k}: t_MR = {:.3e} h ({:.3} ms)", t, t * 3.6e6)).collect();
    for c in &cells {
        lines.push(format!(
            "k={:>2} t_sim={:<5} n_sim {:>3}/{:>3}  bmps {:.4}  uniform {:.4}  diff {:+.4} [{:+.4}, {:+.4}]",
            c.k, c.t_sim, c.n_sim_bmps, c.n_sim_uniform, c.bmps.mean, c.uniform.mean, c.advantage.mean, c.advantage.ci_lo, c.advantage.ci_hi
        ));
    }
    Ok(lines)
}

/// Regression table over the stopping cost grid, plus the scatter data of
/// one cost.
pub fn cmd_regress(config: &ExperimentConfig, scatter_cost: f64, out: &Path) -> Result<Vec<String>> {
    ensure_dir(out)?;
    let horizon = config.horizon.unwrap_or(metalevel::domains::StoppingMdp::DEFAULT_HORIZON);
    let rows = experiments::regress(&config.costs, horizon, config.scoring)?;
    let scatter = regression_scatter(scatter_cost, horizon, config.scoring)?;
    let m = format!("domain=stopping horizon={horizon} scoring={:?}", config.scoring);
    write_csv(&out.join("regression.csv"), "metalevel-regression v1", &m, &rows)?;
    let scatter_path = out.join(format!("regression_scatter_{}.csv", cost_tag(scatter_cost)));
    write_csv(&scatter_path, "metalevel-regression-scatter v1", &m, &scatter)?;
    Ok(rows
        .iter()
        .map(|r| {
            format!(
                "cost={:<7} VOC ≈ {:+.3}·VPI {:+.3}·VOI1 {:+.3}·cost  R²={:.4}  n={}",
                r.cost, r.coef_vpi, r.coef_voi1, r.coef_cost, r.r_squared, r.n
            )
        })
        .collect())
}

fn dump_table<M: Solvable>(mdp: &M, table: &ValueTable, id: &str, out: &Path) -> Result<(PathBuf, Vec<String>)> {
    let hash = hex::encode(&Sha256::digest(id.as_bytes())[..8]);
    let path = out.join(format!("value_table_{}.csv", id.replace([' ', '='], "_")));
    let f = std::fs::File::create(&path).map_err(|e| BenchError::io(&path, e))?;
    table.write_csv(BufWriter::new(f), &hash).map_err(|e| BenchError::io(&path, e))?;
    let b0 = mdp.initial_belief();
    let v0 = table.value(mdp, &b0, 0)?;
    let a0 = table.optimal_action(mdp, &b0, 0)?;
    let lines = vec![
        format!("{id}: {} states over {} steps", table.num_states(), table.num_layers()),
        format!("V*(b0) = {v0:.6}, optimal first action {a0:?}"),
    ];
    Ok((path, lines))
}

/// Solves one cell exactly and dumps its value table.
pub fn cmd_solve(config: &ExperimentConfig, size: usize, cost: f64, out: &Path) -> Result<Vec<String>> {
    ensure_dir(out)?;
    let id = format!("{} size={size} cost={}", config.domain, cost_tag(cost));
    let (path, mut lines) = match config.domain {
        Domain::Stopping => {
            let mdp = stopping_mdp(cost, config)?;
            dump_table(&mdp, &solve(&mdp)?, &id, out)?
        }
        Domain::Bandit => {
            let mdp = bandit_mdp(size, cost, config)?;
            dump_table(&mdp, &solve(&mdp)?, &id, out)?
        }
        Domain::Tree => {
            let mdp = TreeMdp::new(size, cost)?;
            dump_table(&mdp, &solve_tree(&mdp)?, &id, out)?
        }
        Domain::Tornado => return Err(BenchError::Config("the tornado domain has no exact solver".into())),
    };
    lines.push(format!("wrote {}", path.display()));
    Ok(lines)
}
