use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use metalevel_bench::commands::{cmd_evaluate, cmd_regress, cmd_solve, cmd_train, cmd_tornado, WEIGHTS_FILE};
use metalevel_bench::{BenchError, Domain, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "metalevel-bench", version, about = "Train, evaluate and compare metalevel policies")]
struct Cli {
    /// Experiment config (TOML); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Protocol preset used when no config file is given.
    #[arg(long, global = true, value_enum, default_value_t = Preset::Paper)]
    preset: Preset,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Paper,
}

#[derive(Args, Clone, Default)]
struct CellArgs {
    #[arg(long)]
    domain: Option<String>,
    /// Arms (bandit) or cities (tornado); repeatable.
    #[arg(long)]
    k: Vec<usize>,
    /// Tree height; repeatable.
    #[arg(long)]
    height: Vec<usize>,
    /// Cost of one computation; repeatable.
    #[arg(long)]
    cost: Vec<f64>,
    /// Test episodes per cell.
    #[arg(long)]
    episodes: Option<usize>,
    /// Search iterations per trained cell.
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize BMPS weights for every cell.
    Train {
        #[command(flatten)]
        cell: CellArgs,
        /// Tornado simulation budget to train on.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Evaluate policies on every cell.
    Evaluate {
        #[command(flatten)]
        cell: CellArgs,
        /// Weights file (default: <out>/weights.toml).
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// BMPS against uniform allocation over the simulation-time grid.
    Tornado {
        #[command(flatten)]
        cell: CellArgs,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Pin the metareasoning time per simulation (hours) instead of measuring it.
        #[arg(long)]
        t_mr: Option<f64>,
        /// Hours until decisions are due.
        #[arg(long)]
        total_time: Option<f64>,
        /// Simulation durations in hours; repeatable.
        #[arg(long)]
        t_sim: Vec<f64>,
    },
    /// VOC regression on the stopping domain.
    Regress {
        #[command(flatten)]
        cell: CellArgs,
        /// Cost whose per-belief scatter data is exported.
        #[arg(long, default_value_t = 0.02)]
        scatter_cost: f64,
    },
    /// Solve one cell exactly and dump its value table.
    Solve {
        #[command(flatten)]
        cell: CellArgs,
    },
}

fn resolve(cli: &Cli, cell: &CellArgs, default_domain: Option<Domain>) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let domain = match (&cell.domain, default_domain) {
                (Some(d), _) => d.parse()?,
                (None, Some(d)) => d,
                (None, None) => return Err(BenchError::Config("--domain or --config is required".into())),
            };
            match cli.preset {
                Preset::Paper => ExperimentConfig::paper(domain),
            }
        }
    };
    if let (Some(d), Some(_)) = (&cell.domain, &cli.config) {
        let d: Domain = d.parse()?;
        if d != config.domain {
            return Err(BenchError::Config(format!("--domain {d} conflicts with config domain {}", config.domain)));
        }
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if !cell.k.is_empty() {
        config.sizes = cell.k.clone();
    }
    if !cell.height.is_empty() {
        config.sizes = cell.height.clone();
    }
    if !cell.cost.is_empty() {
        config.costs = cell.cost.clone();
    }
    if let Some(n) = cell.episodes {
        config.test_episodes = n;
        config.tornado.rollouts = n;
    }
    if let Some(n) = cell.iterations {
        config.search.iterations = n;
        config.search.top_k_rescore = config.search.top_k_rescore.min(n);
    }
    Ok(config)
}

fn single<T: Copy + std::fmt::Display>(values: &[T], what: &str) -> Result<T> {
    match values {
        [v] => Ok(*v),
        _ => Err(BenchError::Config(format!("solve needs exactly one {what}"))),
    }
}

fn run(cli: &Cli) -> Result<Vec<String>> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| BenchError::Config(format!("--jobs: {e}")))?;
    }
    let default_weights = cli.out.join(WEIGHTS_FILE);
    match &cli.command {
        Command::Train { cell, budget } => {
            let mut config = resolve(cli, cell, None)?;
            if config.domain == Domain::Tornado {
                if let Some(&k) = cell.k.first() {
                    config.tornado.train_cities = k;
                }
                if let Some(b) = budget {
                    config.tornado.train_budget = *b;
                }
            }
            config.validate()?;
            cmd_train(&config, &cli.out)
        }
        Command::Evaluate { cell, weights } => {
            let config = resolve(cli, cell, None)?;
            config.validate()?;
            let weights = weights.clone().unwrap_or(default_weights);
            let needs = config.policies.contains(&metalevel::policies::PolicyKind::Bmps);
            cmd_evaluate(&config, needs.then_some(weights.as_path()), &cli.out)
        }
        Command::Tornado { cell, weights, t_mr, total_time, t_sim } => {
            let mut config = resolve(cli, cell, Some(Domain::Tornado))?;
            if t_mr.is_some() {
                config.tornado.t_mr = *t_mr;
            }
            if let Some(t) = total_time {
                config.tornado.total_time = *t;
            }
            if !t_sim.is_empty() {
                config.tornado.t_sim = t_sim.clone();
            }
            let weights = weights.clone().unwrap_or(default_weights);
            cmd_tornado(&config, &weights, &cli.out)
        }
        Command::Regress { cell, scatter_cost } => {
            let config = resolve(cli, cell, Some(Domain::Stopping))?;
            if config.domain != Domain::Stopping {
                return Err(BenchError::Config("regress runs on the stopping domain".into()));
            }
            config.validate()?;
            cmd_regress(&config, *scatter_cost, &cli.out)
        }
        Command::Solve { cell } => {
            let config = resolve(cli, cell, None)?;
            let cost = single(&config.costs, "--cost")?;
            let size = if config.domain == Domain::Stopping { 1 } else { single(&config.sizes, "--k or --height")? };
            cmd_solve(&config, size, cost, &cli.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(2)
        }
    }
}
