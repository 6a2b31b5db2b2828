//! Command-line surface of `qls`.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qls_core::{generate_regular_graph, ProblemGraph};

use crate::config::{Experiment, ExperimentConfig, StrategyName};
use crate::experiments::{self, Ensemble, Instance};
use crate::output::{check_writable, write_csv, write_meta};

#[derive(Debug, Parser)]
#[command(name = "qls", version, about = "QAOA landscape experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Graph utilities.
    Graph {
        #[command(subcommand)]
        action: GraphAction,
    },
    /// Run an optimization strategy and write its trace as JSONL.
    Run(CommonArgs),
    /// Estimated against exact transition-state eigenpairs.
    TsAccuracy(CommonArgs),
    /// Mean curvature, energy variance and 1-r per depth.
    CurvatureVariance(CommonArgs),
    /// Quartic lower bound against realized improvement.
    BoundVsOptim(CommonArgs),
    /// Exact and approximated quartic coefficient.
    Quartic(CommonArgs),
    /// Energy scan through the first-layer transition state.
    Slice(CommonArgs),
}

#[derive(Debug, Subcommand)]
pub enum GraphAction {
    /// Generate a random regular graph.
    Gen(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON object whose keys override the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
    /// Problem sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub weighted: bool,
    /// Explicit graph seeds, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "instances")]
    pub seed: Option<Vec<u64>>,
    /// Number of consecutive seeds starting at --seed-start.
    #[arg(long)]
    pub instances: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub seed_start: u64,
    #[arg(long)]
    pub p_max: Option<usize>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyName>,
    #[arg(long)]
    pub perturbations: Option<usize>,
    #[arg(long)]
    pub fourier_scale: Option<f64>,
    #[arg(long)]
    pub fourier_seed: Option<u64>,
    #[arg(long)]
    pub step: Option<f64>,
    /// Depth of the minimum scanned by `slice`.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub epsilon_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Graph file used instead of a generated instance.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Worker threads (QLS_THREADS also applies).
    #[arg(long)]
    pub threads: Option<usize>,
}

impl CommonArgs {
    /// Defaults, then flags, then the config file.
    pub fn resolve(&self, experiment: Experiment) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::defaults(experiment);
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        set!(
            n,
            degree,
            p_max,
            strategy,
            perturbations,
            fourier_scale,
            fourier_seed,
            step,
            depth,
            epsilon_max,
            points,
            out
        );
        cfg.weighted |= self.weighted;
        if let Some(seeds) = &self.seed {
            cfg.seeds = seeds.clone();
        } else if let Some(k) = self.instances {
            cfg.seeds = (self.seed_start..self.seed_start + k).collect();
        }
        cfg.graph = self.graph.clone().or(cfg.graph);
        cfg.threads = self.threads.or(cfg.threads);
        match &self.config {
            Some(path) => cfg.overlay_file(path),
            None => {
                cfg.validate()?;
                Ok(cfg)
            }
        }
    }
}

fn configure_threads(cfg: &ExperimentConfig) -> Result<()> {
    let from_env = match std::env::var("QLS_THREADS") {
        Ok(v) => Some(v.trim().parse::<usize>().context("QLS_THREADS must be a positive integer")?),
        Err(_) => None,
    };
    let limit = match (cfg.threads, from_env) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    if let Some(threads) = limit.filter(|&t| t > 0) {
        // A pool built earlier in the process keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(())
}

fn load_graph(path: &PathBuf) -> Result<(ProblemGraph, Vec<u8>)> {
    let bytes = fs::read(path).with_context(|| format!("reading graph {}", path.display()))?;
    let text = String::from_utf8(bytes.clone()).context("graph file is not UTF-8")?;
    Ok((ProblemGraph::from_json(&text)?, bytes))
}

/// A single instance: the graph file when given, otherwise the first `(n, seed)`.
fn single_instance(cfg: &ExperimentConfig) -> Result<(Instance, Vec<u8>)> {
    if let Some(path) = &cfg.graph {
        let (graph, bytes) = load_graph(path)?;
        let seed = graph.seed().unwrap_or(0);
        return Ok((Instance::from_graph(graph, seed)?, bytes));
    }
    let (Some(&n), Some(&seed)) = (cfg.n.first(), cfg.seeds.first()) else {
        bail!("need a --graph file or at least one n and one seed");
    };
    let graph = generate_regular_graph(n, cfg.degree, cfg.weighted, seed)?;
    Ok((Instance::from_graph(graph, seed)?, Vec::new()))
}

pub fn run(cli: Cli) -> Result<()> {
    let (experiment, args) = match &cli.command {
        Command::Graph { action: GraphAction::Gen(a) } => (Experiment::GraphGen, a),
        Command::Run(a) => (Experiment::Run, a),
        Command::TsAccuracy(a) => (Experiment::TsAccuracy, a),
        Command::CurvatureVariance(a) => (Experiment::CurvatureVariance, a),
        Command::BoundVsOptim(a) => (Experiment::BoundVsOptim, a),
        Command::Quartic(a) => (Experiment::Quartic, a),
        Command::Slice(a) => (Experiment::Slice, a),
    };
    let cfg = args.resolve(experiment)?;
    configure_threads(&cfg)?;
    let out = cfg.out.clone();
    check_writable(&out, args.force)?;
    let hash = match experiment {
        Experiment::GraphGen => {
            let (Some(&n), Some(&seed)) = (cfg.n.first(), cfg.seeds.first()) else {
                bail!("graph gen needs --n and --seed");
            };
            let graph = generate_regular_graph(n, cfg.degree, cfg.weighted, seed)?;
            let hash = cfg.hash(&[]);
            fs::write(&out, graph.to_json() + "\n").with_context(|| format!("writing {}", out.display()))?;
            hash
        }
        Experiment::Run => {
            let (inst, extra) = single_instance(&cfg)?;
            let hash = cfg.hash(&extra);
            let trace = experiments::trace(&cfg, &inst, cfg.p_max)?;
            fs::write(&out, experiments::trace_jsonl(&trace, &hash)?)
                .with_context(|| format!("writing {}", out.display()))?;
            hash
        }
        Experiment::TsAccuracy => {
            let hash = cfg.hash(&[]);
            write_csv(
                &out,
                &experiments::TS_ACCURACY_HEADER,
                &experiments::ts_accuracy(&cfg, &Ensemble::build(&cfg, cfg.p_max)?, &hash)?,
            )?;
            hash
        }
        Experiment::CurvatureVariance => {
            let hash = cfg.hash(&[]);
            let rows = experiments::curvature_variance(&cfg, &Ensemble::build(&cfg, cfg.p_max)?, &hash)?;
            write_csv(&out, &experiments::CURVATURE_VARIANCE_HEADER, &rows)?;
            hash
        }
        Experiment::BoundVsOptim => {
            let hash = cfg.hash(&[]);
            write_csv(
                &out,
                &experiments::BOUND_HEADER,
                &experiments::bound_vs_optim(&cfg, &Ensemble::build(&cfg, cfg.p_max + 1)?, &hash)?,
            )?;
            hash
        }
        Experiment::Quartic => {
            let hash = cfg.hash(&[]);
            write_csv(
                &out,
                &experiments::QUARTIC_HEADER,
                &experiments::quartic(&cfg, &Ensemble::build(&cfg, cfg.p_max)?, &hash)?,
            )?;
            hash
        }
        Experiment::Slice => {
            let (inst, extra) = single_instance(&cfg)?;
            let hash = cfg.hash(&extra);
            write_csv(&out, &experiments::SLICE_HEADER, &experiments::slice(&cfg, &inst, &hash)?)?;
            hash
        }
    };
    write_meta(&out, &cfg, &hash)
}
