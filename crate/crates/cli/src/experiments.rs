//! Dataset builders; each returns the rows its command writes.

use anyhow::{bail, Context, Result};
use qls_core::optimizer::{run_strategy, DepthRecord, OptimizationTrace};
use qls_core::problem::{approximation_ratio, generate_regular_graph};
use qls_core::slice::{best_ts_bound, build_slice_model, delta_e_bound, slice_scan};
use qls_core::transition::{self, all_transition_states, ReportMode, TsIndex, TsKind};
use qls_core::{derivatives, CostDiagonal, ParameterVector, ProblemGraph, QlsError, Statevector};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;

pub struct Instance {
    pub n: usize,
    pub seed: u64,
    pub graph: ProblemGraph,
    pub cost: CostDiagonal,
}

impl Instance {
    pub fn from_graph(graph: ProblemGraph, seed: u64) -> Result<Self> {
        let cost = CostDiagonal::build(&graph)?;
        Ok(Self { n: graph.num_vertices(), seed, graph, cost })
    }
}

/// Every `(n, seed)` pair, sizes outermost.
pub fn instances(cfg: &ExperimentConfig) -> Result<Vec<Instance>> {
    let pairs: Vec<(usize, u64)> = cfg.n.iter().flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s))).collect();
    pairs
        .into_par_iter()
        .map(|(n, seed)| {
            let graph = generate_regular_graph(n, cfg.degree, cfg.weighted, seed)
                .with_context(|| format!("generating graph n={n} seed={seed}"))?;
            Instance::from_graph(graph, seed)
        })
        .collect()
}

pub fn trace(cfg: &ExperimentConfig, inst: &Instance, p_max: usize) -> Result<OptimizationTrace> {
    Ok(run_strategy(&inst.cost, Some(inst.seed), &cfg.strategy(), p_max, &cfg.strategy_options())?)
}

/// Instances paired with their strategy traces.
pub struct Ensemble {
    pub members: Vec<(Instance, OptimizationTrace)>,
}

impl Ensemble {
    pub fn build(cfg: &ExperimentConfig, p_max: usize) -> Result<Self> {
        let insts = instances(cfg)?;
        let traces: Vec<OptimizationTrace> =
            insts.par_iter().map(|inst| trace(cfg, inst, p_max)).collect::<Result<_>>()?;
        Ok(Self { members: insts.into_iter().zip(traces).collect() })
    }

    /// Minima up to `p_max` of every member.
    fn minima(&self, p_max: usize) -> impl Iterator<Item = (&Instance, &DepthRecord)> {
        self.members.iter().flat_map(move |(i, t)| t.records.iter().filter(move |r| r.p <= p_max).map(move |r| (i, r)))
    }

    fn require(&self, p_max: usize) -> Result<()> {
        if let Some((inst, t)) = self.members.iter().find(|(_, t)| t.records.len() < p_max) {
            bail!("trace of n={} seed={} stops at p={}, need {p_max}", inst.n, inst.seed, t.records.len());
        }
        Ok(())
    }
}

pub const TS_ACCURACY_HEADER: [&str; 9] =
    ["n", "p", "ts_index", "rel_error", "overlap_deviation", "b_or_bbar", "kappa1", "seed", "config_hash"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TsAccuracyRow {
    pub n: usize,
    pub p: usize,
    pub ts_index: String,
    pub rel_error: f64,
    pub overlap_deviation: f64,
    pub b_or_bbar: f64,
    pub kappa1: f64,
    pub seed: u64,
    pub config_hash: String,
}

/// One row per non-degenerate transition state of every minimum up to `p_max`.
pub fn ts_accuracy(cfg: &ExperimentConfig, ens: &Ensemble, hash: &str) -> Result<Vec<TsAccuracyRow>> {
    ens.require(cfg.p_max)?;
    let minima: Vec<(&Instance, &DepthRecord)> = ens.minima(cfg.p_max).collect();
    let per_minimum: Vec<Vec<TsAccuracyRow>> = minima
        .into_par_iter()
        .map(|(inst, rec)| -> Result<Vec<TsAccuracyRow>> {
            Ok(all_transition_states(&inst.cost, &rec.params(), ReportMode::Validate)?
                .into_iter()
                .filter(|r| !r.degenerate)
                .map(|r| TsAccuracyRow {
                    n: inst.n,
                    p: rec.p,
                    ts_index: r.index.label(),
                    rel_error: r.rel_error.expect("validated"),
                    overlap_deviation: r.overlap_deviation().expect("validated"),
                    b_or_bbar: r.b_or_bbar,
                    kappa1: r.kappa1.expect("validated"),
                    seed: inst.seed,
                    config_hash: hash.to_string(),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_minimum.into_iter().flatten().collect())
}

pub const CURVATURE_VARIANCE_HEADER: [&str; 7] =
    ["n", "p", "mean_abs_lambda_ts", "mean_variance", "mean_one_minus_r", "instances", "config_hash"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureVarianceRow {
    pub n: usize,
    pub p: usize,
    pub mean_abs_lambda_ts: f64,
    pub mean_variance: f64,
    pub mean_one_minus_r: f64,
    pub instances: usize,
    pub config_hash: String,
}

struct DepthSample {
    abs_lambda: f64,
    variance: f64,
    one_minus_r: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Per size and depth (including the `p = 0` state `|+⟩`): mean estimated
/// `|λ_TS|` at the first-layer transition state, mean energy variance and mean `1 - r`.
pub fn curvature_variance(cfg: &ExperimentConfig, ens: &Ensemble, hash: &str) -> Result<Vec<CurvatureVarianceRow>> {
    ens.require(cfg.p_max)?;
    let samples: Vec<Vec<DepthSample>> = ens
        .members
        .par_iter()
        .map(|(inst, tr)| -> Result<Vec<DepthSample>> {
            let cost = &inst.cost;
            let plus = Statevector::plus(inst.n)?;
            let zero = ParameterVector::zeros(0);
            let h0 = transition::coupling(cost, &zero, TsIndex::symmetric(1))?;
            let mut out = vec![DepthSample {
                abs_lambda: transition::lambda_estimate(TsKind::FirstLayer, h0).abs(),
                variance: plus.energy_variance(cost)?,
                one_minus_r: approximation_ratio(plus.energy(cost)?, cost)?,
            }];
            for rec in tr.records.iter().filter(|r| r.p <= cfg.p_max) {
                let h = transition::coupling(cost, &rec.params(), TsIndex::symmetric(1))?;
                out.push(DepthSample {
                    abs_lambda: transition::lambda_estimate(TsKind::FirstLayer, h).abs(),
                    variance: rec.variance,
                    one_minus_r: rec.one_minus_r,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &n in &cfg.n {
        let group: Vec<&Vec<DepthSample>> =
            ens.members.iter().zip(&samples).filter(|((i, _), _)| i.n == n).map(|(_, s)| s).collect();
        if group.is_empty() {
            continue;
        }
        for p in 0..=cfg.p_max {
            let at = || group.iter().map(move |s| &s[p]);
            rows.push(CurvatureVarianceRow {
                n,
                p,
                mean_abs_lambda_ts: mean(at().map(|s| s.abs_lambda)),
                mean_variance: mean(at().map(|s| s.variance)),
                mean_one_minus_r: mean(at().map(|s| s.one_minus_r)),
                instances: group.len(),
                config_hash: hash.to_string(),
            });
        }
    }
    Ok(rows)
}

pub const BOUND_HEADER: [&str; 8] =
    ["n", "p", "seed", "delta_e_bound", "best_ts_bound", "delta_e_optimized", "ratio", "config_hash"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    /// Closed-form first-layer bound; empty when that transition state is degenerate.
    pub delta_e_bound: Option<f64>,
    pub best_ts_bound: Option<f64>,
    /// `E(p + 1) - E(p)` along the strategy trace.
    pub delta_e_optimized: f64,
    pub ratio: Option<f64>,
    pub config_hash: String,
}

fn optional<T>(r: qls_core::Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(QlsError::Degenerate { .. } | QlsError::NoMinimum { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Predicted against realized improvement for every step `p → p + 1`, `p ≤ p_max`.
pub fn bound_vs_optim(cfg: &ExperimentConfig, ens: &Ensemble, hash: &str) -> Result<Vec<BoundRow>> {
    ens.require(cfg.p_max + 1)?;
    let steps: Vec<(&Instance, &[DepthRecord])> = ens
        .members
        .iter()
        .flat_map(|(inst, tr)| tr.records.windows(2).filter(|w| w[0].p <= cfg.p_max).map(move |w| (inst, w)))
        .collect();
    steps
        .into_par_iter()
        .map(|(inst, w)| {
            let params = w[0].params();
            let bound =
                optional(build_slice_model(&inst.cost, &inst.graph, &params, false).and_then(|m| delta_e_bound(&m)))?;
            let best = optional(best_ts_bound(&inst.cost, &inst.graph, &params))?.map(|b| b.value);
            let optimized = w[1].energy - w[0].energy;
            Ok(BoundRow {
                n: inst.n,
                p: w[0].p,
                seed: inst.seed,
                delta_e_bound: bound,
                best_ts_bound: best,
                delta_e_optimized: optimized,
                ratio: bound.filter(|_| optimized != 0.0).map(|b| b / optimized),
                config_hash: hash.to_string(),
            })
        })
        .collect()
}

pub const QUARTIC_HEADER: [&str; 6] = ["n", "p", "seed", "exact", "approx", "config_hash"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuarticRow {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub exact: f64,
    pub approx: f64,
    pub config_hash: String,
}

/// `∂²_{γ₁}E` at the first-layer transition state, exact and approximated.
pub fn quartic(cfg: &ExperimentConfig, ens: &Ensemble, hash: &str) -> Result<Vec<QuarticRow>> {
    ens.require(cfg.p_max)?;
    let minima: Vec<(&Instance, &DepthRecord)> = ens.minima(cfg.p_max).collect();
    minima
        .into_par_iter()
        .map(|(inst, rec)| {
            let q = derivatives::quartic_coefficient(&inst.cost, &rec.params())?;
            Ok(QuarticRow {
                n: inst.n,
                p: rec.p,
                seed: inst.seed,
                exact: q.exact,
                approx: q.approx,
                config_hash: hash.to_string(),
            })
        })
        .collect()
}

pub const SLICE_HEADER: [&str; 5] =
    ["epsilon", "exact_delta_e", "model_delta_e", "model_with_cubic_delta_e", "config_hash"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceCsvRow {
    pub epsilon: f64,
    pub exact_delta_e: f64,
    pub model_delta_e: f64,
    pub model_with_cubic_delta_e: f64,
    pub config_hash: String,
}

/// Uniform grid on `[-epsilon_max, epsilon_max]`.
pub fn epsilon_grid(epsilon_max: f64, points: usize) -> Vec<f64> {
    let step = 2.0 * epsilon_max / (points - 1) as f64;
    (0..points).map(|i| -epsilon_max + i as f64 * step).collect()
}

/// Scan through the first-layer transition state of the depth-`depth` minimum.
pub fn slice(cfg: &ExperimentConfig, inst: &Instance, hash: &str) -> Result<Vec<SliceCsvRow>> {
    let tr = trace(cfg, inst, cfg.depth)?;
    let params = tr.records.last().expect("depth ≥ 1").params();
    let model = build_slice_model(&inst.cost, &inst.graph, &params, true)?;
    Ok(slice_scan(&inst.cost, &model, &epsilon_grid(cfg.epsilon_max, cfg.points))?
        .into_iter()
        .map(|r| SliceCsvRow {
            epsilon: r.epsilon,
            exact_delta_e: r.exact_delta_e,
            model_delta_e: r.model_delta_e,
            model_with_cubic_delta_e: r.model_with_cubic_delta_e,
            config_hash: hash.to_string(),
        })
        .collect())
}

/// A trace record tagged with the config hash, one per JSONL line.
#[derive(Debug, Serialize)]
pub struct TraceLine<'a> {
    #[serde(flatten)]
    pub record: &'a qls_core::optimizer::DepthRecord,
    pub config_hash: &'a str,
}

pub fn trace_jsonl(trace: &OptimizationTrace, hash: &str) -> Result<String> {
    let mut out = String::new();
    for record in &trace.records {
        out.push_str(&serde_json::to_string(&TraceLine { record, config_hash: hash })?);
        out.push('\n');
    }
    Ok(out)
}
