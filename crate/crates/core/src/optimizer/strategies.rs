//! Depth-increasing strategies built on transition states.

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bfgs::{bfgs, minimize, BfgsOptions, OptimizationRecord};
use super::fourier::{rms, FourierAmplitudes};
use crate::derivatives::{energy, energy_and_gradient, hessian};
use crate::error::{QlsError, Result};
use crate::linalg::SymmetricSpectrum;
use crate::problem::{approximation_ratio, CostDiagonal};
use crate::statevector::{prepare_qaoa_state, ParameterVector};
use crate::transition::{self, TsIndex};

/// Default launch distance from a transition state.
pub const DEFAULT_STEP: f64 = 1e-3;

const GRID: usize = 32;

/// Depth-1 minimum from a 32×32 grid over `[-π/2, π/2)²` and a local refinement.
pub fn depth_one_bootstrap(cost: &CostDiagonal) -> Result<(ParameterVector, OptimizationRecord)> {
    let spacing = 2.0 * FRAC_PI_2 / GRID as f64;
    let mut best = (f64::INFINITY, ParameterVector::zeros(1));
    for i in 0..GRID {
        for j in 0..GRID {
            let params =
                ParameterVector::new(vec![-FRAC_PI_2 + i as f64 * spacing], vec![-FRAC_PI_2 + j as f64 * spacing])?;
            let e = energy(cost, &params)?;
            if e < best.0 {
                best = (e, params);
            }
        }
    }
    minimize(cost, &best.1)
}

/// The two local minima reached from `Γ_TS ± step·δ`.
#[derive(Debug, Clone)]
pub struct Descent {
    pub branches: [(ParameterVector, OptimizationRecord); 2],
    /// Launch distance actually used.
    pub step: f64,
}

impl Descent {
    pub fn best(&self) -> &(ParameterVector, OptimizationRecord) {
        let [a, b] = &self.branches;
        if b.1.energy < a.1.energy {
            b
        } else {
            a
        }
    }
}

/// Minimizes from both sides of a transition state along `delta`.
///
/// When neither branch gets below the transition-state energy (the
/// launch gradient already under tolerance), the step is enlarged tenfold,
/// at most twice.
pub fn descend_from_ts(cost: &CostDiagonal, ts_params: &ParameterVector, delta: &[f64], step: f64) -> Result<Descent> {
    let x = ts_params.to_flat();
    if delta.len() != x.len() {
        return Err(QlsError::DimensionMismatch { expected: x.len(), found: delta.len() });
    }
    let e_ts = energy(cost, ts_params)?;
    let mut step = step;
    for attempt in 0..3 {
        let launch = |sign: f64| -> Result<(ParameterVector, OptimizationRecord)> {
            let start: Vec<f64> = x.iter().zip(delta).map(|(a, d)| a + sign * step * d).collect();
            minimize(cost, &ParameterVector::from_flat(&start)?)
        };
        let descent = Descent { branches: [launch(1.0)?, launch(-1.0)?], step };
        if descent.best().1.energy < e_ts - 1e-12 * (1.0 + e_ts.abs()) || attempt == 2 {
            return Ok(descent);
        }
        step *= 10.0;
    }
    unreachable!()
}

/// Which direction the descents follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionSource {
    /// Estimated index-1 direction (no Hessian needed).
    Estimate,
    /// Lowest eigenvector of the finite-difference Hessian.
    ExactHessian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOptions {
    pub step: f64,
    pub direction: DirectionSource,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self { step: DEFAULT_STEP, direction: DirectionSource::Estimate }
    }
}

/// Result of one depth increase.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub params: ParameterVector,
    pub record: OptimizationRecord,
    /// Transition state the selected minimum descends from.
    pub source: Option<TsIndex>,
    /// Local optimizations launched.
    pub launches: usize,
    /// Every transition state was degenerate; `params` is the padded minimum.
    pub halted: bool,
    /// Best energy reached from each non-degenerate transition state.
    pub ts_energies: Vec<(TsIndex, f64)>,
}

impl StepOutcome {
    /// Share of the `2p + 1` transition states whose descent reaches the
    /// selected energy.
    pub fn fraction_to_best(&self, total: usize) -> f64 {
        let e = self.record.energy;
        let tol = 1e-7 * (1.0 + e.abs());
        let hits = self.ts_energies.iter().filter(|(_, v)| (v - e).abs() <= tol).count();
        hits as f64 / total as f64
    }
}

fn direction(
    cost: &CostDiagonal,
    min_p: &ParameterVector,
    index: TsIndex,
    source: DirectionSource,
) -> Result<Option<Vec<f64>>> {
    let pair = match transition::approx_eigenpair(cost, min_p, index) {
        Ok(pair) => pair,
        Err(QlsError::Degenerate { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    Ok(Some(match source {
        DirectionSource::Estimate => pair.delta,
        DirectionSource::ExactHessian => {
            let h = hessian(cost, &index.construct(min_p)?)?;
            SymmetricSpectrum::of(&h.entries).vectors[0].iter().copied().collect()
        }
    }))
}

fn step_over(
    cost: &CostDiagonal,
    min_p: &ParameterVector,
    indices: Vec<TsIndex>,
    opts: &StepOptions,
) -> Result<StepOutcome> {
    let results: Vec<Option<(TsIndex, Descent)>> = indices
        .into_par_iter()
        .map(|index| -> Result<_> {
            let Some(delta) = direction(cost, min_p, index, opts.direction)? else {
                return Ok(None);
            };
            let ts = index.construct(min_p)?;
            Ok(Some((index, descend_from_ts(cost, &ts, &delta, opts.step)?)))
        })
        .collect::<Result<_>>()?;
    let descents: Vec<(TsIndex, Descent)> = results.into_iter().flatten().collect();
    let launches = 2 * descents.len();
    let ts_energies = descents.iter().map(|(i, d)| (*i, d.best().1.energy)).collect();
    let mut best: Option<(TsIndex, &(ParameterVector, OptimizationRecord))> = None;
    for (index, d) in &descents {
        let candidate = d.best();
        if best.is_none_or(|(_, b)| candidate.1.energy < b.1.energy) {
            best = Some((*index, candidate));
        }
    }
    match best {
        Some((index, (params, record))) => Ok(StepOutcome {
            params: params.clone(),
            record: record.clone(),
            source: Some(index),
            launches,
            halted: false,
            ts_energies,
        }),
        None => {
            let padded = TsIndex::symmetric(1).construct(min_p)?;
            let (e, g) = energy_and_gradient(cost, &padded)?;
            Ok(StepOutcome {
                params: padded,
                record: OptimizationRecord {
                    iterations: 0,
                    evaluations: 1,
                    converged: true,
                    initial_energy: e,
                    energy: e,
                    gradient_norm: crate::derivatives::max_abs(&g),
                },
                source: None,
                launches: 0,
                halted: true,
                ts_energies: Vec::new(),
            })
        }
    }
}

/// Descends from all `2p + 1` transition states and keeps the best minimum.
pub fn greedy_step(cost: &CostDiagonal, min_p: &ParameterVector, opts: &StepOptions) -> Result<StepOutcome> {
    step_over(cost, min_p, TsIndex::admissible(min_p.depth()), opts)
}

/// Descends from the first-layer transition state only.
pub fn single_ts_step(cost: &CostDiagonal, min_p: &ParameterVector, opts: &StepOptions) -> Result<StepOutcome> {
    step_over(cost, min_p, vec![TsIndex::symmetric(1)], opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Strategy {
    Greedy,
    SingleTs,
    Fourier { perturbations: usize, scale: f64, seed: u64 },
}

impl Strategy {
    pub fn tag(&self) -> String {
        match self {
            Strategy::Greedy => "greedy".into(),
            Strategy::SingleTs => "single-ts".into(),
            Strategy::Fourier { perturbations, .. } => format!("fourier[inf,{perturbations}]"),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Strategy::Fourier { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

/// One recorded minimum of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRecord {
    pub p: usize,
    pub min_params: Vec<f64>,
    pub energy: f64,
    pub one_minus_r: f64,
    pub variance: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub strategy: String,
    pub converged: bool,
    pub halted: bool,
    pub launches: usize,
    pub fraction_to_best: Option<f64>,
    pub hessian_min_eigenvalue: Option<f64>,
    pub n: usize,
    pub graph_seed: Option<u64>,
    pub strategy_seed: Option<u64>,
}

impl DepthRecord {
    pub fn params(&self) -> ParameterVector {
        ParameterVector::from_flat(&self.min_params).expect("even length by construction")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub n: usize,
    pub graph_seed: Option<u64>,
    pub strategy: Strategy,
    pub records: Vec<DepthRecord>,
}

impl OptimizationTrace {
    /// One JSON object per depth, newline terminated.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serialization is infallible") + "\n")
            .collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy).collect()
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.records.windows(2).all(|w| w[1].energy <= w[0].energy + slack)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct StrategyOptions {
    pub step: StepOptions,
    /// Record the smallest Hessian eigenvalue at every minimum.
    pub verify: bool,
}

struct Recorder<'a> {
    cost: &'a CostDiagonal,
    strategy: &'a Strategy,
    graph_seed: Option<u64>,
    verify: bool,
}

impl Recorder<'_> {
    fn record(
        &self,
        params: &ParameterVector,
        opt: &OptimizationRecord,
        launches: usize,
        halted: bool,
        fraction: Option<f64>,
    ) -> Result<DepthRecord> {
        let state = prepare_qaoa_state(self.cost, params)?;
        let energy = state.energy(self.cost)?;
        let hessian_min_eigenvalue = if self.verify {
            Some(SymmetricSpectrum::of(&hessian(self.cost, params)?.entries).values[0])
        } else {
            None
        };
        Ok(DepthRecord {
            p: params.depth(),
            min_params: params.to_flat(),
            energy,
            one_minus_r: approximation_ratio(energy, self.cost)?,
            variance: state.energy_variance(self.cost)?,
            gradient_norm: opt.gradient_norm,
            iterations: opt.iterations,
            strategy: self.strategy.tag(),
            converged: opt.converged,
            halted,
            launches,
            fraction_to_best: fraction,
            hessian_min_eigenvalue,
            n: self.cost.num_qubits(),
            graph_seed: self.graph_seed,
            strategy_seed: self.strategy.seed(),
        })
    }
}

/// Runs a strategy from depth 1 to `p_max`.
pub fn run_strategy(
    cost: &CostDiagonal,
    graph_seed: Option<u64>,
    strategy: &Strategy,
    p_max: usize,
    opts: &StrategyOptions,
) -> Result<OptimizationTrace> {
    if p_max == 0 {
        return Err(QlsError::InvalidInput("p_max must be at least 1".into()));
    }
    let recorder = Recorder { cost, strategy, graph_seed, verify: opts.verify };
    let records = match strategy {
        Strategy::Greedy | Strategy::SingleTs => {
            let (mut params, opt) = depth_one_bootstrap(cost)?;
            let mut records = vec![recorder.record(&params, &opt, 1, false, None)?];
            for p in 1..p_max {
                let out = match strategy {
                    Strategy::Greedy => greedy_step(cost, &params, &opts.step)?,
                    _ => single_ts_step(cost, &params, &opts.step)?,
                };
                let fraction = Some(out.fraction_to_best(2 * p + 1));
                records.push(recorder.record(&out.params, &out.record, out.launches, out.halted, fraction)?);
                params = out.params;
            }
            records
        }
        Strategy::Fourier { perturbations, scale, seed } => {
            fourier_records(cost, &recorder, p_max, *perturbations, *scale, *seed)?
        }
    };
    Ok(OptimizationTrace { n: cost.num_qubits(), graph_seed, strategy: strategy.clone(), records })
}

fn minimize_amplitudes(
    cost: &CostDiagonal,
    start: &FourierAmplitudes,
) -> Result<(FourierAmplitudes, OptimizationRecord)> {
    let out = bfgs(
        |x| {
            let amps = FourierAmplitudes::from_flat(x)?;
            let (e, g) = energy_and_gradient(cost, &amps.to_angles())?;
            Ok((e, amps.pull_back_gradient(&g)))
        },
        &start.to_flat(),
        &BfgsOptions::default(),
    )?;
    let amps = FourierAmplitudes::from_flat(&out.x)?;
    // Report the gradient with respect to the angles.
    let angle_grad = energy_and_gradient(cost, &amps.to_angles())?.1;
    let mut record = out.record;
    record.gradient_norm = crate::derivatives::max_abs(&angle_grad);
    Ok((amps, record))
}

fn fourier_records(
    cost: &CostDiagonal,
    recorder: &Recorder,
    p_max: usize,
    perturbations: usize,
    scale: f64,
    seed: u64,
) -> Result<Vec<DepthRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (params, opt) = depth_one_bootstrap(cost)?;
    let mut best = FourierAmplitudes::from_angles(&params);
    let mut records = vec![recorder.record(&params, &opt, 1, false, None)?];
    for _ in 1..p_max {
        let mut starts = vec![best.extended()];
        let (su, sv) = (scale * rms(&best.u), scale * rms(&best.v));
        for _ in 0..perturbations {
            let mut s = best.clone();
            for (x, sigma) in s.u.iter_mut().map(|x| (x, su)).chain(s.v.iter_mut().map(|x| (x, sv))) {
                if sigma > 0.0 {
                    *x += Normal::new(0.0, sigma).expect("positive scale").sample(&mut rng);
                }
            }
            starts.push(s.extended());
        }
        let results: Vec<(FourierAmplitudes, OptimizationRecord)> =
            starts.par_iter().map(|s| minimize_amplitudes(cost, s)).collect::<Result<_>>()?;
        let launches = results.len();
        let (amps, opt) = results
            .into_iter()
            .reduce(|a, b| if b.1.energy < a.1.energy { b } else { a })
            .expect("at least the unperturbed start");
        records.push(recorder.record(&amps.to_angles(), &opt, launches, false, None)?);
        best = amps;
    }
    Ok(records)
}
