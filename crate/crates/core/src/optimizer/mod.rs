//! Local optimization and depth-increasing strategies.

pub mod bfgs;
pub mod fourier;
pub mod strategies;

pub use bfgs::{bfgs, minimize, minimize_with, BfgsOptions, BfgsOutcome, OptimizationRecord};
pub use fourier::FourierAmplitudes;
pub use strategies::{
    depth_one_bootstrap, descend_from_ts, greedy_step, run_strategy, single_ts_step, DepthRecord, Descent,
    DirectionSource, OptimizationTrace, StepOptions, StepOutcome, Strategy, StrategyOptions,
};
