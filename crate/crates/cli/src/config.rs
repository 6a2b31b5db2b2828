//! Experiment configuration, defaults and hashing.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use qls_core::optimizer::{StepOptions, Strategy, StrategyOptions};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

/// Fields that never influence results and stay out of the hash.
const UNHASHED: [&str; 3] = ["out", "threads", "force"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyName {
    Greedy,
    SingleTs,
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GraphGen,
    Run,
    TsAccuracy,
    CurvatureVariance,
    BoundVsOptim,
    Quartic,
    Slice,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::GraphGen => "graph-gen",
            Experiment::Run => "run",
            Experiment::TsAccuracy => "ts-accuracy",
            Experiment::CurvatureVariance => "curvature-variance",
            Experiment::BoundVsOptim => "bound-vs-optim",
            Experiment::Quartic => "quartic",
            Experiment::Slice => "slice",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Problem sizes; every size is combined with every seed.
    pub n: Vec<usize>,
    pub degree: usize,
    pub weighted: bool,
    pub seeds: Vec<u64>,
    pub p_max: usize,
    pub strategy: StrategyName,
    /// Perturbed restarts per depth (Fourier only).
    pub perturbations: usize,
    /// Perturbation width relative to the amplitude RMS (Fourier only).
    pub fourier_scale: f64,
    pub fourier_seed: u64,
    /// Launch distance from a transition state.
    pub step: f64,
    /// Minimum depth whose first-layer transition state is scanned (slice only).
    pub depth: usize,
    pub epsilon_max: f64,
    pub points: usize,
    /// Graph file used instead of generated instances (run and slice).
    pub graph: Option<PathBuf>,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let (n, seeds, p_max, strategy) = match experiment {
            Experiment::GraphGen => (12, vec![1], 1, StrategyName::SingleTs),
            Experiment::Run => (12, vec![1], 10, StrategyName::Greedy),
            Experiment::TsAccuracy => (10, (1..=10).collect(), 10, StrategyName::SingleTs),
            Experiment::CurvatureVariance => (12, (1..=10).collect(), 12, StrategyName::SingleTs),
            Experiment::BoundVsOptim => (12, (1..=10).collect(), 10, StrategyName::SingleTs),
            Experiment::Quartic => (12, (1..=10).collect(), 10, StrategyName::SingleTs),
            Experiment::Slice => (10, vec![1], 3, StrategyName::SingleTs),
        };
        Self {
            experiment,
            n: vec![n],
            degree: 3,
            weighted: false,
            seeds,
            p_max,
            strategy,
            perturbations: 10,
            fourier_scale: 0.1,
            fourier_seed: 0,
            step: qls_core::optimizer::strategies::DEFAULT_STEP,
            depth: 3,
            epsilon_max: 0.5,
            points: 101,
            graph: None,
            out: PathBuf::from(format!("{}.{}", experiment.name(), default_extension(experiment))),
            threads: None,
        }
    }

    /// Overlays the keys of a JSON object file onto this configuration.
    pub fn overlay_file(self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let patch: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        self.overlay(patch)
    }

    pub fn overlay(self, patch: Value) -> Result<Self> {
        let Value::Object(patch) = patch else {
            bail!("config file must hold a JSON object");
        };
        let mut base = serde_json::to_value(&self)?;
        let map = base.as_object_mut().expect("config serializes to an object");
        for (k, v) in patch {
            map.insert(k, v);
        }
        let merged: Self = serde_json::from_value(base).context("invalid config")?;
        merged.validate()?;
        Ok(merged)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.iter().any(|&n| !(2..=qls_core::problem::MAX_QUBITS).contains(&n)) {
            bail!("n must lie in 2..={}", qls_core::problem::MAX_QUBITS);
        }
        if self.p_max == 0 {
            bail!("p_max must be at least 1");
        }
        if self.experiment == Experiment::Slice && (self.depth == 0 || self.points < 2 || self.epsilon_max <= 0.0) {
            bail!("slice needs depth ≥ 1, points ≥ 2 and epsilon_max > 0");
        }
        if !(self.step > 0.0 && self.fourier_scale >= 0.0) {
            bail!("step must be positive and fourier_scale non-negative");
        }
        Ok(())
    }

    pub fn strategy(&self) -> Strategy {
        match self.strategy {
            StrategyName::Greedy => Strategy::Greedy,
            StrategyName::SingleTs => Strategy::SingleTs,
            StrategyName::Fourier => Strategy::Fourier {
                perturbations: self.perturbations,
                scale: self.fourier_scale,
                seed: self.fourier_seed,
            },
        }
    }

    pub fn strategy_options(&self) -> StrategyOptions {
        StrategyOptions { step: StepOptions { step: self.step, ..StepOptions::default() }, verify: false }
    }

    /// First 16 hex digits of the SHA-256 of the canonical result-affecting
    /// fields, followed by any extra input bytes (e.g. a graph file).
    pub fn hash(&self, extra: &[u8]) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(map) = &mut value {
            for key in UNHASHED {
                map.remove(key);
            }
            map.remove("graph");
        }
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&value).expect("value serializes"));
        hasher.update(extra);
        hex::encode(hasher.finalize())[..16].to_string()
    }
}

fn default_extension(experiment: Experiment) -> &'static str {
    match experiment {
        Experiment::GraphGen => "json",
        Experiment::Run => "jsonl",
        _ => "csv",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overlay_replaces_keys() {
        let cfg =
            ExperimentConfig::defaults(Experiment::TsAccuracy).overlay(json!({"n": [8], "seeds": [3, 4]})).unwrap();
        assert_eq!(cfg.n, vec![8]);
        assert_eq!(cfg.seeds, vec![3, 4]);
        assert_eq!(cfg.p_max, 10);
    }

    #[test]
    fn overlay_rejects_unknown_keys() {
        assert!(ExperimentConfig::defaults(Experiment::Quartic).overlay(json!({"nn": 3})).is_err());
        assert!(ExperimentConfig::defaults(Experiment::Quartic).overlay(json!([1])).is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = ExperimentConfig::defaults(Experiment::Quartic);
        let mut b = a.clone();
        b.out = "elsewhere.csv".into();
        b.threads = Some(3);
        assert_eq!(a.hash(&[]), b.hash(&[]));
        b.seeds.push(99);
        assert_ne!(a.hash(&[]), b.hash(&[]));
        assert_eq!(a.hash(&[]).len(), 16);
    }
}
