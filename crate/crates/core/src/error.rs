use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QlsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} of {requested} qubits exceeds the cap of {cap}")]
    ResourceRefused { what: &'static str, requested: usize, cap: usize },

    #[error("graph generation failed after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("approximation ratio undefined for zero ground energy")]
    UndefinedRatio,

    #[error("transition-state index ({beta_slot}, {gamma_slot}) is not admissible at depth {depth}")]
    InadmissibleIndex { beta_slot: usize, gamma_slot: usize, depth: usize },

    #[error("degenerate transition state: coupling {coupling:e} below threshold")]
    Degenerate { coupling: f64 },

    #[error("slice model has no minimum (curvature {curvature:e}, quartic {quartic:e})")]
    NoMinimum { curvature: f64, quartic: f64 },

    #[error("layer {layer} out of range for depth {depth}")]
    LayerOutOfRange { layer: usize, depth: usize },
}

pub type Result<T> = std::result::Result<T, QlsError>;
