//! Matrix-free QAOA MaxCut simulation and landscape analysis.
//!
//! States live on `2^n` amplitudes; the cost operator is kept as its
//! diagonal and the mixer is applied qubit by qubit.

pub mod derivatives;
pub mod error;
pub mod linalg;
pub mod optimizer;
pub mod problem;
pub mod slice;
pub mod statevector;
pub mod transition;

pub use error::{QlsError, Result};
pub use problem::{generate_regular_graph, CostDiagonal, Edge, ProblemGraph};
pub use statevector::{prepare_qaoa_state, ParameterVector, Statevector};
pub use transition::{TsIndex, TsKind};
