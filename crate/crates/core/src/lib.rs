//! Online model-free Q-learning for unknown discrete-time bilinear systems.
//!
//! A single run first explores the plant with a rich input for
//! `N = n + m + nm` steps, freezes the lifted data matrices, and from then on
//! solves a frozen-state discounted LQ problem at every visited state using
//! only the data. The model-based variant of the same iteration, the Riccati
//! value-iteration oracle and the plant simulator are provided for
//! comparison and verification.

pub mod data;
pub mod error;
pub mod examples;
pub mod excitation;
pub mod linalg;
pub mod policy;
pub mod runtime;
pub mod system;

pub use data::DataMatrices;
pub use error::{Error, Result};
pub use excitation::{
    SignalKind, SignalSource, SignalSpec, Sinusoid, PE_TOLERANCE, RANK_TOLERANCE,
};
pub use policy::{
    ClosedLoopProvider, CostateMatrix, FrozenTransition, IterationConfig, SolveReport,
};
pub use runtime::{ExperimentConfig, Mode, RunLog, RunSummary, StepRecord};
pub use system::{BilinearSystem, CostSpec, LiftedSample, SystemOracle};
