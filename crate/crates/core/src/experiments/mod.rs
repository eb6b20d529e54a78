//! Experiment generators and the update-mode comparison harness.

mod comparison;
mod generator;

pub use comparison::{
    run_comparison, thread_limit, ComparisonResult, HistogramBin, ModeSummary, TrialOutcome,
    DEFAULT_ITERATION_CAP, HISTOGRAM_BINS, MODES,
};
pub use generator::{
    default_experiment1_graph, default_experiment2_graph, generate_experiment_mdp, BaseGraph,
    ExperimentKind, GeneratedMdp, GeneratorSpec,
};

use thiserror::Error;

use crate::mdp::MdpError;
use crate::opi::OpiError;
use crate::solvers::SolverError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid base graph: {0}")]
    Graph(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Opi(#[from] OpiError),
}
