//! Monte Carlo optimistic policy iteration.

mod diagnostics;
mod engine;
mod schedule;
mod trajectory;

pub use diagnostics::{estimator_diagnostics, DiagnosticRow, Diagnostics};
pub(crate) use engine::Learner;
pub use engine::{opi_iteration, run_opi, IterationRecord, OpiConfig, OpiRunState, RunResult, UpdateMode};
pub use schedule::{ScheduleError, ScheduleMode, StepFamily, StepSchedule};
pub use trajectory::{
    first_visit_tail_costs, simulate_trajectory, truncation_bias_bound, truncation_horizon,
    Step, StepLimit, TailEntry, TailEstimates, Termination, Trajectory,
};

use thiserror::Error;

use crate::solvers::SolverError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpiError {
    #[error("trajectory from state {start} did not absorb within {steps} steps")]
    HorizonWithoutAbsorption { start: usize, steps: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}
