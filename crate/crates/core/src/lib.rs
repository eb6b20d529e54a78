//! Monte Carlo optimistic policy iteration (OPI) for finite Markov decision
//! processes.
//!
//! Each OPI iteration acts greedily with respect to the current value
//! estimate, simulates one trajectory from a randomly drawn start state, and
//! blends the first-visit tail cost of *every* state on that trajectory into
//! the estimate. The crate also ships the machinery needed to check that the
//! algorithm is doing the right thing:
//!
//! - [`mdp`]: the model, its JSON file format, and structural validation
//!   (reachability graph, transient/recurrent decomposition, acyclicity).
//! - [`solvers`]: exact Bellman operators, policy evaluation, value and policy
//!   iteration, and ever-visit probabilities. These are the oracles.
//! - [`opi`]: trajectory simulation, first-visit tail costs, step-size
//!   schedules, the OPI loop and estimator diagnostics.
//! - [`variants`]: stochastic shortest path problems and alternating
//!   zero-sum games solved through the negamin transform.
//! - [`aggregation`]: OPI over a cluster partition with one value per cluster.
//! - [`experiments`]: MDP generators and the trajectory-vs-single-state
//!   comparison harness.
//! - [`cli`]: the `mcopi` command-line front end.
//!
//! Runnable walkthroughs live under `examples/` in this crate.

pub mod aggregation;
pub mod cli;
pub mod experiments;
pub mod mdp;
pub mod opi;
pub mod output;
pub mod rng;
pub mod solvers;
pub mod variants;

pub use mdp::{InitialDistribution, Mdp, ProblemClass};
pub use solvers::{OptimalActionSets, Policy, Solution, ValueFunction};
