//! The OPI loop.

use std::fmt::Write as _;

use super::schedule::StepSchedule;
use super::trajectory::{simulate_into, tail_costs_into, StepLimit, TailEstimates, Termination, Trajectory};
use super::OpiError;
use crate::mdp::{analyze, InitialDistribution, Mdp};
use crate::rng::{stream_rng, SimRng};
use crate::solvers::{greedy_policy, policy_is_optimal, Policy, Solution, ValueFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateMode {
    /// Update every state on the trajectory with its first-visit tail cost.
    TrajectoryUpdate,
    /// Update only the sampled start state.
    FirstStateOnly,
}

impl UpdateMode {
    pub fn label(&self) -> &'static str {
        match self {
            UpdateMode::TrajectoryUpdate => "trajectory",
            UpdateMode::FirstStateOnly => "first-state",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpiConfig {
    pub update_mode: UpdateMode,
    pub schedule: StepSchedule,
    pub seed: u64,
    /// RNG stream under `seed`; distinct trials use distinct streams.
    pub stream: u64,
    /// Bound on the discounted tail dropped by trajectory truncation.
    pub truncation_bias: f64,
    pub max_iterations: usize,
    /// Stop as soon as the greedy policy is optimal.
    pub stop_at_optimal: bool,
    /// Record `J_t` every this many iterations.
    pub history_stride: Option<usize>,
}

impl Default for OpiConfig {
    fn default() -> Self {
        OpiConfig {
            update_mode: UpdateMode::TrajectoryUpdate,
            schedule: StepSchedule::visit_harmonic(),
            seed: 0,
            stream: 0,
            truncation_bias: 1e-4,
            max_iterations: 10_000,
            stop_at_optimal: false,
            history_stride: None,
        }
    }
}

impl OpiConfig {
    pub fn validate(&self) -> Result<(), OpiError> {
        if !(self.truncation_bias > 0.0) {
            return Err(OpiError::InvalidConfig(format!(
                "truncation bias {} must be positive",
                self.truncation_bias
            )));
        }
        if self.max_iterations < 1 {
            return Err(OpiError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if self.history_stride == Some(0) {
            return Err(OpiError::InvalidConfig("history stride must be positive".into()));
        }
        self.schedule.family.validate()?;
        Ok(())
    }
}

/// What one iteration did.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub start: usize,
    pub trajectory_len: usize,
    pub termination: Termination,
    /// Parameters (states, or clusters under aggregation) that were updated.
    pub updated: Vec<usize>,
    /// Trajectory states whose parameter had already been updated this
    /// iteration by an earlier state.
    pub repeated_parameters: usize,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    trajectory: Option<Trajectory>,
    tails: Vec<f64>,
    seen: Vec<bool>,
    estimates: TailEstimates,
    touched: Vec<bool>,
}

/// Shared OPI engine over a parameter vector. Each state reads its value from
/// the parameter `param_of[state]` (identity when `param_of` is `None`).
#[derive(Debug, Clone)]
pub(crate) struct Learner {
    pub t: usize,
    pub params: Vec<f64>,
    pub counts: Vec<usize>,
    pub values: ValueFunction,
    pub policy: Policy,
    param_of: Option<Vec<usize>>,
    rng: SimRng,
    limit: StepLimit,
    scratch: Scratch,
}

impl Learner {
    pub fn new(
        mdp: &Mdp,
        config: &OpiConfig,
        param_of: Option<Vec<usize>>,
        num_params: usize,
    ) -> Self {
        let n = mdp.num_states();
        let values = ValueFunction::zeros(n);
        let policy = greedy_policy(mdp, &values);
        Learner {
            t: 0,
            params: vec![0.0; num_params],
            counts: vec![0; num_params],
            values,
            policy,
            param_of,
            rng: stream_rng(config.seed, config.stream),
            limit: StepLimit::for_mdp(mdp, config.truncation_bias),
            scratch: Scratch::default(),
        }
    }

    #[inline]
    fn param(&self, state: usize) -> usize {
        match &self.param_of {
            Some(m) => m[state],
            None => state,
        }
    }

    pub fn step(
        &mut self,
        mdp: &Mdp,
        p: &InitialDistribution,
        config: &OpiConfig,
    ) -> Result<IterationRecord, OpiError> {
        let start = p.sample(&mut self.rng);
        let mut traj = self.scratch.trajectory.take().unwrap_or(Trajectory {
            steps: Vec::new(),
            termination: Termination::AbsorbedAt(0),
        });
        let simulated = simulate_into(mdp, &self.policy, start, &mut self.rng, self.limit, &mut traj);
        if let Err(e) = simulated {
            self.scratch.trajectory = Some(traj);
            return Err(e);
        }
        let mut estimates = std::mem::take(&mut self.scratch.estimates);
        tail_costs_into(
            &traj,
            mdp.discount(),
            &mut self.scratch.tails,
            &mut self.scratch.seen,
            &mut estimates,
        );

        let entries = match config.update_mode {
            UpdateMode::TrajectoryUpdate => &estimates.entries[..],
            UpdateMode::FirstStateOnly => &estimates.entries[..1],
        };
        let mut touched = std::mem::take(&mut self.scratch.touched);
        touched.clear();
        touched.resize(self.params.len(), false);
        let mut updated = Vec::with_capacity(entries.len());
        let mut repeated_parameters = 0;
        let t = self.t;
        for entry in entries {
            let c = self.param(entry.state);
            if touched[c] {
                repeated_parameters += 1;
                continue;
            }
            touched[c] = true;
            let visits = self.counts[c];
            debug_assert!(visits <= t, "n_t = {visits} exceeds t = {t}");
            let gamma = config.schedule.step_size(t, visits);
            debug_assert!(
                gamma >= config.schedule.beta(t),
                "step {gamma} below β(t) = {}",
                config.schedule.beta(t)
            );
            self.params[c] = (1.0 - gamma) * self.params[c] + gamma * entry.estimate;
            self.counts[c] = visits + 1;
            updated.push(c);
        }
        let record = IterationRecord {
            start,
            trajectory_len: traj.len(),
            termination: traj.termination,
            updated,
            repeated_parameters,
        };
        self.scratch.trajectory = Some(traj);
        self.scratch.estimates = estimates;
        self.scratch.touched = touched;

        self.t += 1;
        self.refresh(mdp);
        Ok(record)
    }

    /// Re-expands the parameters into state values and recomputes the greedy
    /// policy.
    fn refresh(&mut self, mdp: &Mdp) {
        for i in 0..self.values.len() {
            self.values[i] = self.params[self.param(i)];
        }
        self.policy = greedy_policy(mdp, &self.values);
    }

    pub fn run(
        &mut self,
        mdp: &Mdp,
        p: &InitialDistribution,
        config: &OpiConfig,
        oracle: &Solution,
    ) -> Result<RunResult, OpiError> {
        config.validate()?;
        if oracle.values.len() != mdp.num_states() {
            return Err(OpiError::InvalidConfig(format!(
                "oracle has {} values for {} states",
                oracle.values.len(),
                mdp.num_states()
            )));
        }
        let report = analyze(mdp, p);
        let mut iterations_to_optimal = None;
        let mut history = Vec::new();
        let mut max_trajectory_len = 0;
        let mut repeated_parameters = 0;
        loop {
            if iterations_to_optimal.is_none()
                && policy_is_optimal(mdp, &self.policy, &oracle.optimal_actions, p, &report)
            {
                iterations_to_optimal = Some(self.t);
                if config.stop_at_optimal {
                    break;
                }
            }
            if let Some(stride) = config.history_stride {
                if self.t.is_multiple_of(stride) {
                    history.push((self.t, self.values.0.clone()));
                }
            }
            if self.t >= config.max_iterations {
                break;
            }
            let record = self.step(mdp, p, config)?;
            max_trajectory_len = max_trajectory_len.max(record.trajectory_len);
            repeated_parameters += record.repeated_parameters;
        }
        Ok(RunResult {
            sup_error: Some(self.values.sup_distance(&oracle.values)),
            values: self.values.clone(),
            iterations: self.t,
            iterations_to_optimal,
            visit_counts: self.counts.clone(),
            history,
            max_trajectory_len,
            repeated_parameters,
        })
    }
}

/// State of a tabular OPI run: `t`, `J_t`, visit counts `n_t(i)`, the greedy
/// policy `μ_t` and the run's RNG.
#[derive(Debug, Clone)]
pub struct OpiRunState {
    learner: Learner,
}

impl OpiRunState {
    /// `J_0 = 0` and its greedy policy.
    pub fn new(mdp: &Mdp, config: &OpiConfig) -> Self {
        OpiRunState {
            learner: Learner::new(mdp, config, None, mdp.num_states()),
        }
    }

    pub fn t(&self) -> usize {
        self.learner.t
    }

    pub fn values(&self) -> &ValueFunction {
        &self.learner.values
    }

    pub fn visit_counts(&self) -> &[usize] {
        &self.learner.counts
    }

    /// Greedy policy with respect to the current values.
    pub fn policy(&self) -> &Policy {
        &self.learner.policy
    }
}

/// One OPI iteration: sample a start from `p`, simulate the greedy policy,
/// blend first-visit tail costs into `J` with the scheduled step sizes, then
/// recompute the greedy policy.
pub fn opi_iteration(
    state: &mut OpiRunState,
    mdp: &Mdp,
    p: &InitialDistribution,
    config: &OpiConfig,
) -> Result<IterationRecord, OpiError> {
    state.learner.step(mdp, p, config)
}

/// Outcome of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub values: ValueFunction,
    pub iterations: usize,
    /// First `t` at which the greedy policy was optimal.
    pub iterations_to_optimal: Option<usize>,
    /// `‖J_final − J*‖∞`.
    pub sup_error: Option<f64>,
    pub visit_counts: Vec<usize>,
    /// `(t, J_t)` snapshots.
    pub history: Vec<(usize, Vec<f64>)>,
    pub max_trajectory_len: usize,
    /// Total over the run of [`IterationRecord::repeated_parameters`].
    pub repeated_parameters: usize,
}

impl RunResult {
    pub const CSV_HEADER: &'static str =
        "trial,mode,schedule,seed,iterations_to_optimal,final_sup_error";

    pub fn csv_row(&self, trial: usize, config: &OpiConfig) -> String {
        format!(
            "{trial},{},{},{},{},{}",
            config.update_mode.label(),
            config.schedule.label(),
            config.seed,
            self.iterations_to_optimal
                .map_or_else(String::new, |t| t.to_string()),
            self.sup_error.map_or_else(String::new, |e| format!("{e:e}")),
        )
    }

    /// `t,state,value` rows.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("t,state,value\n");
        for (t, values) in &self.history {
            for (i, v) in values.iter().enumerate() {
                let _ = writeln!(out, "{t},{i},{v:e}");
            }
        }
        out
    }
}

/// Runs OPI from `J_0 = 0` for `config.max_iterations` iterations (or until
/// the greedy policy is optimal when `stop_at_optimal` is set).
pub fn run_opi(
    mdp: &Mdp,
    p: &InitialDistribution,
    config: &OpiConfig,
    oracle: &Solution,
) -> Result<RunResult, OpiError> {
    let mut learner = Learner::new(mdp, config, None, mdp.num_states());
    learner.run(mdp, p, config, oracle)
}
