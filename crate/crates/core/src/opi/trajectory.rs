//! Trajectory simulation and first-visit tail costs.

use rand::Rng;

use super::OpiError;
use crate::mdp::Mdp;
use crate::solvers::Policy;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The step at this index is a zero-cost absorbing state.
    AbsorbedAt(usize),
    /// The discounted horizon was reached after this many steps.
    TruncatedAtHorizon(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|s| s.state)
    }
}

/// Smallest `H ≥ 1` with `α^H · c_max / (1−α) ≤ ε`:
/// `H = ceil(ln(ε(1−α)/c_max) / ln α)`.
pub fn truncation_horizon(alpha: f64, max_cost: f64, epsilon: f64) -> usize {
    if max_cost <= 0.0 {
        return 1;
    }
    let h = ((epsilon * (1.0 - alpha) / max_cost).ln() / alpha.ln()).ceil();
    if h.is_finite() && h >= 1.0 {
        h as usize
    } else {
        1
    }
}

/// Upper bound on the discounted cost dropped by truncating after `horizon`
/// steps: `α^H · c_max / (1−α)`.
pub fn truncation_bias_bound(alpha: f64, max_cost: f64, horizon: usize) -> f64 {
    alpha.powi(horizon as i32) * max_cost / (1.0 - alpha)
}

/// How long a simulated trajectory may run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepLimit {
    /// Discounted: stop after this many steps unless absorbed earlier.
    Horizon(usize),
    /// Undiscounted: absorption must happen within this many steps.
    MustAbsorbWithin(usize),
}

impl StepLimit {
    pub fn for_mdp(mdp: &Mdp, epsilon_bias: f64) -> Self {
        if mdp.problem_class().is_discounted() {
            StepLimit::Horizon(truncation_horizon(
                mdp.discount(),
                mdp.max_abs_cost(),
                epsilon_bias,
            ))
        } else {
            // acyclic transient part: at most n−1 transient steps, then the sink
            StepLimit::MustAbsorbWithin(mdp.num_states() + 1)
        }
    }
}

/// Samples a trajectory of `policy` from `start`.
///
/// The trajectory stops on entering a state whose chosen action is a
/// zero-cost self-loop (that step is recorded), or at the discounted
/// horizon. Undiscounted problems that fail to absorb within the step limit
/// are reported as [`OpiError::HorizonWithoutAbsorption`].
pub fn simulate_trajectory<R: Rng + ?Sized>(
    mdp: &Mdp,
    policy: &Policy,
    start: usize,
    rng: &mut R,
    epsilon_bias: f64,
) -> Result<Trajectory, OpiError> {
    let limit = StepLimit::for_mdp(mdp, epsilon_bias);
    let mut traj = Trajectory {
        steps: Vec::new(),
        termination: Termination::AbsorbedAt(0),
    };
    simulate_into(mdp, policy, start, rng, limit, &mut traj)?;
    Ok(traj)
}

pub(crate) fn simulate_into<R: Rng + ?Sized>(
    mdp: &Mdp,
    policy: &Policy,
    start: usize,
    rng: &mut R,
    limit: StepLimit,
    traj: &mut Trajectory,
) -> Result<(), OpiError> {
    traj.steps.clear();
    let max_steps = match limit {
        StepLimit::Horizon(h) | StepLimit::MustAbsorbWithin(h) => h,
    };
    let mut state = start;
    loop {
        let action = policy[state];
        let a = mdp.action(state, action);
        traj.steps.push(Step {
            state,
            action,
            cost: a.cost,
        });
        if a.cost == 0.0 && a.is_self_loop(state) {
            traj.termination = Termination::AbsorbedAt(traj.steps.len() - 1);
            return Ok(());
        }
        if traj.steps.len() >= max_steps {
            return match limit {
                StepLimit::Horizon(h) => {
                    traj.termination = Termination::TruncatedAtHorizon(h);
                    Ok(())
                }
                StepLimit::MustAbsorbWithin(h) => Err(OpiError::HorizonWithoutAbsorption {
                    start,
                    steps: h,
                }),
            };
        }
        state = a.sample_next(rng);
    }
}

/// First-visit tail estimate for one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEntry {
    pub state: usize,
    /// Index of the first occurrence of `state` in the trajectory.
    pub first_index: usize,
    pub estimate: f64,
}

/// Tail costs from the first visit of each visited state, ordered by first
/// visit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TailEstimates {
    pub entries: Vec<TailEntry>,
}

impl TailEstimates {
    pub fn get(&self, state: usize) -> Option<&TailEntry> {
        self.entries.iter().find(|e| e.state == state)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `J̃(i) = Σ_{k ≥ N(i)} α^{k−N(i)} cost_k` for each distinct visited state,
/// computed by one backward pass `tail(k) = cost_k + α · tail(k+1)`.
pub fn first_visit_tail_costs(traj: &Trajectory, alpha: f64) -> TailEstimates {
    let mut tails = Vec::new();
    let mut seen = Vec::new();
    let mut out = TailEstimates::default();
    tail_costs_into(traj, alpha, &mut tails, &mut seen, &mut out);
    out
}

pub(crate) fn tail_costs_into(
    traj: &Trajectory,
    alpha: f64,
    tails: &mut Vec<f64>,
    seen: &mut Vec<bool>,
    out: &mut TailEstimates,
) {
    let steps = &traj.steps;
    tails.clear();
    tails.resize(steps.len(), 0.0);
    let mut acc = 0.0;
    for k in (0..steps.len()).rev() {
        acc = steps[k].cost + alpha * acc;
        tails[k] = acc;
    }
    let max_state = steps.iter().map(|s| s.state).max().map_or(0, |m| m + 1);
    seen.clear();
    seen.resize(max_state, false);
    out.entries.clear();
    for (k, step) in steps.iter().enumerate() {
        if !seen[step.state] {
            seen[step.state] = true;
            out.entries.push(TailEntry {
                state: step.state,
                first_index: k,
                estimate: tails[k],
            });
        }
    }
}
