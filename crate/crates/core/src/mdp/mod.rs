//! Finite MDP data model, file loading and structural validation.

mod file;
mod structure;

pub use file::{load_mdp, parse_mdp, ActionDocument, ClassTag, MdpDocument, StateDocument};
pub use structure::{
    analyze, build_reachability_graph, decompose_structure, ReachabilityGraph, StructureReport,
    SupportMismatch,
};

use rand::Rng;
use thiserror::Error;

/// Tolerance on probability-vector sums.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field {field}: {message}")]
    Schema { field: String, message: String },
    #[error("num_states must be positive")]
    NoStates,
    #[error("state {state} has no actions")]
    NoActions { state: usize },
    #[error("row sum {sum} ≠ 1 at state {state}, action {action}")]
    RowSum { state: usize, action: usize, sum: f64 },
    #[error("negative probability {probability} for target {target} at state {state}, action {action}")]
    NegativeProbability {
        state: usize,
        action: usize,
        target: usize,
        probability: f64,
    },
    #[error("target {target} out of range (num_states = {num_states}) at state {state}, action {action}")]
    TargetOutOfRange {
        state: usize,
        action: usize,
        target: usize,
        num_states: usize,
    },
    #[error("duplicate target {target} at state {state}, action {action}")]
    DuplicateTarget {
        state: usize,
        action: usize,
        target: usize,
    },
    #[error("cost c({state},{action}) = {cost} violates c(i,u) ≥ 0")]
    NegativeCost { state: usize, action: usize, cost: f64 },
    #[error("cost c({state},{action}) is not finite")]
    NonFiniteCost { state: usize, action: usize },
    #[error("discount factor {alpha} must lie strictly inside (0, 1)")]
    InvalidDiscount { alpha: f64 },
    #[error("initial distribution: {0}")]
    InitialDistribution(String),
}

/// How future costs are weighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemClass {
    Discounted { alpha: f64 },
    /// Undiscounted, with a unique zero-cost absorbing terminal state.
    StochasticShortestPath,
    /// Negamin form of an alternating game: every backup is a minimum and the
    /// successor value enters with sign −1.
    NegaminGame,
}

impl ProblemClass {
    /// The factor multiplying the expected successor value in a backup.
    pub fn discount(&self) -> f64 {
        match *self {
            ProblemClass::Discounted { alpha } => alpha,
            ProblemClass::StochasticShortestPath => 1.0,
            ProblemClass::NegaminGame => -1.0,
        }
    }

    pub fn is_discounted(&self) -> bool {
        matches!(self, ProblemClass::Discounted { .. })
    }
}

/// One action: a deterministic cost and a sparse transition law.
///
/// `transitions` holds `(target, probability)` pairs sorted by target with
/// strictly positive probabilities only.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub cost: f64,
    pub transitions: Vec<(usize, f64)>,
}

impl Action {
    pub fn new(cost: f64, transitions: Vec<(usize, f64)>) -> Self {
        Action { cost, transitions }
    }

    /// Sorted list of targets reached with positive probability.
    pub fn support(&self) -> Vec<usize> {
        self.transitions.iter().map(|&(j, _)| j).collect()
    }

    pub fn probability(&self, target: usize) -> f64 {
        self.transitions
            .iter()
            .find(|&&(j, _)| j == target)
            .map_or(0.0, |&(_, p)| p)
    }

    /// True when the action stays in `state` with probability one.
    pub fn is_self_loop(&self, state: usize) -> bool {
        self.transitions.len() == 1 && self.transitions[0].0 == state
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.transitions.len() == 1 {
            return self.transitions[0].0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(j, p) in &self.transitions {
            acc += p;
            if u < acc {
                return j;
            }
        }
        self.transitions[self.transitions.len() - 1].0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    num_states: usize,
    actions: Vec<Vec<Action>>,
    problem_class: ProblemClass,
    max_abs_cost: f64,
}

impl Mdp {
    /// Builds a model, normalizing each transition list (zero entries dropped,
    /// sorted by target) and enforcing the model invariants.
    ///
    /// Costs must be nonnegative except for [`ProblemClass::NegaminGame`],
    /// whose sign-flipped costs are negative on the maximizer's states.
    pub fn new(
        num_states: usize,
        actions: Vec<Vec<Action>>,
        problem_class: ProblemClass,
    ) -> Result<Self, MdpError> {
        if num_states == 0 {
            return Err(MdpError::NoStates);
        }
        if actions.len() != num_states {
            return Err(MdpError::Schema {
                field: "states".into(),
                message: format!("expected {num_states} states, found {}", actions.len()),
            });
        }
        if let ProblemClass::Discounted { alpha } = problem_class {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(MdpError::InvalidDiscount { alpha });
            }
        }
        let mut normalized = Vec::with_capacity(num_states);
        let mut max_abs_cost: f64 = 0.0;
        for (state, state_actions) in actions.into_iter().enumerate() {
            if state_actions.is_empty() {
                return Err(MdpError::NoActions { state });
            }
            let mut out = Vec::with_capacity(state_actions.len());
            for (action, a) in state_actions.into_iter().enumerate() {
                if !a.cost.is_finite() {
                    return Err(MdpError::NonFiniteCost { state, action });
                }
                if a.cost < 0.0 && problem_class != ProblemClass::NegaminGame {
                    return Err(MdpError::NegativeCost {
                        state,
                        action,
                        cost: a.cost,
                    });
                }
                max_abs_cost = max_abs_cost.max(a.cost.abs());
                let mut transitions = Vec::with_capacity(a.transitions.len());
                let mut sum = 0.0;
                for &(target, probability) in &a.transitions {
                    if target >= num_states {
                        return Err(MdpError::TargetOutOfRange {
                            state,
                            action,
                            target,
                            num_states,
                        });
                    }
                    if !(probability >= 0.0) || !probability.is_finite() {
                        return Err(MdpError::NegativeProbability {
                            state,
                            action,
                            target,
                            probability,
                        });
                    }
                    sum += probability;
                    if probability > 0.0 {
                        transitions.push((target, probability));
                    }
                }
                if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
                    return Err(MdpError::RowSum { state, action, sum });
                }
                transitions.sort_by_key(|&(j, _)| j);
                if let Some(w) = transitions.windows(2).find(|w| w[0].0 == w[1].0) {
                    return Err(MdpError::DuplicateTarget {
                        state,
                        action,
                        target: w[0].0,
                    });
                }
                out.push(Action {
                    cost: a.cost,
                    transitions,
                });
            }
            normalized.push(out);
        }
        Ok(Mdp {
            num_states,
            actions: normalized,
            problem_class,
            max_abs_cost,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn problem_class(&self) -> ProblemClass {
        self.problem_class
    }

    pub fn discount(&self) -> f64 {
        self.problem_class.discount()
    }

    pub fn actions(&self, state: usize) -> &[Action] {
        &self.actions[state]
    }

    pub fn action(&self, state: usize, action: usize) -> &Action {
        &self.actions[state][action]
    }

    pub fn num_actions(&self, state: usize) -> usize {
        self.actions[state].len()
    }

    pub fn cost(&self, state: usize, action: usize) -> f64 {
        self.actions[state][action].cost
    }

    /// Largest |c(i,u)| over all state-action pairs.
    pub fn max_abs_cost(&self) -> f64 {
        self.max_abs_cost
    }

    /// One-step backup `c(i,u) + discount · Σ_j P_ij(u) J(j)`.
    #[inline]
    pub fn backup(&self, state: usize, action: usize, values: &[f64]) -> f64 {
        let a = &self.actions[state][action];
        let expected: f64 = a.transitions.iter().map(|&(j, p)| p * values[j]).sum();
        a.cost + self.discount() * expected
    }

    /// Minimizing action of the one-step backup, lowest index on ties.
    #[inline]
    pub fn greedy_action(&self, state: usize, values: &[f64]) -> (usize, f64) {
        let mut best = (0, self.backup(state, 0, values));
        for u in 1..self.actions[state].len() {
            let q = self.backup(state, u, values);
            if q < best.1 {
                best = (u, q);
            }
        }
        best
    }

    /// Copy of the model with every cost replaced by `f(state, action, cost)`.
    pub fn map_costs(
        &self,
        problem_class: ProblemClass,
        mut f: impl FnMut(usize, usize, f64) -> f64,
    ) -> Result<Mdp, MdpError> {
        let actions = self
            .actions
            .iter()
            .enumerate()
            .map(|(i, acts)| {
                acts.iter()
                    .enumerate()
                    .map(|(u, a)| Action::new(f(i, u, a.cost), a.transitions.clone()))
                    .collect()
            })
            .collect();
        Mdp::new(self.num_states, actions, problem_class)
    }

    /// Same states and kernels under a different problem class.
    pub fn with_problem_class(&self, problem_class: ProblemClass) -> Result<Mdp, MdpError> {
        self.map_costs(problem_class, |_, _, c| c)
    }
}

/// Distribution of the start state of every simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDistribution {
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
}

impl InitialDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self, MdpError> {
        if let Some((i, p)) = probabilities
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p >= 0.0) || !p.is_finite())
        {
            return Err(MdpError::InitialDistribution(format!(
                "entry {i} = {p} is not a nonnegative probability"
            )));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(MdpError::InitialDistribution(format!("sum {sum} ≠ 1")));
        }
        let mut acc = 0.0;
        let cumulative = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(InitialDistribution {
            probabilities,
            cumulative,
        })
    }

    /// Point mass on `state`.
    pub fn point(num_states: usize, state: usize) -> Self {
        let mut p = vec![0.0; num_states];
        p[state] = 1.0;
        Self::new(p).expect("point mass is a distribution")
    }

    /// Uniform over the given states.
    pub fn uniform_over(num_states: usize, states: &[usize]) -> Result<Self, MdpError> {
        if states.is_empty() {
            return Err(MdpError::InitialDistribution("empty support".into()));
        }
        let mut p = vec![0.0; num_states];
        let w = 1.0 / states.len() as f64;
        for &s in states {
            p[s] = w;
        }
        // renormalize the rounding so the sum check passes for any count
        let sum: f64 = p.iter().sum();
        for v in &mut p {
            *v /= sum;
        }
        Self::new(p)
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, state: usize) -> f64 {
        self.probabilities[state]
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.probabilities[i] > 0.0).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        match self.cumulative.iter().position(|&c| u < c) {
            Some(i) => i,
            None => self.support().last().copied().unwrap_or(0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Mdp {
        Mdp::new(
            3,
            vec![
                vec![Action::new(0.0, vec![(0, 1.0)])],
                vec![Action::new(1.0, vec![(0, 1.0)])],
                vec![Action::new(2.0, vec![(1, 1.0)])],
            ],
            ProblemClass::Discounted { alpha: 0.9 },
        )
        .unwrap()
    }

    #[test]
    fn backup_and_greedy() {
        let mdp = chain();
        assert_eq!(mdp.backup(2, 0, &[0.0, 1.0, 0.0]), 2.0 + 0.9 * 1.0);
        assert_eq!(mdp.greedy_action(1, &[0.0; 3]), (0, 1.0));
        assert_eq!(mdp.max_abs_cost(), 2.0);
    }

    #[test]
    fn rejects_bad_rows_and_costs() {
        let bad_sum = Mdp::new(
            2,
            vec![
                vec![Action::new(0.0, vec![(0, 1.0)])],
                vec![Action::new(0.0, vec![(0, 0.9)])],
            ],
            ProblemClass::StochasticShortestPath,
        );
        let msg = bad_sum.unwrap_err().to_string();
        assert_eq!(msg, "row sum 0.9 ≠ 1 at state 1, action 0");

        let negative = Mdp::new(
            1,
            vec![vec![Action::new(-1.0, vec![(0, 1.0)])]],
            ProblemClass::StochasticShortestPath,
        );
        assert!(matches!(negative, Err(MdpError::NegativeCost { .. })));
        assert!(negative.unwrap_err().to_string().contains("c(i,u) ≥ 0"));

        let game = Mdp::new(
            1,
            vec![vec![Action::new(-1.0, vec![(0, 1.0)])]],
            ProblemClass::NegaminGame,
        );
        assert!(game.is_ok());
    }

    #[test]
    fn rejects_empty_actions_and_bad_alpha() {
        assert!(matches!(
            Mdp::new(1, vec![vec![]], ProblemClass::StochasticShortestPath),
            Err(MdpError::NoActions { state: 0 })
        ));
        for alpha in [0.0, 1.0, -0.5, 1.5] {
            assert!(matches!(
                Mdp::new(
                    1,
                    vec![vec![Action::new(0.0, vec![(0, 1.0)])]],
                    ProblemClass::Discounted { alpha }
                ),
                Err(MdpError::InvalidDiscount { .. })
            ));
        }
    }

    #[test]
    fn zero_entries_are_dropped_and_sorted() {
        let mdp = Mdp::new(
            3,
            vec![
                vec![Action::new(0.0, vec![(0, 1.0)])],
                vec![Action::new(0.0, vec![(2, 0.5), (1, 0.0), (0, 0.5)])],
                vec![Action::new(0.0, vec![(2, 1.0)])],
            ],
            ProblemClass::StochasticShortestPath,
        )
        .unwrap();
        assert_eq!(mdp.action(1, 0).support(), vec![0, 2]);
    }

    #[test]
    fn initial_distribution_checks() {
        assert!(InitialDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(InitialDistribution::new(vec![-0.5, 1.5]).is_err());
        let p = InitialDistribution::uniform_over(5, &[1, 2, 3]).unwrap();
        assert_eq!(p.support(), vec![1, 2, 3]);
        let mut rng = crate::rng::stream_rng(1, 0);
        for _ in 0..100 {
            let s = p.sample(&mut rng);
            assert!((1..=3).contains(&s));
        }
    }
}
