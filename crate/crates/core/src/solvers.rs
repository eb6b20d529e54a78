//! Exact dynamic-programming oracles.
//!
//! Discounted problems are solved by dense linear algebra or contraction
//! iteration. Undiscounted problems (stochastic shortest path, negamin games)
//! are only accepted on acyclic transient structure ending in zero-cost closed
//! classes, where backward induction is exact.

use std::ops::{Deref, DerefMut};

use serde::Serialize;
use thiserror::Error;

use crate::mdp::{build_reachability_graph, InitialDistribution, Mdp, StructureReport};

/// Absolute tolerance for membership in an optimal action set.
pub const OPTIMAL_ACTION_TOLERANCE: f64 = 1e-9;

/// Largest state count solved by a direct linear solve.
pub const DIRECT_SOLVE_LIMIT: usize = 2000;

const MAX_POLICY_ITERATION_STEPS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("problem is not contractive: {0}")]
    NonContractive(String),
    #[error("no convergence within {iterations} iterations")]
    MaxIterationsExceeded { iterations: usize },
    #[error("structure violation: {0}")]
    StructureViolation(String),
    #[error("policy is invalid: {0}")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn zeros(n: usize) -> Self {
        ValueFunction(vec![0.0; n])
    }

    /// `‖self − other‖∞`.
    pub fn sup_distance(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Deref for ValueFunction {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for ValueFunction {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

/// A stationary deterministic policy: one action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    pub fn first_actions(n: usize) -> Self {
        Policy(vec![0; n])
    }

    pub fn validate(&self, mdp: &Mdp) -> Result<(), SolverError> {
        if self.0.len() != mdp.num_states() {
            return Err(SolverError::InvalidPolicy(format!(
                "length {} ≠ num_states {}",
                self.0.len(),
                mdp.num_states()
            )));
        }
        for (i, &u) in self.0.iter().enumerate() {
            if u >= mdp.num_actions(i) {
                return Err(SolverError::InvalidPolicy(format!(
                    "action {u} at state {i} but only {} actions exist",
                    mdp.num_actions(i)
                )));
            }
        }
        Ok(())
    }
}

impl Deref for Policy {
    type Target = Vec<usize>;
    fn deref(&self) -> &Vec<usize> {
        &self.0
    }
}

/// Per-state sets of actions attaining the Bellman minimum at J*.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct OptimalActionSets(pub Vec<Vec<usize>>);

impl OptimalActionSets {
    pub fn from_values(mdp: &Mdp, values: &[f64], tolerance: f64) -> Self {
        let sets = (0..mdp.num_states())
            .map(|i| {
                let (_, best) = mdp.greedy_action(i, values);
                (0..mdp.num_actions(i))
                    .filter(|&u| mdp.backup(i, u, values) <= best + tolerance)
                    .collect()
            })
            .collect();
        OptimalActionSets(sets)
    }

    pub fn contains(&self, state: usize, action: usize) -> bool {
        self.0[state].contains(&action)
    }

    /// States where `policy` picks an action outside the optimal set.
    pub fn violations(&self, policy: &Policy) -> Vec<usize> {
        policy
            .iter()
            .enumerate()
            .filter(|&(i, &u)| !self.contains(i, u))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Probability of ever visiting each state.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ReachProbabilities(pub Vec<f64>);

impl ReachProbabilities {
    /// Sum of member probabilities, used as the cluster-level diagnostic.
    pub fn cluster_sum(&self, members: &[usize]) -> f64 {
        members.iter().map(|&i| self.0[i]).sum()
    }
}

impl Deref for ReachProbabilities {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

/// Output of [`policy_iteration`].
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub values: ValueFunction,
    pub policy: Policy,
    pub optimal_actions: OptimalActionSets,
    pub improvement_steps: usize,
}

#[derive(Serialize)]
struct SolutionExport<'a> {
    #[serde(rename = "J")]
    values: &'a [f64],
    policy: &'a [usize],
    optimal_action_sets: &'a [Vec<usize>],
}

impl Solution {
    /// `{"J": [...], "policy": [...], "optimal_action_sets": [[...]]}`
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SolutionExport {
            values: &self.values,
            policy: &self.policy,
            optimal_action_sets: &self.optimal_actions.0,
        })
        .expect("solution serializes")
    }
}

/// `T_μ J`.
pub fn apply_policy_bellman(mdp: &Mdp, policy: &Policy, values: &[f64]) -> ValueFunction {
    ValueFunction(
        (0..mdp.num_states())
            .map(|i| mdp.backup(i, policy[i], values))
            .collect(),
    )
}

/// `T J` together with the greedy policy (lowest action index on ties).
pub fn apply_bellman(mdp: &Mdp, values: &[f64]) -> (ValueFunction, Policy) {
    let (actions, backed): (Vec<usize>, Vec<f64>) = (0..mdp.num_states())
        .map(|i| mdp.greedy_action(i, values))
        .unzip();
    (ValueFunction(backed), Policy(actions))
}

pub fn greedy_policy(mdp: &Mdp, values: &[f64]) -> Policy {
    Policy(
        (0..mdp.num_states())
            .map(|i| mdp.greedy_action(i, values).0)
            .collect(),
    )
}

/// `‖T J − J‖∞`.
pub fn bellman_residual(mdp: &Mdp, values: &[f64]) -> f64 {
    apply_bellman(mdp, values).0.sup_distance(values)
}

/// `‖T_μ J − J‖∞`.
pub fn policy_residual(mdp: &Mdp, policy: &Policy, values: &[f64]) -> f64 {
    apply_policy_bellman(mdp, policy, values).sup_distance(values)
}

/// Exact `J^μ`.
pub fn evaluate_policy_exact(mdp: &Mdp, policy: &Policy) -> Result<ValueFunction, SolverError> {
    policy.validate(mdp)?;
    if !mdp.problem_class().is_discounted() {
        return backward_induction(mdp, ClosedClassRule::PolicyActions(policy), |i, v| {
            mdp.backup(i, policy[i], v)
        });
    }
    let n = mdp.num_states();
    if n <= DIRECT_SOLVE_LIMIT {
        let alpha = mdp.discount();
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        for i in 0..n {
            a[i * n + i] = 1.0;
            let act = mdp.action(i, policy[i]);
            for &(j, p) in &act.transitions {
                a[i * n + j] -= alpha * p;
            }
            b[i] = act.cost;
        }
        let lu = LuFactorization::new(a, n).ok_or_else(|| {
            SolverError::NonContractive("singular policy evaluation system".into())
        })?;
        let mut x = lu.solve(&b);
        // one step of iterative refinement
        let r: Vec<f64> = apply_policy_bellman(mdp, policy, &x)
            .iter()
            .zip(&x)
            .map(|(tx, xi)| tx - xi)
            .collect();
        let d = lu.solve(&r);
        for (xi, di) in x.iter_mut().zip(d) {
            *xi += di;
        }
        for (xi, zero) in x.iter_mut().zip(zero_cost_closure(mdp, policy)) {
            // exact zeros where no cost is ever incurred; also clears -0.0
            *xi = if zero { 0.0 } else { *xi + 0.0 };
        }
        Ok(ValueFunction(x))
    } else {
        let mut values = vec![0.0; n];
        for _ in 0..10_000_000 {
            let next = apply_policy_bellman(mdp, policy, &values);
            let diff = next.sup_distance(&values);
            values = next.0;
            if diff < 1e-11 {
                return Ok(ValueFunction(values));
            }
        }
        Err(SolverError::MaxIterationsExceeded {
            iterations: 10_000_000,
        })
    }
}

/// States from which `policy` never incurs a nonzero cost: the largest set
/// of zero-cost states closed under the policy's transitions.
fn zero_cost_closure(mdp: &Mdp, policy: &Policy) -> Vec<bool> {
    let n = mdp.num_states();
    let mut zero: Vec<bool> = (0..n).map(|i| mdp.cost(i, policy[i]) == 0.0).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            if zero[i] && mdp.action(i, policy[i]).transitions.iter().any(|&(j, _)| !zero[j]) {
                zero[i] = false;
                changed = true;
            }
        }
    }
    zero
}

/// Optimal values.
///
/// Discounted: iterates `T` until `‖TJ − J‖∞ < tol·(1−α)/(2α)`, which bounds
/// the returned error by `tol`. Undiscounted: exact backward induction.
pub fn value_iteration(
    mdp: &Mdp,
    tol: f64,
    max_iterations: usize,
) -> Result<ValueFunction, SolverError> {
    if !mdp.problem_class().is_discounted() {
        return backward_induction(mdp, ClosedClassRule::AllActions, |i, v| {
            mdp.greedy_action(i, v).1
        });
    }
    let alpha = mdp.discount();
    let threshold = tol * (1.0 - alpha) / (2.0 * alpha);
    let mut values = ValueFunction::zeros(mdp.num_states());
    for _ in 0..max_iterations {
        let (next, _) = apply_bellman(mdp, &values);
        let diff = next.sup_distance(&values);
        values = next;
        if diff < threshold {
            return Ok(values);
        }
    }
    Err(SolverError::MaxIterationsExceeded {
        iterations: max_iterations,
    })
}

/// Howard policy iteration from the all-first-actions policy.
pub fn policy_iteration(mdp: &Mdp) -> Result<Solution, SolverError> {
    policy_iteration_with_trace(mdp).map(|(s, _)| s)
}

/// Policy iteration that also returns `J^{μ_k}` for every evaluated policy.
pub fn policy_iteration_with_trace(
    mdp: &Mdp,
) -> Result<(Solution, Vec<ValueFunction>), SolverError> {
    let n = mdp.num_states();
    let mut policy = Policy::first_actions(n);
    let mut trace = Vec::new();
    for step in 1..=MAX_POLICY_ITERATION_STEPS {
        let values = evaluate_policy_exact(mdp, &policy)?;
        let mut changed = false;
        let mut next = policy.0.clone();
        for i in 0..n {
            let current = mdp.backup(i, policy[i], &values);
            let (u, best) = mdp.greedy_action(i, &values);
            // switch only on a strict improvement beyond rounding noise
            if best < current - 1e-12 * (1.0 + current.abs()) {
                next[i] = u;
                changed = true;
            }
        }
        trace.push(values.clone());
        if !changed {
            let optimal_actions =
                OptimalActionSets::from_values(mdp, &values, OPTIMAL_ACTION_TOLERANCE);
            return Ok((
                Solution {
                    values,
                    policy,
                    optimal_actions,
                    improvement_steps: step,
                },
                trace,
            ));
        }
        policy = Policy(next);
    }
    Err(SolverError::MaxIterationsExceeded {
        iterations: MAX_POLICY_ITERATION_STEPS,
    })
}

/// Ever-visit probabilities `q_μ(i)` from the start distribution.
///
/// Transient states are visited at most once on any path, so arrival events
/// through different predecessors are disjoint and probabilities add along a
/// forward topological sweep. A recurrent class, once entered, is visited in
/// full, so each member receives the class entry probability.
pub fn reach_probabilities(
    mdp: &Mdp,
    policy: &Policy,
    p: &InitialDistribution,
    report: &StructureReport,
) -> Result<ReachProbabilities, SolverError> {
    if !report.assumption3_ok() {
        return Err(SolverError::StructureViolation(format!(
            "transient cycles {:?}",
            report.transient_cycles
        )));
    }
    policy.validate(mdp)?;
    let n = mdp.num_states();
    let mut q = vec![0.0; n];
    let mut class_entry = vec![0.0; report.recurrent_classes.len()];
    for i in 0..n {
        match report.recurrent_class_of(i) {
            None => q[i] = p.probability(i),
            Some(c) => class_entry[c] += p.probability(i),
        }
    }
    for &x in report.transient_order.iter().rev() {
        let qx = q[x];
        for &(j, prob) in &mdp.action(x, policy[x]).transitions {
            match report.recurrent_class_of(j) {
                None => q[j] += qx * prob,
                Some(c) => class_entry[c] += qx * prob,
            }
        }
    }
    for (c, members) in report.recurrent_classes.iter().enumerate() {
        for &i in members {
            q[i] = class_entry[c];
        }
    }
    for v in &mut q {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(ReachProbabilities(q))
}

/// True when `policy` picks an optimal action at every state it reaches with
/// positive probability.
pub fn policy_is_optimal(
    mdp: &Mdp,
    policy: &Policy,
    optimal_actions: &OptimalActionSets,
    p: &InitialDistribution,
    report: &StructureReport,
) -> bool {
    let bad = optimal_actions.violations(policy);
    if bad.is_empty() {
        return true;
    }
    match reach_probabilities(mdp, policy, p, report) {
        Ok(q) => bad.iter().all(|&i| q[i] == 0.0),
        Err(_) => false,
    }
}

enum ClosedClassRule<'a> {
    PolicyActions(&'a Policy),
    AllActions,
}

/// Backward induction for undiscounted problems. Closed classes must carry
/// zero cost (under the policy's actions, or under every action when
/// optimizing) and every transient component must be a single state without a
/// self-loop.
fn backward_induction(
    mdp: &Mdp,
    rule: ClosedClassRule<'_>,
    mut backup: impl FnMut(usize, &[f64]) -> f64,
) -> Result<ValueFunction, SolverError> {
    let graph = build_reachability_graph(mdp);
    let n = mdp.num_states();
    let components = graph.strongly_connected_components();
    let mut component_of = vec![0; n];
    for (c, members) in components.iter().enumerate() {
        for &s in members {
            component_of[s] = c;
        }
    }
    let mut values = vec![0.0; n];
    for (c, members) in components.iter().enumerate() {
        let closed = members
            .iter()
            .all(|&s| graph.successors(s).iter().all(|&j| component_of[j] == c));
        if closed {
            let zero_cost = members.iter().all(|&s| match rule {
                ClosedClassRule::PolicyActions(policy) => mdp.cost(s, policy[s]) == 0.0,
                ClosedClassRule::AllActions => mdp.actions(s).iter().all(|a| a.cost == 0.0),
            });
            if !zero_cost {
                return Err(SolverError::NonContractive(format!(
                    "closed class {members:?} incurs nonzero cost without discounting"
                )));
            }
            // values stay 0
        } else if members.len() > 1 || graph.has_edge(members[0], members[0]) {
            return Err(SolverError::NonContractive(format!(
                "transient cycle {members:?} without discounting"
            )));
        } else {
            let s = members[0];
            values[s] = backup(s, &values);
        }
    }
    Ok(ValueFunction(values))
}

/// Dense LU factorization with partial pivoting (row-major, in place).
struct LuFactorization {
    lu: Vec<f64>,
    pivots: Vec<usize>,
    n: usize,
}

impl LuFactorization {
    fn new(mut a: Vec<f64>, n: usize) -> Option<Self> {
        let mut pivots: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, max) = (k..n)
                .map(|r| (r, a[r * n + k].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if max <= f64::EPSILON * 1e-3 {
                return None;
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                pivots.swap(k, p);
            }
            let pivot = a[k * n + k];
            for r in (k + 1)..n {
                let factor = a[r * n + k] / pivot;
                if factor == 0.0 {
                    continue;
                }
                a[r * n + k] = factor;
                for c in (k + 1)..n {
                    a[r * n + c] -= factor * a[k * n + c];
                }
            }
        }
        Some(LuFactorization { lu: a, pivots, n })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.pivots.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let mut s = x[r];
            for c in 0..r {
                s -= self.lu[r * n + c] * x[c];
            }
            x[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for c in (r + 1)..n {
                s -= self.lu[r * n + c] * x[c];
            }
            x[r] = s / self.lu[r * n + r];
        }
        x
    }
}
