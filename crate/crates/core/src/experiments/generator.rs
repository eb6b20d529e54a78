//! MDPs built from a reward-labelled DAG.
//!
//! Each edge `(i, j)` of the base graph becomes an action at `i` that moves
//! along the chosen edge with probability 0.6 and otherwise slips uniformly to
//! one of `i`'s other out-neighbours. The second experiment adds, per edge, a
//! safer action (0.8 on the chosen edge) that earns one unit less reward.
//! Rewards are turned into nonnegative costs `c = shift − r` with a uniform
//! shift, which moves every value by `shift/(1−α)` and leaves greedy choices
//! unchanged.

use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::mdp::{Action, InitialDistribution, Mdp, MdpError, ProblemClass};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// One action per out-edge.
    Experiment1,
    /// A risky and a safe action per out-edge.
    Experiment2,
}

impl ExperimentKind {
    pub fn label(&self) -> &'static str {
        match self {
            ExperimentKind::Experiment1 => "exp1",
            ExperimentKind::Experiment2 => "exp2",
        }
    }
}

/// A DAG whose only sink is state 0, with a reward per state.
///
/// File format: `{"num_states": n, "edges": [[i, j], ...], "rewards": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseGraph {
    pub num_states: usize,
    pub edges: Vec<(usize, usize)>,
    pub rewards: Vec<f64>,
}

impl BaseGraph {
    /// Out-neighbours of every state, in edge order.
    pub fn out_neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_states];
        for &(i, j) in &self.edges {
            out[i].push(j);
        }
        out
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let n = self.num_states;
        let bad = |msg: String| Err(ExperimentError::Graph(msg));
        if n < 2 {
            return bad(format!("need at least 2 states, got {n}"));
        }
        if self.rewards.len() != n {
            return bad(format!("{} rewards for {n} states", self.rewards.len()));
        }
        if let Some(r) = self.rewards.iter().find(|r| !r.is_finite()) {
            return bad(format!("reward {r} is not finite"));
        }
        if self.rewards[0] != 0.0 {
            return bad(format!("sink 0 must have reward 0, got {}", self.rewards[0]));
        }
        let out = self.out_neighbors();
        for (i, targets) in out.iter().enumerate() {
            if let Some(&j) = targets.iter().find(|&&j| j >= n) {
                return bad(format!("edge ({i}, {j}) leaves the state range"));
            }
            let mut sorted = targets.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != targets.len() {
                return bad(format!("state {i} has a repeated out-edge"));
            }
        }
        if !out[0].is_empty() {
            return bad("sink 0 must have no out-edges".into());
        }
        if let Some(i) = (1..n).find(|&i| out[i].is_empty()) {
            return bad(format!("state {i} has no out-edges; 0 must be the only sink"));
        }
        // Kahn's algorithm on the reversed graph
        let mut indegree = vec![0usize; n];
        for &(_, j) in &self.edges {
            indegree[j] += 1;
        }
        let mut stack: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = stack.pop() {
            seen += 1;
            for &j in &out[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    stack.push(j);
                }
            }
        }
        if seen != n {
            return bad("base graph has a cycle".into());
        }
        Ok(())
    }

    /// Each state `i ≥ 1` gets between 1 and `min(max_out_degree, i)`
    /// distinct edges to lower-numbered states and an integer reward in
    /// `[−9, 0]`.
    pub fn random(num_states: usize, max_out_degree: usize, seed: u64) -> Self {
        assert!(num_states >= 2 && max_out_degree >= 1);
        let mut rng = stream_rng(seed, 0);
        let mut edges = Vec::new();
        let mut rewards = vec![0.0];
        for i in 1..num_states {
            let degree = rng.random_range(1..=max_out_degree.min(i));
            let mut targets = sample(&mut rng, i, degree).into_vec();
            targets.sort_unstable();
            edges.extend(targets.into_iter().map(|j| (i, j)));
            rewards.push(-(rng.random_range(0..=9) as f64));
        }
        BaseGraph {
            num_states,
            edges,
            rewards,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let g: BaseGraph = serde_json::from_str(text).map_err(|e| MdpError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        g.validate()?;
        Ok(g)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| MdpError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }
}

/// Layered default graph shared by both experiments: 20 states in layers of
/// sizes 1 (sink), 3, 4, 4, 4, 4. Every state links to all states of the
/// next layer down (the first layer links to the sink), so each decision has
/// three or four outcomes. Rewards are fixed integers in `[−9, 0]`.
fn layered_default(rewards: [i32; 20]) -> BaseGraph {
    let layers: [&[usize]; 6] = [
        &[0],
        &[1, 2, 3],
        &[4, 5, 6, 7],
        &[8, 9, 10, 11],
        &[12, 13, 14, 15],
        &[16, 17, 18, 19],
    ];
    let mut edges = Vec::new();
    for w in layers.windows(2) {
        for &i in w[1] {
            edges.extend(w[0].iter().map(|&j| (i, j)));
        }
    }
    BaseGraph {
        num_states: 20,
        edges,
        rewards: rewards.iter().map(|&r| r as f64).collect(),
    }
}

/// The default graph for the one-action-per-edge experiment.
pub fn default_experiment1_graph() -> BaseGraph {
    layered_default([
        0, -3, -1, -6, -2, -8, -4, 0, -5, -1, -7, -3, -9, -2, -6, -4, -1, -5, -8, -2,
    ])
}

/// The default graph for the risky/safe experiment.
pub fn default_experiment2_graph() -> BaseGraph {
    layered_default([
        0, -2, -5, -1, -4, -7, -3, -6, -1, -8, -2, -5, -3, -9, -4, -7, -2, -6, -1, -5,
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: ExperimentKind,
    pub graph: BaseGraph,
    pub alpha: f64,
    /// Probability of following the chosen edge (the rest slips uniformly
    /// over the other out-edges).
    pub chosen_probability: f64,
    /// Chosen-edge probability of the safe action.
    pub safe_probability: f64,
    /// Reward given up by the safe action.
    pub safe_penalty: f64,
}

impl GeneratorSpec {
    pub fn new(kind: ExperimentKind, graph: BaseGraph) -> Self {
        GeneratorSpec {
            kind,
            graph,
            alpha: 0.9,
            chosen_probability: 0.6,
            safe_probability: 0.8,
            safe_penalty: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedMdp {
    pub mdp: Mdp,
    /// Uniform over the non-sink states.
    pub initial: InitialDistribution,
    /// `c(i,u) = cost_shift − r(i,u)`.
    pub cost_shift: f64,
}

/// One action moving to `chosen` with probability `prob`; the remainder is
/// split evenly over the other targets. A lone target is deterministic.
fn slip_action(cost: f64, targets: &[usize], chosen: usize, prob: f64) -> Action {
    if targets.len() == 1 {
        return Action::new(cost, vec![(chosen, 1.0)]);
    }
    let other = (1.0 - prob) / (targets.len() - 1) as f64;
    Action::new(
        cost,
        targets
            .iter()
            .map(|&j| (j, if j == chosen { prob } else { other }))
            .collect(),
    )
}

pub fn generate_experiment_mdp(spec: &GeneratorSpec) -> Result<GeneratedMdp, ExperimentError> {
    spec.graph.validate()?;
    for (name, p) in [
        ("chosen_probability", spec.chosen_probability),
        ("safe_probability", spec.safe_probability),
    ] {
        if !(p > 0.0 && p <= 1.0) {
            return Err(ExperimentError::Graph(format!("{name} {p} must lie in (0, 1]")));
        }
    }
    let g = &spec.graph;
    let out = g.out_neighbors();
    // (reward, targets, chosen, probability) per action
    let mut raw: Vec<Vec<(f64, usize, f64)>> = vec![vec![(0.0, 0, 1.0)]];
    for i in 1..g.num_states {
        let mut acts = Vec::new();
        for &j in &out[i] {
            acts.push((g.rewards[i], j, spec.chosen_probability));
            if spec.kind == ExperimentKind::Experiment2 {
                acts.push((g.rewards[i] - spec.safe_penalty, j, spec.safe_probability));
            }
        }
        raw.push(acts);
    }
    let cost_shift = raw
        .iter()
        .flatten()
        .map(|&(r, _, _)| r)
        .fold(0.0, f64::max);
    let actions = raw
        .iter()
        .enumerate()
        .map(|(i, acts)| {
            acts.iter()
                .map(|&(r, chosen, prob)| {
                    let targets: &[usize] = if i == 0 { &[0] } else { &out[i] };
                    slip_action(cost_shift - r, targets, chosen, prob)
                })
                .collect()
        })
        .collect();
    let mdp = Mdp::new(
        g.num_states,
        actions,
        ProblemClass::Discounted { alpha: spec.alpha },
    )?;
    let non_sink: Vec<usize> = (1..g.num_states).collect();
    let initial = InitialDistribution::uniform_over(g.num_states, &non_sink)?;
    Ok(GeneratedMdp {
        mdp,
        initial,
        cost_shift,
    })
}
