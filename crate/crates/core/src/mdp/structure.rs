//! Reachability graph and the transient / recurrent decomposition.

use std::collections::VecDeque;

use serde::Serialize;

use super::{InitialDistribution, Mdp};

/// Two actions of one state whose transition supports differ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SupportMismatch {
    pub state: usize,
    pub reference_action: usize,
    pub action: usize,
    pub reference_support: Vec<usize>,
    pub support: Vec<usize>,
}

/// Policy-independent one-step reachability graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachabilityGraph {
    successors: Vec<Vec<usize>>,
    support_mismatches: Vec<SupportMismatch>,
}

impl ReachabilityGraph {
    /// Graph from explicit (sorted, deduplicated) successor lists.
    pub fn from_successors(mut successors: Vec<Vec<usize>>) -> Self {
        for s in &mut successors {
            s.sort_unstable();
            s.dedup();
        }
        ReachabilityGraph {
            successors,
            support_mismatches: Vec::new(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.successors.len()
    }

    pub fn successors(&self, state: usize) -> &[usize] {
        &self.successors[state]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.successors[from].binary_search(&to).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.successors
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |&j| (i, j)))
    }

    pub fn support_mismatches(&self) -> &[SupportMismatch] {
        &self.support_mismatches
    }

    /// States reachable from `sources` (inclusive) by breadth-first search.
    pub fn reachable_from(&self, sources: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(i) = queue.pop_front() {
            for &j in &self.successors[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    }

    /// Strongly connected components, sinks first (reverse topological order
    /// of the condensation). Members of each component are sorted.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        tarjan(&self.successors)
    }
}

/// Builds the reachability graph and records every state whose actions do not
/// share one transition support.
pub fn build_reachability_graph(mdp: &Mdp) -> ReachabilityGraph {
    let n = mdp.num_states();
    let mut successors = Vec::with_capacity(n);
    let mut support_mismatches = Vec::new();
    for i in 0..n {
        let reference = mdp.action(i, 0).support();
        let mut union = reference.clone();
        for u in 1..mdp.num_actions(i) {
            let support = mdp.action(i, u).support();
            if support != reference {
                support_mismatches.push(SupportMismatch {
                    state: i,
                    reference_action: 0,
                    action: u,
                    reference_support: reference.clone(),
                    support: support.clone(),
                });
            }
            union.extend(support);
        }
        union.sort_unstable();
        union.dedup();
        successors.push(union);
    }
    ReachabilityGraph {
        successors,
        support_mismatches,
    }
}

/// Transient / recurrent decomposition plus verdicts on the three structural
/// assumptions: every state reachable from the start distribution, common
/// transition supports across actions, and an acyclic transient subgraph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureReport {
    /// Transient states `(x_0, …, x_L)` such that every transient edge
    /// `(x_i, x_j)` has `i > j`. When the transient subgraph has cycles the
    /// members of each cyclic component appear contiguously.
    pub transient_order: Vec<usize>,
    /// Closed strongly connected components, each sorted.
    pub recurrent_classes: Vec<Vec<usize>>,
    /// States not graph-reachable from the support of the start distribution.
    pub unreachable_states: Vec<usize>,
    pub support_mismatches: Vec<SupportMismatch>,
    /// Transient components that contain a cycle (including self-loops).
    pub transient_cycles: Vec<Vec<usize>>,
    #[serde(skip)]
    recurrent_class_of: Vec<Option<usize>>,
    #[serde(skip)]
    transient_position: Vec<Option<usize>>,
}

impl StructureReport {
    pub fn assumption1_ok(&self) -> bool {
        self.unreachable_states.is_empty()
    }

    pub fn assumption2_ok(&self) -> bool {
        self.support_mismatches.is_empty()
    }

    pub fn assumption3_ok(&self) -> bool {
        self.transient_cycles.is_empty()
    }

    pub fn all_ok(&self) -> bool {
        self.assumption1_ok() && self.assumption2_ok() && self.assumption3_ok()
    }

    pub fn num_states(&self) -> usize {
        self.recurrent_class_of.len()
    }

    pub fn is_transient(&self, state: usize) -> bool {
        self.recurrent_class_of[state].is_none()
    }

    pub fn recurrent_class_of(&self, state: usize) -> Option<usize> {
        self.recurrent_class_of[state]
    }

    /// Index of `state` in [`Self::transient_order`].
    pub fn transient_position(&self, state: usize) -> Option<usize> {
        self.transient_position[state]
    }

    /// States forming a single-state recurrent class.
    pub fn absorbing_states(&self) -> Vec<usize> {
        self.recurrent_classes
            .iter()
            .filter(|c| c.len() == 1)
            .map(|c| c[0])
            .collect()
    }

    /// Human-readable verdict lines.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "transient states (reverse topological order): {:?}\n",
            self.transient_order
        ));
        out.push_str(&format!(
            "recurrent classes ({}): {:?}\n",
            self.recurrent_classes.len(),
            self.recurrent_classes
        ));
        let verdict = |ok: bool| if ok { "ok" } else { "VIOLATED" };
        out.push_str(&format!(
            "reachability (every state reachable from the start distribution): {}",
            verdict(self.assumption1_ok())
        ));
        if !self.assumption1_ok() {
            out.push_str(&format!("; unreachable states {:?}", self.unreachable_states));
        }
        out.push('\n');
        out.push_str(&format!(
            "common support (same successor set under every action): {}",
            verdict(self.assumption2_ok())
        ));
        for m in &self.support_mismatches {
            out.push_str(&format!(
                "; state {} action {} support {:?} vs action {} support {:?}",
                m.state, m.action, m.support, m.reference_action, m.reference_support
            ));
        }
        out.push('\n');
        out.push_str(&format!(
            "acyclicity (transient subgraph has no cycles): {}",
            verdict(self.assumption3_ok())
        ));
        if !self.assumption3_ok() {
            out.push_str(&format!("; cycles {:?}", self.transient_cycles));
        }
        out.push('\n');
        out
    }
}

/// Decomposes the state space into transient states and closed recurrent
/// classes and evaluates the structural assumptions.
///
/// Reachability from `supp(p)` stands in for positive ever-visit probability
/// under every policy, which is exact once all actions share their support.
pub fn decompose_structure(graph: &ReachabilityGraph, p: &InitialDistribution) -> StructureReport {
    let n = graph.num_states();
    let components = graph.strongly_connected_components();
    let mut component_of = vec![0; n];
    for (c, members) in components.iter().enumerate() {
        for &s in members {
            component_of[s] = c;
        }
    }

    let mut recurrent_classes = Vec::new();
    let mut recurrent_class_of = vec![None; n];
    let mut transient_order = Vec::new();
    let mut transient_cycles = Vec::new();
    // Tarjan emits sink components first, which is exactly the stored order.
    for (c, members) in components.iter().enumerate() {
        let closed = members
            .iter()
            .all(|&s| graph.successors(s).iter().all(|&j| component_of[j] == c));
        if closed {
            for &s in members {
                recurrent_class_of[s] = Some(recurrent_classes.len());
            }
            recurrent_classes.push(members.clone());
        } else {
            let cyclic = members.len() > 1 || graph.has_edge(members[0], members[0]);
            if cyclic {
                transient_cycles.push(members.clone());
            }
            transient_order.extend(members.iter().copied());
        }
    }
    let mut transient_position = vec![None; n];
    for (k, &s) in transient_order.iter().enumerate() {
        transient_position[s] = Some(k);
    }

    let reachable = graph.reachable_from(&p.support());
    let unreachable_states = (0..n).filter(|&i| !reachable[i]).collect();

    StructureReport {
        transient_order,
        recurrent_classes,
        unreachable_states,
        support_mismatches: graph.support_mismatches().to_vec(),
        transient_cycles,
        recurrent_class_of,
        transient_position,
    }
}

/// Builds the graph and decomposes it in one call.
pub fn analyze(mdp: &Mdp, p: &InitialDistribution) -> StructureReport {
    decompose_structure(&build_reachability_graph(mdp), p)
}

/// Iterative Tarjan. Roots are tried in increasing index order and successor
/// lists are sorted, so the output is deterministic.
fn tarjan(successors: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = successors.len();
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut next_index = 0;
    // (vertex, next successor position)
    let mut call_stack: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call_stack.push((root, 0));
        index[root] = next_index;
        lowlink[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(top) = call_stack.last_mut() {
            let v = top.0;
            if top.1 < successors[v].len() {
                let w = successors[v][top.1];
                top.1 += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    lowlink[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call_stack.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
            } else {
                call_stack.pop();
                if let Some(&(parent, _)) = call_stack.last() {
                    lowlink[parent] = lowlink[parent].min(lowlink[v]);
                }
                if lowlink[v] == index[v] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    component.sort_unstable();
                    components.push(component);
                }
            }
        }
    }
    components
}
