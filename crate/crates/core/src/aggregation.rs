//! OPI over a partition of the states into clusters that share one value.
//!
//! The value of state `i` is `θ(φ(i))`, where `φ` maps states to clusters.
//! Each iteration updates, for every cluster met by the trajectory, its
//! parameter with the tail cost from the first-visited member. This is
//! exact when members of a cluster have equal optimal values, and each
//! cluster is met at most once per trajectory when clusters are layered by
//! their maximum distance to an absorbing state.

use std::fmt::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{build_reachability_graph, InitialDistribution, Mdp, MdpError, StructureReport};
use crate::opi::{Learner, OpiConfig, OpiError, RunResult};
use crate::solvers::{reach_probabilities, Policy, Solution, SolverError, ValueFunction};

/// Default tolerance for the equal-optimal-value check within a cluster.
pub const DEFAULT_VALUE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum ClusterViolation {
    Partition(String),
    /// Closed classes with more than one state.
    NonAbsorbingRecurrent(Vec<Vec<usize>>),
    TransientCycles(Vec<Vec<usize>>),
    /// Members at different maximum distances to an absorbing state.
    LayerMismatch { cluster: usize, layers: Vec<(usize, usize)> },
    /// Members whose optimal values differ by more than the tolerance.
    UnequalValues { cluster: usize, spread: f64 },
    UnreachableCluster { cluster: usize },
}

impl fmt::Display for ClusterViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterViolation::Partition(msg) => write!(f, "clusters do not partition the states: {msg}"),
            ClusterViolation::NonAbsorbingRecurrent(c) => write!(
                f,
                "every non-transient state must be absorbing; multi-state classes {c:?}"
            ),
            ClusterViolation::TransientCycles(c) => write!(f, "transient cycles {c:?}"),
            ClusterViolation::LayerMismatch { cluster, layers } => write!(
                f,
                "cluster {cluster} mixes layers (state, layer) {layers:?}"
            ),
            ClusterViolation::UnequalValues { cluster, spread } => write!(
                f,
                "cluster {cluster} has optimal values spread {spread:e}"
            ),
            ClusterViolation::UnreachableCluster { cluster } => {
                write!(f, "cluster {cluster} is unreachable from the start distribution")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum AggregationError {
    #[error("invalid clustering: {}", join(.0))]
    Clusters(Vec<ClusterViolation>),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Opi(#[from] OpiError),
}

fn join(items: &[ClusterViolation]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Maximum number of steps from each state to an absorbing state along the
/// reachability graph (0 for states in closed classes).
pub fn state_layers(mdp: &Mdp, report: &StructureReport) -> Vec<usize> {
    let graph = build_reachability_graph(mdp);
    let mut layer = vec![0usize; mdp.num_states()];
    // every transient edge points backwards in `transient_order`
    for &x in &report.transient_order {
        layer[x] = graph
            .successors(x)
            .iter()
            .filter(|&&j| j != x)
            .map(|&j| layer[j] + 1)
            .max()
            .unwrap_or(0);
    }
    layer
}

/// A partition of the states with per-cluster layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMap {
    cluster_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    /// Layer of each cluster: the largest member layer.
    layer: Vec<usize>,
    state_layer: Vec<usize>,
}

impl ClusterMap {
    /// Fails only if `clusters` is not a partition of the states; the
    /// remaining conditions are checked by [`validate_clusters`].
    pub fn new(
        mdp: &Mdp,
        report: &StructureReport,
        clusters: Vec<Vec<usize>>,
    ) -> Result<Self, ClusterViolation> {
        let n = mdp.num_states();
        let mut cluster_of = vec![usize::MAX; n];
        for (c, members) in clusters.iter().enumerate() {
            if members.is_empty() {
                return Err(ClusterViolation::Partition(format!("cluster {c} is empty")));
            }
            for &i in members {
                if i >= n {
                    return Err(ClusterViolation::Partition(format!(
                        "state {i} in cluster {c} is out of range (num_states = {n})"
                    )));
                }
                if cluster_of[i] != usize::MAX {
                    return Err(ClusterViolation::Partition(format!(
                        "state {i} appears in clusters {} and {c}",
                        cluster_of[i]
                    )));
                }
                cluster_of[i] = c;
            }
        }
        if let Some(i) = cluster_of.iter().position(|&c| c == usize::MAX) {
            return Err(ClusterViolation::Partition(format!("state {i} is in no cluster")));
        }
        let state_layer = state_layers(mdp, report);
        let layer = clusters
            .iter()
            .map(|m| m.iter().map(|&i| state_layer[i]).max().unwrap_or(0))
            .collect();
        Ok(ClusterMap {
            cluster_of,
            members: clusters,
            layer,
            state_layer,
        })
    }

    /// One cluster per state; aggregated OPI then coincides with tabular OPI.
    pub fn singletons(mdp: &Mdp, report: &StructureReport) -> Self {
        let clusters = (0..mdp.num_states()).map(|i| vec![i]).collect();
        ClusterMap::new(mdp, report, clusters).expect("singletons partition the states")
    }

    pub fn num_clusters(&self) -> usize {
        self.members.len()
    }

    pub fn cluster_of(&self, state: usize) -> usize {
        self.cluster_of[state]
    }

    pub fn members(&self, cluster: usize) -> &[usize] {
        &self.members[cluster]
    }

    pub fn layer(&self, cluster: usize) -> usize {
        self.layer[cluster]
    }

    pub fn state_layer(&self, state: usize) -> usize {
        self.state_layer[state]
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ClusterDocument {
    clusters: Vec<Vec<usize>>,
}

/// Parses `{"clusters": [[ids...], ...]}`.
pub fn parse_clusters(text: &str) -> Result<Vec<Vec<usize>>, MdpError> {
    let doc: ClusterDocument = serde_json::from_str(text).map_err(|e| MdpError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(doc.clusters)
}

pub fn load_clusters(path: impl AsRef<Path>) -> Result<Vec<Vec<usize>>, MdpError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MdpError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_clusters(&text)
}

/// Checks the conditions under which aggregated OPI converges: every
/// non-transient state is absorbing, the transient part is acyclic, members
/// of a cluster share a layer, every cluster is reachable from the start
/// distribution, and (when `jstar` is given) members share an optimal value
/// within `tol`.
pub fn validate_clusters(
    mdp: &Mdp,
    clusters: &ClusterMap,
    report: &StructureReport,
    jstar: Option<&[f64]>,
    tol: f64,
) -> Result<(), Vec<ClusterViolation>> {
    let mut violations = Vec::new();
    let multi: Vec<Vec<usize>> = report
        .recurrent_classes
        .iter()
        .filter(|c| c.len() > 1)
        .cloned()
        .collect();
    if !multi.is_empty() {
        violations.push(ClusterViolation::NonAbsorbingRecurrent(multi));
    }
    if !report.assumption3_ok() {
        violations.push(ClusterViolation::TransientCycles(report.transient_cycles.clone()));
    }
    for c in 0..clusters.num_clusters() {
        let members = clusters.members(c);
        let first = clusters.state_layer(members[0]);
        if members.iter().any(|&i| clusters.state_layer(i) != first) {
            violations.push(ClusterViolation::LayerMismatch {
                cluster: c,
                layers: members.iter().map(|&i| (i, clusters.state_layer(i))).collect(),
            });
        }
    }
    if let Some(j) = jstar {
        for c in 0..clusters.num_clusters() {
            let (lo, hi) = clusters
                .members(c)
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.min(j[i]), hi.max(j[i]))
                });
            if hi - lo > tol {
                violations.push(ClusterViolation::UnequalValues {
                    cluster: c,
                    spread: hi - lo,
                });
            }
        }
    }
    let unreachable = &report.unreachable_states;
    for c in 0..clusters.num_clusters() {
        if clusters.members(c).iter().all(|i| unreachable.contains(i)) {
            violations.push(ClusterViolation::UnreachableCluster { cluster: c });
        }
    }
    if violations.is_empty() {
        debug_assert!(layers_strictly_decrease(mdp, clusters));
        Ok(())
    } else {
        Err(violations)
    }
}

/// Every reachability edge between distinct states moves to a strictly lower
/// layer or into an absorbing state.
pub fn layers_strictly_decrease(mdp: &Mdp, clusters: &ClusterMap) -> bool {
    let graph = build_reachability_graph(mdp);
    let ok = graph.edges().all(|(i, j)| {
        i == j
            || clusters.layer(clusters.cluster_of(j)) < clusters.layer(clusters.cluster_of(i))
            || graph.successors(j) == [j]
    });
    ok
}

/// `θ` and the per-cluster update counts `n_t(c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector {
    pub theta: Vec<f64>,
    pub visit_counts: Vec<usize>,
}

impl ThetaVector {
    /// `J(i) = θ(φ(i))`.
    pub fn expand(&self, clusters: &ClusterMap) -> ValueFunction {
        ValueFunction(
            (0..clusters.cluster_of.len())
                .map(|i| self.theta[clusters.cluster_of(i)])
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedRunResult {
    /// Values are the expanded `J(i) = θ(φ(i))`; visit counts are per cluster.
    pub run: RunResult,
    pub theta: ThetaVector,
    /// Mean optimal value over each cluster's members.
    pub cluster_jstar: Vec<f64>,
    /// `max_c |θ(c) − J*(C_c)|`.
    pub max_cluster_error: f64,
}

impl AggregatedRunResult {
    pub const CSV_HEADER: &'static str = "cluster,theta,jstar_cluster,abs_error";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for (c, (theta, jstar)) in self.theta.theta.iter().zip(&self.cluster_jstar).enumerate() {
            let _ = writeln!(out, "{c},{theta:e},{jstar:e},{:e}", (theta - jstar).abs());
        }
        out
    }
}

/// Aggregated OPI from `θ_0 = 0`. Structure is checked first (without the
/// optimal-value condition, which needs an oracle; see
/// [`validate_clusters`]).
pub fn run_opi_aggregated(
    mdp: &Mdp,
    p: &InitialDistribution,
    clusters: &ClusterMap,
    config: &OpiConfig,
    oracle: &Solution,
) -> Result<AggregatedRunResult, AggregationError> {
    let report = crate::mdp::analyze(mdp, p);
    validate_clusters(mdp, clusters, &report, None, 0.0).map_err(AggregationError::Clusters)?;
    let k = clusters.num_clusters();
    let mut learner = Learner::new(mdp, config, Some(clusters.cluster_of.clone()), k);
    let run = learner.run(mdp, p, config, oracle)?;
    debug_assert_eq!(
        run.repeated_parameters, 0,
        "a cluster was met twice in one trajectory"
    );
    let theta = ThetaVector {
        theta: learner.params.clone(),
        visit_counts: learner.counts.clone(),
    };
    let cluster_jstar: Vec<f64> = (0..k)
        .map(|c| {
            let m = clusters.members(c);
            m.iter().map(|&i| oracle.values[i]).sum::<f64>() / m.len() as f64
        })
        .collect();
    let max_cluster_error = theta
        .theta
        .iter()
        .zip(&cluster_jstar)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(AggregatedRunResult {
        run,
        theta,
        cluster_jstar,
        max_cluster_error,
    })
}

/// Probability that `policy` ever reaches each cluster (sum of member
/// reach probabilities; members of a layered cluster are mutually exclusive).
pub fn cluster_reach_probabilities(
    mdp: &Mdp,
    policy: &Policy,
    p: &InitialDistribution,
    report: &StructureReport,
    clusters: &ClusterMap,
) -> Result<Vec<f64>, SolverError> {
    let q = reach_probabilities(mdp, policy, p, report)?;
    Ok((0..clusters.num_clusters())
        .map(|c| q.cluster_sum(clusters.members(c)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{analyze, Action, ProblemClass};
    use crate::opi::run_opi;
    use crate::solvers::policy_iteration;

    /// 3 → {1, 2} (each w.p. ½), 1 and 2 both cost 1 and go to 0.
    fn symmetric() -> (Mdp, InitialDistribution) {
        let mdp = Mdp::new(
            4,
            vec![
                vec![Action::new(0.0, vec![(0, 1.0)])],
                vec![Action::new(1.0, vec![(0, 1.0)])],
                vec![Action::new(1.0, vec![(0, 1.0)])],
                vec![Action::new(2.0, vec![(1, 0.5), (2, 0.5)])],
            ],
            ProblemClass::Discounted { alpha: 0.9 },
        )
        .unwrap();
        (mdp, InitialDistribution::point(4, 3))
    }

    #[test]
    fn layers_are_longest_paths() {
        let (mdp, p) = symmetric();
        let report = analyze(&mdp, &p);
        assert_eq!(state_layers(&mdp, &report), vec![0, 1, 1, 2]);
    }

    #[test]
    fn singletons_and_symmetric_pair_are_valid() {
        let (mdp, p) = symmetric();
        let report = analyze(&mdp, &p);
        let j = policy_iteration(&mdp).unwrap().values;
        let single = ClusterMap::singletons(&mdp, &report);
        assert!(validate_clusters(&mdp, &single, &report, Some(&j), 1e-9).is_ok());
        let pair = ClusterMap::new(&mdp, &report, vec![vec![0], vec![1, 2], vec![3]]).unwrap();
        assert!(validate_clusters(&mdp, &pair, &report, Some(&j), 1e-9).is_ok());
        assert!(layers_strictly_decrease(&mdp, &pair));
    }

    #[test]
    fn mixed_layers_rejected() {
        let (mdp, p) = symmetric();
        let report = analyze(&mdp, &p);
        let bad = ClusterMap::new(&mdp, &report, vec![vec![0], vec![1, 3], vec![2]]).unwrap();
        let err = validate_clusters(&mdp, &bad, &report, None, 0.0).unwrap_err();
        assert!(matches!(err[0], ClusterViolation::LayerMismatch { cluster: 1, .. }));
    }

    #[test]
    fn partition_errors() {
        let (mdp, p) = symmetric();
        let report = analyze(&mdp, &p);
        assert!(ClusterMap::new(&mdp, &report, vec![vec![0, 1], vec![1, 2, 3]]).is_err());
        assert!(ClusterMap::new(&mdp, &report, vec![vec![0, 1], vec![2]]).is_err());
        assert!(ClusterMap::new(&mdp, &report, vec![vec![0, 1, 2, 3, 4]]).is_err());
    }

    #[test]
    fn unequal_values_rejected() {
        let mdp = Mdp::new(
            4,
            vec![
                vec![Action::new(0.0, vec![(0, 1.0)])],
                vec![Action::new(1.0, vec![(0, 1.0)])],
                vec![Action::new(5.0, vec![(0, 1.0)])],
                vec![Action::new(2.0, vec![(1, 0.5), (2, 0.5)])],
            ],
            ProblemClass::Discounted { alpha: 0.9 },
        )
        .unwrap();
        let p = InitialDistribution::point(4, 3);
        let report = analyze(&mdp, &p);
        let j = policy_iteration(&mdp).unwrap().values;
        let pair = ClusterMap::new(&mdp, &report, vec![vec![0], vec![1, 2], vec![3]]).unwrap();
        let err = validate_clusters(&mdp, &pair, &report, Some(&j), 1e-9).unwrap_err();
        assert_eq!(err, vec![ClusterViolation::UnequalValues { cluster: 1, spread: 4.0 }]);
    }

    #[test]
    fn first_step_sets_shared_tail_cost() {
        let (mdp, p) = symmetric();
        let report = analyze(&mdp, &p);
        let oracle = policy_iteration(&mdp).unwrap();
        let pair = ClusterMap::new(&mdp, &report, vec![vec![0], vec![1, 2], vec![3]]).unwrap();
        let config = OpiConfig {
            max_iterations: 1,
            ..OpiConfig::default()
        };
        let r = run_opi_aggregated(&mdp, &p, &pair, &config, &oracle).unwrap();
        assert_eq!(r.theta.theta, vec![0.0, 1.0, 2.9]);
        assert_eq!(r.theta.visit_counts, vec![1, 1, 1]);
        assert_eq!(r.run.values, r.theta.expand(&pair));
        assert!(r.to_csv().starts_with("cluster,theta,jstar_cluster,abs_error\n0,"));
    }

    #[test]
    fn singletons_match_tabular_run() {
        let (mdp, _) = symmetric();
        let p = InitialDistribution::uniform_over(4, &[1, 2, 3]).unwrap();
        let report = analyze(&mdp, &p);
        let oracle = policy_iteration(&mdp).unwrap();
        let config = OpiConfig {
            seed: 3,
            max_iterations: 300,
            history_stride: Some(1),
            ..OpiConfig::default()
        };
        let single = ClusterMap::singletons(&mdp, &report);
        let a = run_opi_aggregated(&mdp, &p, &single, &config, &oracle).unwrap();
        let b = run_opi(&mdp, &p, &config, &oracle).unwrap();
        assert_eq!(a.run, b);
    }

    #[test]
    fn cluster_reach_sums_members() {
        let (mdp, p) = symmetric();
        let report = analyze(&mdp, &p);
        let pair = ClusterMap::new(&mdp, &report, vec![vec![0], vec![1, 2], vec![3]]).unwrap();
        let q = cluster_reach_probabilities(&mdp, &Policy::first_actions(4), &p, &report, &pair)
            .unwrap();
        assert_eq!(q, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn parses_cluster_file() {
        assert_eq!(
            parse_clusters(r#"{"clusters": [[0], [1, 2]]}"#).unwrap(),
            vec![vec![0], vec![1, 2]]
        );
        assert!(parse_clusters("{").is_err());
    }
}
