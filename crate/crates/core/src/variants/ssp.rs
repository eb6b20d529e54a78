use std::fmt;

use super::VariantError;
use crate::mdp::{InitialDistribution, Mdp, ProblemClass, StructureReport};
use crate::opi::{run_opi, OpiConfig, RunResult};
use crate::solvers::Solution;

#[derive(Debug, Clone, PartialEq)]
pub enum SspViolation {
    WrongProblemClass(ProblemClass),
    /// The recurrent classes are not exactly `{0}`.
    AbsorbingState { recurrent_classes: Vec<Vec<usize>> },
    AbsorbingCost { action: usize, cost: f64 },
    TransientCycles(Vec<Vec<usize>>),
}

impl fmt::Display for SspViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SspViolation::WrongProblemClass(c) => {
                write!(f, "problem class {c:?} is not a stochastic shortest path")
            }
            SspViolation::AbsorbingState { recurrent_classes } => write!(
                f,
                "requires a unique absorbing state 0, found recurrent classes {recurrent_classes:?}"
            ),
            SspViolation::AbsorbingCost { action, cost } => write!(
                f,
                "absorbing state 0 must be free: it incurs a cost of 0 under every action, but action {action} costs {cost}"
            ),
            SspViolation::TransientCycles(c) => {
                write!(f, "subgraph on states other than 0 must be acyclic; cycles {c:?}")
            }
        }
    }
}

/// Checks that state 0 is the unique absorbing state, that it is cost-free
/// under every action, and that the remaining states form a DAG. Together
/// these keep every policy's cost-to-go finite.
pub fn validate_ssp(mdp: &Mdp, report: &StructureReport) -> Result<(), Vec<SspViolation>> {
    let mut violations = Vec::new();
    if mdp.problem_class() != ProblemClass::StochasticShortestPath {
        violations.push(SspViolation::WrongProblemClass(mdp.problem_class()));
    }
    if report.recurrent_classes != [vec![0]] {
        violations.push(SspViolation::AbsorbingState {
            recurrent_classes: report.recurrent_classes.clone(),
        });
    }
    for (u, a) in mdp.actions(0).iter().enumerate() {
        if a.cost != 0.0 {
            violations.push(SspViolation::AbsorbingCost {
                action: u,
                cost: a.cost,
            });
        }
    }
    if !report.assumption3_ok() {
        violations.push(SspViolation::TransientCycles(report.transient_cycles.clone()));
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// OPI with `α = 1`; trajectories run until absorption in state 0.
pub fn run_opi_ssp(
    mdp: &Mdp,
    p: &InitialDistribution,
    config: &OpiConfig,
    oracle: &Solution,
) -> Result<RunResult, VariantError> {
    let report = crate::mdp::analyze(mdp, p);
    validate_ssp(mdp, &report).map_err(VariantError::Ssp)?;
    Ok(run_opi(mdp, p, config, oracle)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{analyze, Action};
    use crate::solvers::{policy_iteration, value_iteration};

    fn ssp_chain(costs: [f64; 3]) -> Mdp {
        Mdp::new(
            3,
            vec![
                vec![Action::new(costs[0], vec![(0, 1.0)])],
                vec![Action::new(costs[1], vec![(0, 1.0)])],
                vec![Action::new(costs[2], vec![(1, 1.0)])],
            ],
            ProblemClass::StochasticShortestPath,
        )
        .unwrap()
    }

    #[test]
    fn chain_is_valid_and_solves_by_backward_induction() {
        let mdp = ssp_chain([0.0, 1.0, 2.0]);
        let p = InitialDistribution::point(3, 2);
        assert!(validate_ssp(&mdp, &analyze(&mdp, &p)).is_ok());
        let j = value_iteration(&mdp, 1e-12, 1).unwrap();
        assert_eq!(j.0, vec![0.0, 1.0, 3.0]);
    }

    #[test]
    fn two_absorbing_states_rejected() {
        let mdp = Mdp::new(
            3,
            vec![
                vec![Action::new(0.0, vec![(0, 1.0)])],
                vec![Action::new(0.0, vec![(1, 1.0)])],
                vec![Action::new(1.0, vec![(0, 0.5), (1, 0.5)])],
            ],
            ProblemClass::StochasticShortestPath,
        )
        .unwrap();
        let err = validate_ssp(&mdp, &analyze(&mdp, &InitialDistribution::point(3, 2))).unwrap_err();
        assert!(err[0].to_string().contains("unique absorbing state"));
    }

    #[test]
    fn costly_absorbing_state_rejected() {
        let mdp = ssp_chain([1.0, 1.0, 2.0]);
        let err = validate_ssp(&mdp, &analyze(&mdp, &InitialDistribution::point(3, 2))).unwrap_err();
        assert_eq!(err.len(), 1);
        assert!(err[0].to_string().contains("incurs a cost of 0"));
    }

    #[test]
    fn zero_cost_run_stays_at_zero() {
        let mdp = ssp_chain([0.0, 0.0, 0.0]);
        let p = InitialDistribution::uniform_over(3, &[1, 2]).unwrap();
        let oracle = policy_iteration(&mdp).unwrap();
        assert_eq!(oracle.values.0, vec![0.0; 3]);
        let config = OpiConfig {
            max_iterations: 200,
            history_stride: Some(1),
            ..OpiConfig::default()
        };
        let result = run_opi_ssp(&mdp, &p, &config, &oracle).unwrap();
        for (_, values) in &result.history {
            assert!(values.iter().all(|&v| v == 0.0));
        }
        assert!(result.max_trajectory_len <= 3);
    }
}
