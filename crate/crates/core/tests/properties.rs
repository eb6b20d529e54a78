//! Property tests against independent oracles: transitive closure for
//! reachability, brute force for games, Monte Carlo for visit probabilities.

mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use mcopi::aggregation::{layers_strictly_decrease, state_layers, validate_clusters, ClusterMap};
use mcopi::experiments::{generate_experiment_mdp, BaseGraph, ExperimentKind, GeneratorSpec};
use mcopi::mdp::{analyze, build_reachability_graph, Action, InitialDistribution, Mdp, ReachabilityGraph};
use mcopi::opi::{
    estimator_diagnostics, opi_iteration, run_opi, simulate_trajectory, OpiConfig, OpiRunState,
    StepFamily, UpdateMode,
};
use mcopi::solvers::{
    evaluate_policy_exact, greedy_policy, policy_iteration, reach_probabilities, value_iteration,
    OptimalActionSets, Policy,
};
use mcopi::variants::{negamin_transform, solve_game_exact};

use common::*;

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Reflexive transitive closure by Floyd–Warshall.
fn closure(successors: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = successors.len();
    let mut r = vec![vec![false; n]; n];
    for (i, s) in successors.iter().enumerate() {
        r[i][i] = true;
        for &j in s {
            r[i][j] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

fn random_successors(seed: u64, n: usize) -> Vec<Vec<usize>> {
    let mut r = rng(seed, 0);
    (0..n)
        .map(|_| {
            let k = r.random_range(0..=n.min(3));
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(&mut r);
            all[..k].to_vec()
        })
        .collect()
}

#[test]
fn reachability_matches_transitive_closure() {
    for seed in 0..1000 {
        let n = 1 + (seed as usize % 25);
        let succ = random_successors(seed, n);
        let graph = ReachabilityGraph::from_successors(succ.clone());
        let reach = closure(&succ);
        let sources: Vec<usize> = (0..n).filter(|i| i % 4 == seed as usize % 4).collect();
        let got = graph.reachable_from(&sources);
        for j in 0..n {
            let want = sources.iter().any(|&s| reach[s][j]);
            assert_eq!(got[j], want, "seed {seed}, state {j}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn structure_partitions_states(seed in any::<u64>(), n in 1usize..20) {
        let mut r = rng(seed, 1);
        let mdp = dense_mdp(&mut r, n, 3, 0.9);
        let p = InitialDistribution::point(n, r.random_range(0..n));
        let report = analyze(&mdp, &p);
        let mut seen = vec![0; n];
        for &i in &report.transient_order {
            seen[i] += 1;
        }
        for c in &report.recurrent_classes {
            for &i in c {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1), "{seen:?}");

        // closed-class oracle: i is recurrent iff everything it reaches reaches back
        let graph = build_reachability_graph(&mdp);
        let succ: Vec<Vec<usize>> = (0..n).map(|i| graph.successors(i).to_vec()).collect();
        let reach = closure(&succ);
        for i in 0..n {
            let recurrent = (0..n).all(|j| !reach[i][j] || reach[j][i]);
            prop_assert_eq!(report.recurrent_class_of(i).is_some(), recurrent);
        }
        let reachable = graph.reachable_from(&p.support());
        for i in 0..n {
            prop_assert_eq!(report.unreachable_states.contains(&i), !reachable[i]);
        }
    }

    #[test]
    fn optimal_values_ignore_action_order(seed in any::<u64>(), n in 1usize..15) {
        let mut r = rng(seed, 2);
        let mdp = dense_mdp(&mut r, n, 4, 0.9);
        let shuffled: Vec<Vec<Action>> = (0..n)
            .map(|i| {
                let mut a = mdp.actions(i).to_vec();
                a.shuffle(&mut r);
                a
            })
            .collect();
        let other = Mdp::new(n, shuffled, mdp.problem_class()).unwrap();
        let a = policy_iteration(&mdp).unwrap();
        let b = policy_iteration(&other).unwrap();
        prop_assert!(sup(&a.values, &b.values) < 1e-10);
    }

    #[test]
    fn greedy_policy_of_optimum_is_optimal(seed in any::<u64>(), n in 1usize..15) {
        let mut r = rng(seed, 3);
        let alpha = r.random_range(0.1..0.99);
        let mdp = dense_mdp(&mut r, n, 4, alpha);
        let pi = policy_iteration(&mdp).unwrap();
        let vi = value_iteration(&mdp, 1e-9, 10_000_000).unwrap();
        prop_assert!(sup(&pi.values, &vi) < 1e-8);
        let greedy = greedy_policy(&mdp, &pi.values);
        let j = evaluate_policy_exact(&mdp, &greedy).unwrap();
        prop_assert!(sup(&j, &pi.values) < 1e-9);
        prop_assert!(OptimalActionSets::from_values(&mdp, &pi.values, 1e-9).violations(&greedy).is_empty());
    }

    #[test]
    fn constant_cost_shift_preserves_optimal_actions(seed in any::<u64>(), n in 1usize..15, shift in 0.0f64..5.0) {
        let mut r = rng(seed, 4);
        let mdp = dense_mdp(&mut r, n, 4, 0.8);
        let shifted = mdp.map_costs(mdp.problem_class(), |_, _, c| c + shift).unwrap();
        let a = policy_iteration(&mdp).unwrap();
        let b = policy_iteration(&shifted).unwrap();
        let offset = shift / (1.0 - 0.8);
        for i in 0..n {
            prop_assert!((b.values[i] - a.values[i] - offset).abs() < 1e-9);
        }
        prop_assert_eq!(
            OptimalActionSets::from_values(&mdp, &a.values, 1e-9),
            OptimalActionSets::from_values(&shifted, &b.values, 1e-9)
        );
    }

    #[test]
    fn runs_are_deterministic_per_seed(seed in any::<u64>()) {
        let mut r = rng(seed, 5);
        let (mdp, p) = small_dag_mdp(&mut r, 8, 0.9);
        let oracle = policy_iteration(&mdp).unwrap();
        let config = OpiConfig { seed, max_iterations: 200, history_stride: Some(7), ..OpiConfig::default() };
        let a = run_opi(&mdp, &p, &config, &oracle).unwrap();
        let b = run_opi(&mdp, &p, &config, &oracle).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn modes_agree_on_the_first_iteration(seed in any::<u64>()) {
        let mut r = rng(seed, 6);
        let (mdp, p) = small_dag_mdp(&mut r, 8, 0.9);
        let run = |mode| {
            let config = OpiConfig { update_mode: mode, seed, ..OpiConfig::default() };
            let mut state = OpiRunState::new(&mdp, &config);
            opi_iteration(&mut state, &mdp, &p, &config).unwrap();
            (state.values().clone(), state.visit_counts().to_vec())
        };
        let (jt, nt) = run(UpdateMode::TrajectoryUpdate);
        let (jf, nf) = run(UpdateMode::FirstStateOnly);
        let updated: Vec<usize> = (0..8).filter(|&i| nf[i] > 0).collect();
        prop_assert_eq!(updated.len(), 1);
        let start = updated[0];
        prop_assert!(nt[start] == 1);
        prop_assert_eq!(jt[start], jf[start]);
        for i in 0..8 {
            if i != start {
                prop_assert_eq!(jf[i], 0.0);
            }
        }
    }

    #[test]
    fn unvisited_states_keep_their_values_and_values_stay_bounded(seed in any::<u64>()) {
        let mut r = rng(seed, 7);
        let (mdp, p) = ladder_mdp(&mut r, 0.9);
        let n = mdp.num_states();
        let bound = mdp.max_abs_cost() / (1.0 - 0.9) + 1e-9;
        for mode in [UpdateMode::TrajectoryUpdate, UpdateMode::FirstStateOnly] {
            let config = OpiConfig { update_mode: mode, seed, ..OpiConfig::default() };
            let mut state = OpiRunState::new(&mdp, &config);
            for _ in 0..300 {
                let before = state.values().clone();
                let counts = state.visit_counts().to_vec();
                opi_iteration(&mut state, &mdp, &p, &config).unwrap();
                for i in 0..n {
                    if state.visit_counts()[i] == counts[i] {
                        prop_assert_eq!(state.values()[i], before[i]);
                    }
                    prop_assert!(state.values()[i].abs() <= bound);
                }
            }
        }
    }

    #[test]
    fn negamin_form_reproduces_game_values(seed in any::<u64>(), d in 2usize..10) {
        let mut r = rng(seed, 8);
        let (game, _) = layered_game(&mut r, d);
        let exact = solve_game_exact(&game).unwrap();
        let form = negamin_transform(&game);
        let pi = policy_iteration(&form.mdp).unwrap();
        prop_assert!(sup(&form.recover(&pi.values), &exact) < 1e-12);
        prop_assert_eq!(&exact.0, &brute_force_minimax(&game));
    }

    #[test]
    fn aggregation_layers_decrease_along_edges(seed in any::<u64>()) {
        let mut r = rng(seed, 9);
        let (mdp, p, clusters) = symmetric_layered(&mut r, 0.9);
        let report = analyze(&mdp, &p);
        prop_assert!(report.all_ok());
        let layers = state_layers(&mdp, &report);
        let graph = build_reachability_graph(&mdp);
        for (i, j) in graph.edges() {
            if i != j {
                prop_assert!(layers[i] > layers[j]);
            }
        }
        let map = ClusterMap::new(&mdp, &report, clusters).unwrap();
        prop_assert!(layers_strictly_decrease(&mdp, &map));
        let jstar = policy_iteration(&mdp).unwrap();
        prop_assert!(validate_clusters(&mdp, &map, &report, Some(&jstar.values), 1e-9).is_ok());
    }

    #[test]
    fn step_sizes_are_nonincreasing(scale in 0.01f64..1.0, exponent in 0.51f64..1.0, k in 1usize..100_000) {
        for family in [StepFamily::harmonic(scale).unwrap(), StepFamily::power_law(scale, exponent).unwrap()] {
            prop_assert!(family.beta(k + 1) <= family.beta(k));
            prop_assert!(family.beta(k) > 0.0 && family.beta(k) <= 1.0);
        }
    }
}

#[test]
fn generated_experiment_mdps_are_well_formed() {
    for seed in 0..100u64 {
        let graph = BaseGraph::random(5 + seed as usize % 26, 1 + seed as usize % 4, seed);
        graph.validate().unwrap();
        for kind in [ExperimentKind::Experiment1, ExperimentKind::Experiment2] {
            let g = generate_experiment_mdp(&GeneratorSpec::new(kind, graph.clone())).unwrap();
            let report = analyze(&g.mdp, &g.initial);
            assert!(report.all_ok(), "seed {seed} {}: {}", kind.label(), report.summary());
            assert!(g.cost_shift >= 0.0);
        }
    }
}

/// Exact visit probabilities against Monte Carlo frequencies: 50 DAG
/// instances, pairs within 3 standard errors at the nominal rate.
#[test]
fn reach_probabilities_match_monte_carlo() {
    let samples = 20_000;
    let (mut pairs, mut within) = (0, 0);
    for k in 0..50 {
        let mut r = rng(77, k);
        let n = r.random_range(3..=10);
        let (mdp, p) = small_dag_mdp(&mut r, n, 0.9);
        let policy = Policy((0..n).map(|i| r.random_range(0..mdp.num_actions(i))).collect());
        let q = reach_probabilities(&mdp, &policy, &p, &analyze(&mdp, &p)).unwrap();
        let mut hits = vec![0usize; n];
        let mut sim = rng(78, k);
        for _ in 0..samples {
            let start = p.sample(&mut sim);
            let t = simulate_trajectory(&mdp, &policy, start, &mut sim, 1e-6).unwrap();
            let mut seen = vec![false; n];
            for s in t.states() {
                if !seen[s] {
                    seen[s] = true;
                    hits[s] += 1;
                }
            }
        }
        for i in 0..n {
            pairs += 1;
            let freq = hits[i] as f64 / samples as f64;
            let se = (q[i] * (1.0 - q[i]) / samples as f64).sqrt();
            if (freq - q[i]).abs() <= 3.0 * se + 1e-12 {
                within += 1;
            }
        }
    }
    assert!(within as f64 >= 0.99 * pairs as f64, "{within}/{pairs}");
}

/// z-scores of the first-visit estimator over many independent replicates
/// are standard normal: no bias, and calibrated standard errors.
#[test]
fn estimator_z_scores_are_standard_normal() {
    let (mut count, mut sum, mut sum_sq, mut beyond) = (0usize, 0.0, 0.0, 0usize);
    for k in 0..10 {
        let mut r = rng(91, k);
        let (mdp, p) = small_dag_mdp(&mut r, 8, 0.9);
        let policy = Policy((0..8).map(|i| r.random_range(0..mdp.num_actions(i))).collect());
        for rep in 0..30 {
            let mut sim = rng(92 + rep, k);
            let d = estimator_diagnostics(&mdp, &policy, &p, 50_000, &mut sim, 1e-6).unwrap();
            for row in &d.rows {
                if let (Some(m), Some(se)) = (row.mean_estimate, row.stderr) {
                    if se > 1e-12 {
                        let z = (m - row.j_exact) / se;
                        count += 1;
                        sum += z;
                        sum_sq += z * z;
                        if z.abs() > 3.0 {
                            beyond += 1;
                        }
                    }
                }
            }
        }
    }
    let mean = sum / count as f64;
    let var = sum_sq / count as f64 - mean * mean;
    // for ~1500 standard-normal draws: mean s.e. ≈ 0.026, variance s.e. ≈ 0.037
    assert!(mean.abs() < 0.1, "mean z {mean}");
    assert!((var - 1.0).abs() < 0.15, "var z {var}");
    assert!((beyond as f64) < 0.01 * count as f64, "{beyond}/{count} beyond 3σ");
}
