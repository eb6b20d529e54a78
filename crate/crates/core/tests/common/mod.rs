//! Random instance families and brute-force oracles shared by the
//! integration tests.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;

use mcopi::mdp::{Action, InitialDistribution, Mdp, ProblemClass};
use mcopi::rng::{stream_rng, SimRng};
use mcopi::variants::{GameSpec, Player};

pub fn rng(seed: u64, stream: u64) -> SimRng {
    stream_rng(seed, stream)
}

/// Positive weights drawn from `[lo, hi]`, normalized.
pub fn weights(rng: &mut SimRng, k: usize, lo: f64, hi: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(lo..=hi)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn action(cost: f64, targets: &[usize], probs: &[f64]) -> Action {
    Action::new(cost, targets.iter().copied().zip(probs.iter().copied()).collect())
}

/// Unstructured discounted MDP: each action has its own random support of up
/// to four targets.
pub fn dense_mdp(rng: &mut SimRng, n: usize, max_actions: usize, alpha: f64) -> Mdp {
    let actions = (0..n)
        .map(|_| {
            (0..rng.random_range(1..=max_actions))
                .map(|_| {
                    let k = rng.random_range(1..=n.min(4));
                    let mut all: Vec<usize> = (0..n).collect();
                    all.shuffle(rng);
                    let targets = &all[..k];
                    let probs = weights(rng, k, 0.1, 1.0);
                    action(rng.random_range(0.0..1.0), targets, &probs)
                })
                .collect()
        })
        .collect();
    Mdp::new(n, actions, ProblemClass::Discounted { alpha }).unwrap()
}

/// Relabels states by a random permutation (state `perm[i]` plays old `i`).
fn permute(
    rng: &mut SimRng,
    actions: Vec<Vec<Action>>,
    p: Vec<f64>,
    fixed_zero: bool,
) -> (Vec<Vec<Action>>, Vec<f64>, Vec<usize>) {
    let n = actions.len();
    let mut perm: Vec<usize> = (0..n).collect();
    if fixed_zero {
        perm[1..].shuffle(rng);
    } else {
        perm.shuffle(rng);
    }
    let mut new_actions = vec![Vec::new(); n];
    let mut new_p = vec![0.0; n];
    for (old, acts) in actions.into_iter().enumerate() {
        new_actions[perm[old]] = acts
            .into_iter()
            .map(|a| {
                Action::new(
                    a.cost,
                    a.transitions.into_iter().map(|(j, q)| (perm[j], q)).collect(),
                )
            })
            .collect();
        new_p[perm[old]] = p[old];
    }
    (new_actions, new_p, perm)
}

/// Layered discounted MDP satisfying the structural conditions: a start
/// state on top, 2–4 transient layers of width 2, and two closed classes of
/// 2–4 states each. Every branch probability lies in `[0.4, 0.6]` under every
/// action, so every state is visited with probability at least 0.4 per
/// trajectory whatever the policy. States are randomly relabelled.
pub fn ladder_mdp(rng: &mut SimRng, alpha: f64) -> (Mdp, InitialDistribution) {
    let layers = rng.random_range(2..=4);
    let sizes = [rng.random_range(2..=4), rng.random_range(2..=4)];
    // numbering: classes first, then layers bottom-up, then the top state
    let mut actions: Vec<Vec<Action>> = Vec::new();
    let mut entries = Vec::new();
    for &size in &sizes {
        let base = actions.len();
        let members: Vec<usize> = (base..base + size).collect();
        entries.push(base);
        for _ in 0..size {
            let acts = (0..rng.random_range(1..=3))
                .map(|_| {
                    let probs = weights(rng, size, 1.0, 2.0);
                    action(rng.random_range(0.0..1.0), &members, &probs)
                })
                .collect();
            actions.push(acts);
        }
    }
    let mut below = entries;
    for _ in 0..layers {
        let base = actions.len();
        for _ in 0..2 {
            actions.push(branching_actions(rng, &below));
        }
        below = vec![base, base + 1];
    }
    actions.push(branching_actions(rng, &below));
    let n = actions.len();
    let mut p = vec![0.0; n];
    p[n - 1] = 1.0;
    let (actions, p, _) = permute(rng, actions, p, false);
    (
        Mdp::new(n, actions, ProblemClass::Discounted { alpha }).unwrap(),
        InitialDistribution::new(p).unwrap(),
    )
}

/// 1–3 actions over two targets with probabilities in `[0.4, 0.6]`.
fn branching_actions(rng: &mut SimRng, targets: &[usize]) -> Vec<Action> {
    (0..rng.random_range(1..=3))
        .map(|_| {
            let a = rng.random_range(0.4..=0.6);
            action(rng.random_range(0.0..1.0), targets, &[a, 1.0 - a])
        })
        .collect()
}

/// Layered stochastic shortest path problem: terminal 0, 2–4 layers of width
/// 2 above it, and a start state on top; branch probabilities in
/// `[0.4, 0.6]`.
pub fn ladder_ssp(rng: &mut SimRng) -> (Mdp, InitialDistribution) {
    let layers = rng.random_range(2..=4);
    let mut actions = vec![vec![Action::new(0.0, vec![(0, 1.0)])]];
    let mut below = vec![0usize];
    for _ in 0..layers {
        let base = actions.len();
        for _ in 0..2 {
            if below.len() == 1 {
                let cost = rng.random_range(0.0..1.0);
                let acts = (0..rng.random_range(1..=3))
                    .map(|k| Action::new(cost + k as f64 * 0.1, vec![(0, 1.0)]))
                    .collect();
                actions.push(acts);
            } else {
                actions.push(branching_actions(rng, &below));
            }
        }
        below = vec![base, base + 1];
    }
    actions.push(branching_actions(rng, &below));
    let n = actions.len();
    let mut p = vec![0.0; n];
    p[n - 1] = 1.0;
    let (actions, p, _) = permute(rng, actions, p, true);
    (
        Mdp::new(n, actions, ProblemClass::StochasticShortestPath).unwrap(),
        InitialDistribution::new(p).unwrap(),
    )
}

/// Small discounted DAG: state 0 is a zero-cost sink, every other state's
/// actions share a support of 1–3 lower-numbered states.
pub fn small_dag_mdp(rng: &mut SimRng, n: usize, alpha: f64) -> (Mdp, InitialDistribution) {
    let mut actions = vec![vec![Action::new(0.0, vec![(0, 1.0)])]];
    for i in 1..n {
        let k = rng.random_range(1..=i.min(3));
        let mut lower: Vec<usize> = (0..i).collect();
        lower.shuffle(rng);
        let mut support = lower[..k].to_vec();
        support.sort_unstable();
        actions.push(
            (0..rng.random_range(1..=3))
                .map(|_| {
                    let probs = weights(rng, k, 0.2, 1.0);
                    action(rng.random_range(0.0..1.0), &support, &probs)
                })
                .collect(),
        );
    }
    let starts: Vec<usize> = (1..n).collect();
    (
        Mdp::new(n, actions, ProblemClass::Discounted { alpha }).unwrap(),
        InitialDistribution::uniform_over(n, &starts).unwrap(),
    )
}

/// Dyadic value in `{lo, lo + 1/4, …, hi}`; keeps game arithmetic exact.
fn quarter(rng: &mut SimRng, lo: i32, hi: i32) -> f64 {
    rng.random_range(4 * lo..=4 * hi) as f64 / 4.0
}

/// Alternating game on layers of width 1–2 under a root; players alternate
/// by layer and the bottom layer moves to the terminal. Costs are multiples
/// of 1/4 in `[−1, 1]` and branch probabilities are 3/8, 1/2 or 5/8, so all
/// value computations are exact in binary floating point. Returns the game
/// and a point mass on the root.
pub fn layered_game(rng: &mut SimRng, decision_states: usize) -> (GameSpec, InitialDistribution) {
    assert!(decision_states >= 2);
    // layer widths summing to `decision_states`, root alone on top
    let mut widths = vec![1usize];
    let mut left = decision_states - 1;
    while left > 0 {
        let w = if left >= 2 { rng.random_range(1..=2) } else { 1 };
        widths.push(w);
        left -= w;
    }
    widths.reverse(); // bottom layer first
    let mut actions = vec![vec![Action::new(0.0, vec![(0, 1.0)])]];
    let mut players = vec![Player::Terminal];
    let top_player = if rng.random_bool(0.5) { Player::One } else { Player::Two };
    let depth = widths.len();
    let mut below = vec![0usize];
    for (k, &w) in widths.iter().enumerate() {
        // the root (last layer) gets `top_player`; players alternate downwards
        let player = if (depth - 1 - k) % 2 == 0 {
            top_player
        } else if top_player == Player::One {
            Player::Two
        } else {
            Player::One
        };
        let base = actions.len();
        for _ in 0..w {
            let acts = (0..rng.random_range(1..=3))
                .map(|_| {
                    let cost = quarter(rng, -1, 1);
                    if below.len() == 1 {
                        Action::new(cost, vec![(below[0], 1.0)])
                    } else {
                        let a = [0.375, 0.5, 0.625][rng.random_range(0..3)];
                        action(cost, &below, &[a, 1.0 - a])
                    }
                })
                .collect();
            actions.push(acts);
            players.push(player);
        }
        below = (base..base + w).collect();
    }
    let n = actions.len();
    let mdp = Mdp::new(n, actions, ProblemClass::NegaminGame).unwrap();
    let game = GameSpec::new(mdp, players).unwrap();
    (game, InitialDistribution::point(n, n - 1))
}

/// `min over player-1 strategies of max over player-2 strategies` of the
/// total cost from every state, by enumerating all pure stationary strategy
/// pairs and evaluating each by backward induction in state order (every
/// transition in [`layered_game`] goes to a lower-numbered state).
pub fn brute_force_minimax(game: &GameSpec) -> Vec<f64> {
    let mdp = game.mdp();
    let n = mdp.num_states();
    let owned = |who: Player| -> Vec<usize> { (1..n).filter(|&i| game.player(i) == who).collect() };
    let ones = owned(Player::One);
    let twos = owned(Player::Two);
    let strategies = |states: &[usize]| -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for &s in states {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..mdp.num_actions(s)).map(move |u| {
                        let mut v = prefix.clone();
                        v.push(u);
                        v
                    })
                })
                .collect();
        }
        out
    };
    let s1 = strategies(&ones);
    let s2 = strategies(&twos);
    let mut best = vec![f64::INFINITY; n];
    let mut choice = vec![0usize; n];
    let mut values = vec![0.0; n];
    for mu in &s1 {
        for (&s, &u) in ones.iter().zip(mu) {
            choice[s] = u;
        }
        let mut worst = vec![f64::NEG_INFINITY; n];
        for nu in &s2 {
            for (&s, &u) in twos.iter().zip(nu) {
                choice[s] = u;
            }
            for i in 1..n {
                let a = mdp.action(i, choice[i]);
                values[i] = a.cost + a.transitions.iter().map(|&(j, p)| p * values[j]).sum::<f64>();
            }
            for i in 0..n {
                worst[i] = worst[i].max(values[i]);
            }
        }
        for i in 0..n {
            best[i] = best[i].min(worst[i]);
        }
    }
    best
}

/// Symmetric layered MDP for aggregation. A random quotient DAG (layer 0: a
/// zero-cost absorbing node; layers 1–3: one or two nodes) is expanded by
/// giving every node 2–3 copies. Copies share costs and the quotient-level
/// transition law, but split each quotient probability over the target's
/// copies with their own random weights; all copies of a node therefore have
/// the same optimal value. Returns the MDP, a uniform start over the top
/// layer's copies, and the clusters (copies of one node).
pub fn symmetric_layered(rng: &mut SimRng, alpha: f64) -> (Mdp, InitialDistribution, Vec<Vec<usize>>) {
    let widths = [1usize, rng.random_range(1..=2), rng.random_range(1..=2), rng.random_range(1..=2)];
    // clusters[l][node] = copy state ids
    let mut layers: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut next = 0;
    for &w in &widths {
        let mut nodes = Vec::new();
        for _ in 0..w {
            let m = rng.random_range(2..=3);
            nodes.push((next..next + m).collect::<Vec<_>>());
            next += m;
        }
        layers.push(nodes);
    }
    let n = next;
    let mut actions: Vec<Vec<Action>> = vec![Vec::new(); n];
    for &s in &layers[0][0] {
        actions[s] = vec![Action::new(0.0, vec![(s, 1.0)])];
    }
    for l in 1..layers.len() {
        let below = &layers[l - 1];
        for node in &layers[l] {
            // quotient-level actions: cost and law over the nodes below
            let quotient: Vec<(f64, Vec<f64>)> = (0..rng.random_range(1..=3))
                .map(|_| {
                    let law = if below.len() == 1 {
                        vec![1.0]
                    } else {
                        let a = rng.random_range(0.4..=0.6);
                        vec![a, 1.0 - a]
                    };
                    (rng.random_range(0.0..1.0), law)
                })
                .collect();
            for &s in node {
                actions[s] = quotient
                    .iter()
                    .map(|(cost, law)| {
                        let mut transitions = Vec::new();
                        for (target, &q) in below.iter().zip(law) {
                            let split = weights(rng, target.len(), 1.0, 2.0);
                            transitions.extend(target.iter().zip(split).map(|(&j, w)| (j, q * w)));
                        }
                        let total: f64 = transitions.iter().map(|t| t.1).sum();
                        for t in &mut transitions {
                            t.1 /= total;
                        }
                        Action::new(*cost, transitions)
                    })
                    .collect();
            }
        }
    }
    let top: Vec<usize> = layers.last().unwrap().iter().flatten().copied().collect();
    let clusters = layers.into_iter().flatten().collect();
    (
        Mdp::new(n, actions, ProblemClass::Discounted { alpha }).unwrap(),
        InitialDistribution::uniform_over(n, &top).unwrap(),
        clusters,
    )
}
