//! Exact dynamic programming: policy iteration, value iteration, policy
//! evaluation and the probability of ever visiting each state.
//!
//! ```text
//! cargo run --example exact_solvers
//! ```

use mcopi::mdp::{analyze, load_mdp};
use mcopi::solvers::{
    bellman_residual, evaluate_policy_exact, policy_iteration, reach_probabilities,
    value_iteration, Policy,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (mdp, p) = load_mdp(concat!(env!("CARGO_MANIFEST_DIR"), "/data/choice.json"))?;
    let pi = policy_iteration(&mdp)?;
    let vi = value_iteration(&mdp, 1e-10, 100_000)?;
    println!("policy iteration ({} improvement steps)", pi.improvement_steps);
    println!("{}", pi.to_json());
    println!("value iteration vs policy iteration: {:e}", vi.sup_distance(&pi.values));
    println!("Bellman residual of J*: {:e}", bellman_residual(&mdp, &pi.values));

    let naive = Policy::first_actions(mdp.num_states());
    let j = evaluate_policy_exact(&mdp, &naive)?;
    let q = reach_probabilities(&mdp, &naive, &p, &analyze(&mdp, &p))?;
    println!("always-first-action policy:");
    for i in 0..mdp.num_states() {
        println!("  state {i}: J = {:.6}  P(visit) = {:.3}", j[i], q[i]);
    }
    Ok(())
}
