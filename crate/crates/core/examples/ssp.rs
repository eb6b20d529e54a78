//! OPI on an undiscounted stochastic shortest path problem: trajectories run
//! until they reach the cost-free terminal state.
//!
//! ```text
//! cargo run --example ssp
//! ```

use mcopi::mdp::{analyze, load_mdp};
use mcopi::opi::OpiConfig;
use mcopi::solvers::policy_iteration;
use mcopi::variants::{run_opi_ssp, validate_ssp};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (mdp, p) = load_mdp(concat!(env!("CARGO_MANIFEST_DIR"), "/data/ssp.json"))?;
    validate_ssp(&mdp, &analyze(&mdp, &p)).map_err(|v| format!("{v:?}"))?;
    let oracle = policy_iteration(&mdp)?;
    let config = OpiConfig {
        seed: 5,
        max_iterations: 5_000,
        ..OpiConfig::default()
    };
    let result = run_opi_ssp(&mdp, &p, &config, &oracle)?;
    println!("state  J*        OPI");
    for i in 0..mdp.num_states() {
        println!("{i:>5}  {:<8.4}  {:.4}", oracle.values[i], result.values[i]);
    }
    println!(
        "optimal after {:?} iterations; longest trajectory {} steps",
        result.iterations_to_optimal, result.max_trajectory_len
    );
    Ok(())
}
