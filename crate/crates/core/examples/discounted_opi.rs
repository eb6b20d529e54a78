//! Monte Carlo optimistic policy iteration on a discounted MDP, comparing
//! visit-count and iteration-count step sizes.
//!
//! ```text
//! cargo run --release --example discounted_opi
//! ```

use mcopi::mdp::load_mdp;
use mcopi::opi::{run_opi, OpiConfig, StepSchedule};
use mcopi::solvers::policy_iteration;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (mdp, p) = load_mdp(concat!(env!("CARGO_MANIFEST_DIR"), "/data/choice.json"))?;
    let oracle = policy_iteration(&mdp)?;
    println!("{}", mcopi::opi::RunResult::CSV_HEADER);
    for (trial, schedule) in [StepSchedule::visit_harmonic(), StepSchedule::time_harmonic()]
        .into_iter()
        .enumerate()
    {
        let config = OpiConfig {
            schedule,
            seed: 11,
            max_iterations: 20_000,
            ..OpiConfig::default()
        };
        let result = run_opi(&mdp, &p, &config, &oracle)?;
        println!("{}", result.csv_row(trial, &config));
    }
    Ok(())
}
