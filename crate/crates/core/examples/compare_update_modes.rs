//! Trajectory-wide versus start-state-only updates on the default
//! experiment graphs: iterations until the greedy policy is optimal.
//!
//! ```text
//! cargo run --release --example compare_update_modes -- [trials] [seed]
//! ```

use mcopi::experiments::{
    default_experiment1_graph, default_experiment2_graph, generate_experiment_mdp,
    run_comparison, ExperimentKind, GeneratorSpec, DEFAULT_ITERATION_CAP,
};
use mcopi::opi::OpiConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let trials: usize = args.next().map_or(Ok(100), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(1), |s| s.parse())?;
    let config = OpiConfig {
        seed,
        max_iterations: DEFAULT_ITERATION_CAP,
        ..OpiConfig::default()
    };
    for (kind, graph) in [
        (ExperimentKind::Experiment1, default_experiment1_graph()),
        (ExperimentKind::Experiment2, default_experiment2_graph()),
    ] {
        let generated = generate_experiment_mdp(&GeneratorSpec::new(kind, graph))?;
        let result = run_comparison(&generated.mdp, &generated.initial, trials, &config)?;
        println!("{} ({} trials, seed {seed})", kind.label(), trials);
        print!("{}", result.summary_text());
    }
    Ok(())
}
