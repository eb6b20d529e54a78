//! Load an MDP file and check its structure: reachability from the start
//! distribution, common transition supports, and an acyclic transient part.
//!
//! ```text
//! cargo run --example validate_structure -- [path/to/mdp.json]
//! ```

use mcopi::mdp::{analyze, build_reachability_graph, load_mdp};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/choice.json").into());
    let (mdp, p) = load_mdp(&path)?;
    let graph = build_reachability_graph(&mdp);
    println!("{path}: {} states", mdp.num_states());
    for (i, j) in graph.edges() {
        println!("  edge {i} -> {j}");
    }
    let report = analyze(&mdp, &p);
    print!("{}", report.summary());
    println!("absorbing states: {:?}", report.absorbing_states());
    Ok(())
}
