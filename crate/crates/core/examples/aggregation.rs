//! OPI with one value per cluster of states that share an optimal value,
//! next to the tabular run on the same seed.
//!
//! ```text
//! cargo run --example aggregation
//! ```

use mcopi::aggregation::{load_clusters, run_opi_aggregated, validate_clusters, ClusterMap};
use mcopi::mdp::{analyze, load_mdp};
use mcopi::opi::{run_opi, OpiConfig};
use mcopi::solvers::policy_iteration;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = env!("CARGO_MANIFEST_DIR");
    let (mdp, p) = load_mdp(format!("{dir}/data/symmetric.json"))?;
    let report = analyze(&mdp, &p);
    let clusters = ClusterMap::new(
        &mdp,
        &report,
        load_clusters(format!("{dir}/data/symmetric_clusters.json"))?,
    )
    .map_err(|v| v.to_string())?;
    let oracle = policy_iteration(&mdp)?;
    validate_clusters(&mdp, &clusters, &report, Some(&oracle.values), 1e-9)
        .map_err(|v| format!("{v:?}"))?;

    let config = OpiConfig {
        seed: 9,
        max_iterations: 2_000,
        ..OpiConfig::default()
    };
    let aggregated = run_opi_aggregated(&mdp, &p, &clusters, &config, &oracle)?;
    print!("{}", aggregated.to_csv());
    let tabular = run_opi(&mdp, &p, &config, &oracle)?;
    println!(
        "sup error: aggregated {:e}, tabular {:e}",
        aggregated.run.sup_error.unwrap_or(f64::NAN),
        tabular.sup_error.unwrap_or(f64::NAN)
    );
    Ok(())
}
