//! An alternating zero-sum game: exact minimax values, the negamin
//! reformulation, and OPI on that reformulation.
//!
//! ```text
//! cargo run --release --example alternating_game
//! ```

use mcopi::opi::OpiConfig;
use mcopi::solvers::policy_iteration;
use mcopi::variants::{load_game, negamin_transform, run_opi_game, solve_game_exact};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (game, p) = load_game(concat!(env!("CARGO_MANIFEST_DIR"), "/data/game.json"))?;
    let jstar = solve_game_exact(&game)?;
    let negamin = negamin_transform(&game);
    let oracle = policy_iteration(&negamin.mdp)?;
    let config = OpiConfig {
        seed: 2,
        max_iterations: 20_000,
        ..OpiConfig::default()
    };
    let run = run_opi_game(&game, &p, &config, &oracle)?;
    println!("state  player  J'        J*        OPI J*");
    for i in 0..game.num_states() {
        println!(
            "{i:>5}  {:<6?}  {:<8.4}  {:<8.4}  {:.4}",
            game.player(i),
            oracle.values[i],
            jstar[i],
            run.recovered[i]
        );
    }
    println!("sup error {:e}", run.recovered_error);
    Ok(())
}
