//! Undiscounted extensions: stochastic shortest path problems and alternating
//! zero-sum games in negamin form.

mod game;
mod ssp;

pub use game::{
    load_game, negamin_transform, parse_game, run_opi_game, solve_game_exact, GameRunResult,
    GameSpec, GameViolation, NegaminForm, Player,
};
pub use ssp::{run_opi_ssp, validate_ssp, SspViolation};

use thiserror::Error;

use crate::mdp::MdpError;
use crate::opi::OpiError;
use crate::solvers::SolverError;

#[derive(Debug, Error)]
pub enum VariantError {
    #[error("not a valid stochastic shortest path problem: {}", join(.0))]
    Ssp(Vec<SspViolation>),
    #[error("not a valid alternating game: {}", join(.0))]
    Game(Vec<GameViolation>),
    #[error("minimax and negamin backward induction disagree by {difference:e} at state {state}")]
    RouteDisagreement { state: usize, difference: f64 },
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Opi(#[from] OpiError),
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
