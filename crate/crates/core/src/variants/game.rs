//! Alternating two-player zero-sum games.
//!
//! Player 1 minimizes and player 2 maximizes the total cost; turns alternate
//! and play ends in the terminal state 0. Flipping the sign of costs and
//! values on player 2's states turns every backup into a minimum with
//! successor weight −1 (the negamin form), which the ordinary OPI machinery
//! then handles unchanged.

use std::fmt;
use std::path::Path;

use super::VariantError;
use crate::mdp::{analyze, ClassTag, InitialDistribution, Mdp, MdpDocument, MdpError, ProblemClass};
use crate::opi::{OpiConfig, RunResult};
use crate::solvers::{value_iteration, Solution, ValueFunction};

/// Agreement required between the minimax and negamin backward inductions.
const ROUTE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    /// Minimizer.
    One,
    /// Maximizer.
    Two,
    Terminal,
}

impl Player {
    pub fn sign(self) -> f64 {
        match self {
            Player::Two => -1.0,
            Player::One | Player::Terminal => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GameViolation {
    PlayerCount { expected: usize, found: usize },
    TerminalState(String),
    TerminalCost { action: usize, cost: f64 },
    ConsecutiveTurns { from: usize, to: usize },
    RecurrentClasses(Vec<Vec<usize>>),
    Cycles(Vec<Vec<usize>>),
}

impl fmt::Display for GameViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GameViolation::PlayerCount { expected, found } => {
                write!(f, "expected {expected} player tags, found {found}")
            }
            GameViolation::TerminalState(msg) => write!(f, "terminal state: {msg}"),
            GameViolation::TerminalCost { action, cost } => write!(
                f,
                "terminal state 0 must cost 0 under every action; action {action} costs {cost}"
            ),
            GameViolation::ConsecutiveTurns { from, to } => write!(
                f,
                "edge {from}->{to} joins two states of the same player"
            ),
            GameViolation::RecurrentClasses(c) => {
                write!(f, "state 0 must be the only closed class, found {c:?}")
            }
            GameViolation::Cycles(c) => write!(f, "game graph must be acyclic; cycles {c:?}"),
        }
    }
}

/// A validated alternating game. `mdp` keeps the original costs `c(i,u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    mdp: Mdp,
    players: Vec<Player>,
}

impl GameSpec {
    pub fn new(mdp: Mdp, players: Vec<Player>) -> Result<Self, Vec<GameViolation>> {
        let n = mdp.num_states();
        let mut violations = Vec::new();
        if players.len() != n {
            return Err(vec![GameViolation::PlayerCount {
                expected: n,
                found: players.len(),
            }]);
        }
        if players[0] != Player::Terminal {
            violations.push(GameViolation::TerminalState("state 0 must be the terminal".into()));
        }
        if let Some(i) = (1..n).find(|&i| players[i] == Player::Terminal) {
            violations.push(GameViolation::TerminalState(format!(
                "state {i} is tagged terminal; only state 0 may be"
            )));
        }
        for (u, a) in mdp.actions(0).iter().enumerate() {
            if a.cost != 0.0 {
                violations.push(GameViolation::TerminalCost { action: u, cost: a.cost });
            }
        }
        for i in 1..n {
            for a in mdp.actions(i) {
                for &(j, _) in &a.transitions {
                    if j != 0 && players[j] == players[i] {
                        let v = GameViolation::ConsecutiveTurns { from: i, to: j };
                        if !violations.contains(&v) {
                            violations.push(v);
                        }
                    }
                }
            }
        }
        let report = analyze(&mdp, &InitialDistribution::point(n, 0));
        if report.recurrent_classes != [vec![0]] {
            violations.push(GameViolation::RecurrentClasses(report.recurrent_classes.clone()));
        }
        if !report.assumption3_ok() {
            violations.push(GameViolation::Cycles(report.transient_cycles.clone()));
        }
        if !violations.is_empty() {
            return Err(violations);
        }
        let mdp = mdp
            .with_problem_class(ProblemClass::NegaminGame)
            .map_err(|e| vec![GameViolation::TerminalState(e.to_string())])?;
        Ok(GameSpec { mdp, players })
    }

    pub fn mdp(&self) -> &Mdp {
        &self.mdp
    }

    pub fn players(&self) -> &[Player] {
        &self.players
    }

    pub fn player(&self, state: usize) -> Player {
        self.players[state]
    }

    pub fn num_states(&self) -> usize {
        self.mdp.num_states()
    }
}

/// Negamin form: costs `c′ = σ·c` with `σ = −1` on player 2's states, and
/// successor weight −1.
#[derive(Debug, Clone, PartialEq)]
pub struct NegaminForm {
    pub signs: Vec<f64>,
    pub mdp: Mdp,
}

impl NegaminForm {
    /// `J*(i) = σ(i)·J′(i)`.
    pub fn recover(&self, negamin_values: &[f64]) -> ValueFunction {
        ValueFunction(
            negamin_values
                .iter()
                .zip(&self.signs)
                .map(|(v, s)| s * v)
                .collect(),
        )
    }
}

pub fn negamin_transform(game: &GameSpec) -> NegaminForm {
    let signs: Vec<f64> = game.players.iter().map(|p| p.sign()).collect();
    let mdp = game
        .mdp
        .map_costs(ProblemClass::NegaminGame, |i, _, c| signs[i] * c)
        .expect("sign flips preserve model invariants");
    NegaminForm { signs, mdp }
}

/// Minimax value by backward induction (min on player 1, max on player 2),
/// cross-checked against `σ·J′` from backward induction on the negamin form.
pub fn solve_game_exact(game: &GameSpec) -> Result<ValueFunction, VariantError> {
    let mdp = &game.mdp;
    let n = mdp.num_states();
    let report = analyze(mdp, &InitialDistribution::point(n, 0));
    let mut values = vec![0.0; n];
    for &x in &report.transient_order {
        let backups = (0..mdp.num_actions(x)).map(|u| {
            let a = mdp.action(x, u);
            a.cost + a.transitions.iter().map(|&(j, p)| p * values[j]).sum::<f64>()
        });
        values[x] = match game.players[x] {
            Player::Two => backups.fold(f64::NEG_INFINITY, f64::max),
            _ => backups.fold(f64::INFINITY, f64::min),
        };
    }

    let negamin = negamin_transform(game);
    let negamin_values = value_iteration(&negamin.mdp, 0.0, 1)?;
    let recovered = negamin.recover(&negamin_values);
    for i in 0..n {
        let difference = (recovered[i] - values[i]).abs();
        if !(difference <= ROUTE_TOLERANCE) {
            return Err(VariantError::RouteDisagreement { state: i, difference });
        }
    }
    Ok(ValueFunction(values))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameRunResult {
    /// Run on the negamin form; its values are `J′`.
    pub run: RunResult,
    /// `σ·J′`.
    pub recovered: ValueFunction,
    /// `‖σ·J′ − J*‖∞` against the oracle.
    pub recovered_error: f64,
}

/// OPI on the negamin form. `oracle` must be the exact solution of
/// `negamin_transform(game).mdp` (its values are `J′*`).
pub fn run_opi_game(
    game: &GameSpec,
    p: &InitialDistribution,
    config: &OpiConfig,
    oracle: &Solution,
) -> Result<GameRunResult, VariantError> {
    let negamin = negamin_transform(game);
    let run = crate::opi::run_opi(&negamin.mdp, p, config, oracle)?;
    let recovered = negamin.recover(&run.values);
    let recovered_error = recovered.sup_distance(&negamin.recover(&oracle.values));
    Ok(GameRunResult {
        run,
        recovered,
        recovered_error,
    })
}

/// Parses a game file: the MDP schema with `"problem_class": "game"` and a
/// `"player": 1|2` tag on every state except the terminal state 0.
pub fn parse_game(text: &str) -> Result<(GameSpec, InitialDistribution), VariantError> {
    let doc = MdpDocument::parse(text)?;
    if doc.problem_class != ClassTag::Game {
        return Err(MdpError::Schema {
            field: "problem_class".into(),
            message: "game files must declare \"game\"".into(),
        }
        .into());
    }
    let mut players = Vec::with_capacity(doc.states.len());
    for (k, s) in doc.states.iter().enumerate() {
        let player = match (k, s.player) {
            (0, None | Some(0)) => Player::Terminal,
            (0, Some(other)) => {
                return Err(MdpError::Schema {
                    field: "states[0].player".into(),
                    message: format!("state 0 is the terminal, found player {other}"),
                }
                .into())
            }
            (_, Some(1)) => Player::One,
            (_, Some(2)) => Player::Two,
            (_, other) => {
                return Err(MdpError::Schema {
                    field: format!("states[{k}].player"),
                    message: format!("expected 1 or 2, found {other:?}"),
                }
                .into())
            }
        };
        players.push(player);
    }
    let (mdp, p) = doc.to_model()?;
    let game = GameSpec::new(mdp, players).map_err(VariantError::Game)?;
    Ok((game, p))
}

pub fn load_game(path: impl AsRef<Path>) -> Result<(GameSpec, InitialDistribution), VariantError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MdpError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_game(&text)
}
