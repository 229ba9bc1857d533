use thiserror::Error;

use super::Phase;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("invalid game spec: {0}")]
    InvalidSpec(String),
    #[error("expected {expected} actions, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("contribution {amount} outside [0, {endowment}]")]
    ContributionOutOfRange { amount: u32, endowment: u32 },
    #[error("player {player} cannot punish themselves")]
    SelfPunishment { player: usize },
    #[error("unknown player index {player}")]
    UnknownPlayer { player: usize },
    #[error("invalid action for {expected} phase: {detail}")]
    WrongAction { expected: Phase, detail: String },
    #[error("expected actions for the {expected} phase, got {got}")]
    PhaseMismatch { expected: Phase, got: Phase },
    #[error("game is already over")]
    Terminal,
}
