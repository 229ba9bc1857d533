//! Deterministic state machines and payoff arithmetic for the five games.
//!
//! Nothing here performs I/O or knows about agents. Player indices are 0-based.

mod action;
mod error;
pub mod payoff;
mod spec;
mod state;
mod tokens;

pub use action::{ActionRecord, BinaryAction, Contribution, Phase, PhaseActions, PunishSpend, PunishmentAllocation};
pub use error::GameError;
pub use payoff::{apply_punishments, resolve_ipd2, resolve_nipd, resolve_pgg, resolve_stag_hunt};
pub use spec::{GameKind, GameSpec, Multiplier, NpdPayoffRule, DEFAULT_ENDOWMENT, DEFAULT_PUNISH_RATIO};
pub use state::{AbortInfo, GameLog, GameState, LogMismatch, RoundRecord};
pub use tokens::Tokens;
