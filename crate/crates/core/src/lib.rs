//! Multi-agent social dilemma experiments: game engines, agents, model gateways,
//! curricula with lesson generation, trial orchestration and analysis.

pub mod agent;
pub mod analysis;
pub mod curriculum;
pub mod game;
pub mod gateway;
pub mod orchestrator;

pub use game::{ActionRecord, BinaryAction, Contribution, GameKind, GameLog, GameSpec, GameState, Phase, RoundRecord, Tokens};
