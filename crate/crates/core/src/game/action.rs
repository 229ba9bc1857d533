use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{GameError, GameKind, GameSpec};

/// One decision point within a round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Communicate,
    Act,
    Contribute,
    Punish,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Communicate => "communicate",
            Phase::Act => "act",
            Phase::Contribute => "contribute",
            Phase::Punish => "punish",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryAction {
    Cooperate,
    Defect,
    HuntStag,
    HuntHare,
}

impl BinaryAction {
    /// `Cooperate` and `HuntStag` are the cooperative moves.
    pub fn is_cooperative(self) -> bool {
        matches!(self, BinaryAction::Cooperate | BinaryAction::HuntStag)
    }

    /// The cooperative or non-cooperative move for a game kind.
    pub fn for_game(kind: GameKind, cooperate: bool) -> Self {
        match (kind.is_stag_hunt(), cooperate) {
            (true, true) => BinaryAction::HuntStag,
            (true, false) => BinaryAction::HuntHare,
            (false, true) => BinaryAction::Cooperate,
            (false, false) => BinaryAction::Defect,
        }
    }

    pub fn fits(self, kind: GameKind) -> bool {
        kind.is_binary() && kind.is_stag_hunt() == matches!(self, BinaryAction::HuntStag | BinaryAction::HuntHare)
    }

    /// The label shown to agents, matching the wording of the prompts.
    pub fn label(self) -> &'static str {
        match self {
            BinaryAction::Cooperate => "Cooperate",
            BinaryAction::Defect => "Defect",
            BinaryAction::HuntStag => "Hunt Stag",
            BinaryAction::HuntHare => "Hunt Hare",
        }
    }
}

impl fmt::Display for BinaryAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Contribution(pub u32);

/// Tokens one player spends on punishing a single target (0-based player index).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PunishSpend {
    pub target: usize,
    pub spend: u32,
}

/// A player's punishment orders for one round. Repeated targets are summed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PunishmentAllocation {
    pub spends: Vec<PunishSpend>,
}

impl PunishmentAllocation {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, u32)>) -> Self {
        PunishmentAllocation {
            spends: pairs
                .into_iter()
                .map(|(target, spend)| PunishSpend { target, spend })
                .collect(),
        }
    }

    pub fn total(&self) -> u64 {
        self.spends.iter().map(|s| u64::from(s.spend)).sum()
    }

    /// Spend per target with duplicates merged.
    pub fn by_target(&self) -> BTreeMap<usize, u64> {
        let mut merged = BTreeMap::new();
        for s in &self.spends {
            *merged.entry(s.target).or_insert(0) += u64::from(s.spend);
        }
        merged
    }

    pub fn validate(&self, spender: usize, n_players: usize) -> Result<(), GameError> {
        for s in &self.spends {
            if s.target >= n_players {
                return Err(GameError::UnknownPlayer { player: s.target });
            }
            if s.target == spender {
                return Err(GameError::SelfPunishment { player: spender });
            }
        }
        Ok(())
    }

    /// Trims spends in listed order so the total fits within `budget`.
    /// Returns the clamped allocation and the number of tokens removed.
    pub fn clamp_to_budget(&self, budget: u32) -> (PunishmentAllocation, u64) {
        let mut remaining = u64::from(budget);
        let mut removed = 0;
        let mut spends = Vec::with_capacity(self.spends.len());
        for s in &self.spends {
            let want = u64::from(s.spend);
            let keep = want.min(remaining);
            remaining -= keep;
            removed += want - keep;
            if keep > 0 {
                spends.push(PunishSpend {
                    target: s.target,
                    spend: keep as u32,
                });
            }
        }
        (PunishmentAllocation { spends }, removed)
    }
}

/// One player's validated action for one phase.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionRecord {
    Choice(BinaryAction),
    Contribute(Contribution),
    Punish(PunishmentAllocation),
    Communicate(String),
}

impl ActionRecord {
    pub fn phase(&self) -> Phase {
        match self {
            ActionRecord::Choice(_) => Phase::Act,
            ActionRecord::Contribute(_) => Phase::Contribute,
            ActionRecord::Punish(_) => Phase::Punish,
            ActionRecord::Communicate(_) => Phase::Communicate,
        }
    }

    /// Checks the action against the game's bounds for `player`.
    pub fn validate_for(&self, player: usize, spec: &GameSpec) -> Result<(), GameError> {
        match self {
            ActionRecord::Choice(choice) if !choice.fits(spec.kind) => Err(GameError::WrongAction {
                expected: Phase::Act,
                detail: format!("{choice} is not a move in {}", spec.kind),
            }),
            ActionRecord::Contribute(Contribution(amount)) if *amount > spec.endowment => {
                Err(GameError::ContributionOutOfRange {
                    amount: *amount,
                    endowment: spec.endowment,
                })
            }
            ActionRecord::Punish(alloc) => alloc.validate(player, spec.n_players),
            ActionRecord::Communicate(word) if word.is_empty() || word.chars().any(char::is_whitespace) => {
                Err(GameError::WrongAction {
                    expected: Phase::Communicate,
                    detail: format!("broadcast {word:?} is not a single word"),
                })
            }
            _ => Ok(()),
        }
    }
}

/// The actions of every player for one phase, indexed by player.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseActions {
    pub phase: Phase,
    pub actions: Vec<ActionRecord>,
}
