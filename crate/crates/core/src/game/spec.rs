use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::error::GameError;
use super::Phase;

/// The five social dilemmas, plus the cheap-talk Stag Hunt variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    StagHunt,
    StagHuntComm,
    Ipd2,
    Nipd,
    Pgg,
    IpggPunish,
}

impl GameKind {
    pub fn default_players(self) -> usize {
        match self {
            GameKind::Ipd2 => 2,
            _ => 4,
        }
    }

    /// Phases of one round, in play order.
    pub fn phases(self) -> &'static [Phase] {
        match self {
            GameKind::StagHunt | GameKind::Ipd2 | GameKind::Nipd => &[Phase::Act],
            GameKind::StagHuntComm => &[Phase::Communicate, Phase::Act],
            GameKind::Pgg => &[Phase::Contribute],
            GameKind::IpggPunish => &[Phase::Contribute, Phase::Punish],
        }
    }

    pub fn is_binary(self) -> bool {
        !self.is_contribution()
    }

    pub fn is_contribution(self) -> bool {
        matches!(self, GameKind::Pgg | GameKind::IpggPunish)
    }

    pub fn is_stag_hunt(self) -> bool {
        matches!(self, GameKind::StagHunt | GameKind::StagHuntComm)
    }

    /// Name used when a game is described to the lesson generator.
    pub fn display_name(self) -> &'static str {
        match self {
            GameKind::StagHunt => "StagHunt",
            GameKind::StagHuntComm => "StagHuntWithCommunication",
            GameKind::Ipd2 => "TwoPlayerIteratedPrisonersDilemma",
            GameKind::Nipd => "NPlayerIteratedPrisonersDilemma",
            GameKind::Pgg => "PublicGoodsGame",
            GameKind::IpggPunish => "PublicGoodsGameWithPunishment",
        }
    }
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// How the N-player prisoner's dilemma scores a defector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NpdPayoffRule {
    /// Sum of pairwise outcomes: a defector earns 5 per cooperating opponent and 1 per defecting one.
    #[default]
    PairwiseSum,
    /// A defector earns 5 per cooperating opponent plus a flat 1.
    BasePlusOne,
}

/// Pot multiplier in tenths (1.6 is stored as 16).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Multiplier(u32);

impl Multiplier {
    pub const fn from_tenths(tenths: u32) -> Self {
        Multiplier(tenths)
    }

    pub const fn tenths(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 10.0
    }
}

impl Default for Multiplier {
    fn default() -> Self {
        Multiplier(16)
    }
}

impl Serialize for Multiplier {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Multiplier {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = f64::deserialize(deserializer)?;
        let tenths = (value * 10.0).round();
        if value <= 0.0 || (tenths / 10.0 - value).abs() > 1e-9 || tenths > f64::from(u32::MAX) {
            return Err(serde::de::Error::custom(format!(
                "multiplier {value} must be a positive multiple of 0.1"
            )));
        }
        Ok(Multiplier(tenths as u32))
    }
}

pub const DEFAULT_ENDOWMENT: u32 = 20;
pub const DEFAULT_PUNISH_RATIO: u32 = 3;

fn default_endowment() -> u32 {
    DEFAULT_ENDOWMENT
}

fn default_punish_ratio() -> u32 {
    DEFAULT_PUNISH_RATIO
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub kind: GameKind,
    pub n_players: usize,
    pub rounds: u32,
    #[serde(default = "default_endowment")]
    pub endowment: u32,
    #[serde(default)]
    pub multiplier: Multiplier,
    /// Tokens removed from the target per token spent on punishment.
    #[serde(default = "default_punish_ratio")]
    pub punish_ratio: u32,
    #[serde(default)]
    pub npd_rule: NpdPayoffRule,
}

impl GameSpec {
    /// A spec with the default player count and payoff parameters for `kind`.
    pub fn new(kind: GameKind, rounds: u32) -> Self {
        GameSpec {
            kind,
            n_players: kind.default_players(),
            rounds,
            endowment: DEFAULT_ENDOWMENT,
            multiplier: Multiplier::default(),
            punish_ratio: DEFAULT_PUNISH_RATIO,
            npd_rule: NpdPayoffRule::default(),
        }
    }

    pub fn with_npd_rule(mut self, rule: NpdPayoffRule) -> Self {
        self.npd_rule = rule;
        self
    }

    pub fn validate(&self) -> Result<(), GameError> {
        let expected = self.kind.default_players();
        if self.n_players != expected {
            return Err(GameError::InvalidSpec(format!(
                "{} requires {expected} players, got {}",
                self.kind, self.n_players
            )));
        }
        if self.rounds == 0 {
            return Err(GameError::InvalidSpec("rounds must be at least 1".into()));
        }
        if self.kind.is_contribution() {
            if self.endowment == 0 {
                return Err(GameError::InvalidSpec("endowment must be positive".into()));
            }
            let m = self.multiplier.tenths() as usize;
            if m == 0 {
                return Err(GameError::InvalidSpec("multiplier must be positive".into()));
            }
            // multiplier / n < 1, otherwise contributing is individually rational
            if m >= 10 * self.n_players {
                return Err(GameError::InvalidSpec(format!(
                    "multiplier {} over {} players is not a social dilemma",
                    self.multiplier.as_f64(),
                    self.n_players
                )));
            }
            if !m.is_multiple_of(self.n_players) {
                return Err(GameError::InvalidSpec(format!(
                    "multiplier {} does not split into whole tenths across {} players",
                    self.multiplier.as_f64(),
                    self.n_players
                )));
            }
            if self.kind == GameKind::IpggPunish && self.punish_ratio == 0 {
                return Err(GameError::InvalidSpec("punish_ratio must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_target_task() {
        let spec = GameSpec::new(GameKind::IpggPunish, 10);
        assert_eq!(spec.n_players, 4);
        assert_eq!(spec.endowment, 20);
        assert_eq!(spec.multiplier.tenths(), 16);
        assert_eq!(spec.punish_ratio, 3);
        spec.validate().unwrap();
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = GameSpec::new(GameKind::Ipd2, 3);
        spec.n_players = 4;
        assert!(spec.validate().is_err());

        assert!(GameSpec::new(GameKind::Pgg, 0).validate().is_err());

        let mut spec = GameSpec::new(GameKind::Pgg, 3);
        spec.multiplier = Multiplier::from_tenths(40);
        assert!(spec.validate().is_err());
        spec.multiplier = Multiplier::from_tenths(15);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_json_uses_decimal_multiplier() {
        let spec = GameSpec::new(GameKind::Pgg, 3);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"multiplier\":1.6"), "{text}");
        let back: GameSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}
