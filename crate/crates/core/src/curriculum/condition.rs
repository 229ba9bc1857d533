use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CurriculumError;
use crate::game::{GameKind, GameSpec, NpdPayoffRule};

pub const TARGET_ROUNDS: u32 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionName {
    FullCurriculum,
    Scrambled,
    DirectPrecursor,
    Control,
}

impl ConditionName {
    pub const ALL: [ConditionName; 4] = [
        ConditionName::FullCurriculum,
        ConditionName::Scrambled,
        ConditionName::DirectPrecursor,
        ConditionName::Control,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ConditionName::FullCurriculum => "full-curriculum",
            ConditionName::Scrambled => "scrambled",
            ConditionName::DirectPrecursor => "direct-precursor",
            ConditionName::Control => "control",
        }
    }
}

impl fmt::Display for ConditionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ConditionName {
    type Err = CurriculumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConditionName::ALL
            .into_iter()
            .find(|c| c.label() == s || format!("{c:?}").eq_ignore_ascii_case(s))
            .ok_or_else(|| CurriculumError::UnknownCondition(s.to_string()))
    }
}

/// Round counts of the precursor games.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageRounds {
    pub ipd2: u32,
    pub nipd: u32,
    pub pgg: u32,
    pub npd_rule: NpdPayoffRule,
}

impl Default for StageRounds {
    fn default() -> Self {
        StageRounds {
            ipd2: 3,
            nipd: 3,
            pgg: 3,
            npd_rule: NpdPayoffRule::default(),
        }
    }
}

/// One game of a curriculum. `stage_index` counts from 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub stage_index: usize,
    pub game: GameSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurriculumCondition {
    pub name: ConditionName,
    pub stages: Vec<StageSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scramble_seed: Option<u64>,
}

impl CurriculumCondition {
    pub fn target(&self) -> &StageSpec {
        self.stages.last().expect("conditions have a target stage")
    }

    pub fn kinds(&self) -> Vec<GameKind> {
        self.stages.iter().map(|s| s.game.kind).collect()
    }
}

pub fn build_condition(name: ConditionName, scramble_seed: Option<u64>) -> Result<CurriculumCondition, CurriculumError> {
    build_condition_with(name, scramble_seed, StageRounds::default())
}

/// `scramble_seed` must be given for `Scrambled` and only for it.
pub fn build_condition_with(
    name: ConditionName,
    scramble_seed: Option<u64>,
    rounds: StageRounds,
) -> Result<CurriculumCondition, CurriculumError> {
    let precursor = |kind: GameKind| match kind {
        GameKind::Ipd2 => GameSpec::new(kind, rounds.ipd2),
        GameKind::Nipd => GameSpec::new(kind, rounds.nipd).with_npd_rule(rounds.npd_rule),
        _ => GameSpec::new(kind, rounds.pgg),
    };
    let mut games: Vec<GameSpec> = match (name, scramble_seed) {
        (ConditionName::Scrambled, None) => return Err(CurriculumError::MissingSeed),
        (ConditionName::Scrambled, Some(seed)) => scrambled_order(seed).into_iter().map(precursor).collect(),
        (_, Some(_)) => return Err(CurriculumError::UnexpectedSeed(name)),
        (ConditionName::FullCurriculum, None) => {
            [GameKind::Ipd2, GameKind::Nipd, GameKind::Pgg].into_iter().map(precursor).collect()
        }
        (ConditionName::DirectPrecursor, None) => vec![precursor(GameKind::Pgg)],
        (ConditionName::Control, None) => Vec::new(),
    };
    games.push(GameSpec::new(GameKind::IpggPunish, TARGET_ROUNDS));
    for g in &games {
        g.validate().map_err(|e| CurriculumError::InvalidStage(e.to_string()))?;
    }
    Ok(CurriculumCondition {
        name,
        stages: games
            .into_iter()
            .enumerate()
            .map(|(i, game)| StageSpec { stage_index: i + 1, game })
            .collect(),
        scramble_seed,
    })
}

/// The three precursor games in a seed-determined uniform order.
pub fn scrambled_order(seed: u64) -> [GameKind; 3] {
    let mut kinds = [GameKind::Ipd2, GameKind::Nipd, GameKind::Pgg];
    kinds.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    kinds
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn stage_lists() {
        let full = build_condition(ConditionName::FullCurriculum, None).unwrap();
        assert_eq!(
            full.kinds(),
            [GameKind::Ipd2, GameKind::Nipd, GameKind::Pgg, GameKind::IpggPunish]
        );
        assert!(full.stages[..3].iter().all(|s| s.game.rounds == 3));
        assert_eq!(full.target().game.rounds, 10);
        assert_eq!(full.stages[0].game.n_players, 2);
        let direct = build_condition(ConditionName::DirectPrecursor, None).unwrap();
        assert_eq!(direct.kinds(), [GameKind::Pgg, GameKind::IpggPunish]);
        let control = build_condition(ConditionName::Control, None).unwrap();
        assert_eq!(control.stages.len(), 1);
        assert_eq!(control.stages[0].stage_index, 1);
    }

    #[test]
    fn seed_rules() {
        assert_eq!(build_condition(ConditionName::Scrambled, None), Err(CurriculumError::MissingSeed));
        assert!(build_condition(ConditionName::Control, Some(1)).is_err());
        let a = build_condition(ConditionName::Scrambled, Some(42)).unwrap();
        let b = build_condition(ConditionName::Scrambled, Some(42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.target().game.kind, GameKind::IpggPunish);
    }

    #[test]
    fn pgg_rounds_override() {
        let rounds = StageRounds { pgg: 6, ..StageRounds::default() };
        let c = build_condition_with(ConditionName::DirectPrecursor, None, rounds).unwrap();
        assert_eq!(c.stages[0].game.rounds, 6);
        assert_eq!(c.target().game.rounds, TARGET_ROUNDS);
    }

    #[test]
    fn scrambled_is_uniform() {
        let mut counts: BTreeMap<[GameKind; 3], u32> = BTreeMap::new();
        let draws = 6000u64;
        for seed in 0..draws {
            *counts.entry(scrambled_order(seed)).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let expected = draws as f64 / 6.0;
        let chi2: f64 = counts.values().map(|&o| (f64::from(o) - expected).powi(2) / expected).sum();
        // chi-square, 5 dof, p = 0.001
        assert!(chi2 < 20.515, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn names_parse() {
        for c in ConditionName::ALL {
            assert_eq!(c.label().parse::<ConditionName>().unwrap(), c);
            assert_eq!(serde_json::to_value(c).unwrap(), c.label());
        }
        assert!("nope".parse::<ConditionName>().is_err());
    }
}
