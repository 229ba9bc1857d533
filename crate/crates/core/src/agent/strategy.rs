//! Deterministic scripted players used for tests, baselines and offline runs.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Observation;
use crate::game::{ActionRecord, BinaryAction, Contribution, Phase, PunishmentAllocation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    AlwaysCooperate,
    AlwaysDefect,
    /// Cooperates first, then cooperates iff every opponent cooperated last round.
    TitForTat,
    /// Cooperates until any opponent defects, then defects forever.
    GrimTrigger,
    RandomBernoulli { p: f64 },
    FixedContribution { amount: u32 },
    /// Contributes half the endowment first, then the rounded mean of last round's contributions.
    MatchMeanContribution,
    NoPunish,
    /// Spends `spend` on every opponent who contributed strictly below this round's mean.
    PunishBelowMean { spend: u32 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("strategy {strategy:?} cannot act in the {phase} phase")]
    PhaseMismatch { strategy: String, phase: Phase },
    #[error("strategy parameter out of bounds: {0}")]
    BadParameter(String),
}

impl StrategySpec {
    pub fn applies_to(&self, phase: Phase) -> bool {
        match self {
            StrategySpec::AlwaysCooperate
            | StrategySpec::AlwaysDefect
            | StrategySpec::TitForTat
            | StrategySpec::GrimTrigger
            | StrategySpec::RandomBernoulli { .. } => matches!(phase, Phase::Act | Phase::Communicate),
            StrategySpec::FixedContribution { .. } | StrategySpec::MatchMeanContribution => phase == Phase::Contribute,
            StrategySpec::NoPunish | StrategySpec::PunishBelowMean { .. } => phase == Phase::Punish,
        }
    }

    fn name(&self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_string))
            .unwrap_or_default()
    }
}

/// Whether every opponent cooperated in `round` (a record's binary choices).
fn opponents_cooperated(choices: &[BinaryAction], me: usize) -> bool {
    choices
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != me)
        .all(|(_, c)| c.is_cooperative())
}

fn intends_to_cooperate(strategy: &StrategySpec, obs: &Observation, rng: &mut impl Rng) -> Result<bool, StrategyError> {
    let mut previous = obs.history.iter().filter_map(|r| r.choices());
    Ok(match strategy {
        StrategySpec::AlwaysCooperate => true,
        StrategySpec::AlwaysDefect => false,
        StrategySpec::TitForTat => previous
            .next_back()
            .is_none_or(|choices| opponents_cooperated(&choices, obs.player)),
        StrategySpec::GrimTrigger => {
            let mut all = previous;
            all.all(|choices| opponents_cooperated(&choices, obs.player))
        }
        StrategySpec::RandomBernoulli { p } => {
            if !(0.0..=1.0).contains(p) {
                return Err(StrategyError::BadParameter(format!("p = {p}")));
            }
            rng.random_bool(*p)
        }
        _ => unreachable!("binary strategies only"),
    })
}

/// Decides one action. Deterministic given the strategy, observation and RNG state.
pub fn scripted_decide(strategy: &StrategySpec, obs: &Observation, rng: &mut impl Rng) -> Result<ActionRecord, StrategyError> {
    if !strategy.applies_to(obs.phase) {
        return Err(StrategyError::PhaseMismatch {
            strategy: strategy.name(),
            phase: obs.phase,
        });
    }
    let spec = &obs.spec;
    match obs.phase {
        Phase::Act => {
            let coop = intends_to_cooperate(strategy, obs, rng)?;
            Ok(ActionRecord::Choice(BinaryAction::for_game(spec.kind, coop)))
        }
        Phase::Communicate => {
            let coop = intends_to_cooperate(strategy, obs, rng)?;
            Ok(ActionRecord::Communicate(if coop { "stag" } else { "hare" }.to_string()))
        }
        Phase::Contribute => match strategy {
            StrategySpec::FixedContribution { amount } => {
                if *amount > spec.endowment {
                    return Err(StrategyError::BadParameter(format!(
                        "contribution {amount} exceeds endowment {}",
                        spec.endowment
                    )));
                }
                Ok(ActionRecord::Contribute(Contribution(*amount)))
            }
            StrategySpec::MatchMeanContribution => {
                let amount = match obs.history.last().and_then(|r| r.contributions()) {
                    Some(last) if !last.is_empty() => {
                        let n = last.len() as u64;
                        let sum: u64 = last.iter().map(|c| u64::from(c.0)).sum();
                        ((2 * sum + n) / (2 * n)) as u32
                    }
                    _ => spec.endowment / 2,
                };
                Ok(ActionRecord::Contribute(Contribution(amount.min(spec.endowment))))
            }
            _ => unreachable!("checked by applies_to"),
        },
        Phase::Punish => match strategy {
            StrategySpec::NoPunish => Ok(ActionRecord::Punish(PunishmentAllocation::none())),
            StrategySpec::PunishBelowMean { spend } => {
                let contributions = obs.current_contributions.as_deref().unwrap_or(&[]);
                let n = contributions.len() as u64;
                let sum: u64 = contributions.iter().map(|c| u64::from(c.0)).sum();
                // c < sum / n, compared without division
                let targets = contributions
                    .iter()
                    .enumerate()
                    .filter(|&(i, c)| i != obs.player && u64::from(c.0) * n < sum)
                    .map(|(i, _)| (i, *spend))
                    .filter(|&(_, s)| s > 0);
                Ok(ActionRecord::Punish(PunishmentAllocation::from_pairs(targets)))
            }
            _ => unreachable!("checked by applies_to"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{GameKind, GameSpec, GameState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(1)
    }

    fn play(state: &mut GameState, choices: &[BinaryAction]) {
        state
            .step(Phase::Act, choices.iter().map(|&c| ActionRecord::Choice(c)).collect())
            .unwrap();
    }

    #[test]
    fn tit_for_tat_opens_with_cooperate_then_copies() {
        let mut state = GameState::new(GameSpec::new(GameKind::Ipd2, 3)).unwrap();
        let obs = Observation::from_state(&state, 0, &[]).unwrap();
        assert_eq!(
            scripted_decide(&StrategySpec::TitForTat, &obs, &mut rng()).unwrap(),
            ActionRecord::Choice(BinaryAction::Cooperate)
        );
        play(&mut state, &[BinaryAction::Cooperate, BinaryAction::Defect]);
        let obs = Observation::from_state(&state, 0, &[]).unwrap();
        assert_eq!(
            scripted_decide(&StrategySpec::TitForTat, &obs, &mut rng()).unwrap(),
            ActionRecord::Choice(BinaryAction::Defect)
        );
        play(&mut state, &[BinaryAction::Defect, BinaryAction::Cooperate]);
        let obs = Observation::from_state(&state, 0, &[]).unwrap();
        assert_eq!(
            scripted_decide(&StrategySpec::TitForTat, &obs, &mut rng()).unwrap(),
            ActionRecord::Choice(BinaryAction::Cooperate)
        );
    }

    #[test]
    fn grim_trigger_never_forgives() {
        let mut state = GameState::new(GameSpec::new(GameKind::Ipd2, 4)).unwrap();
        play(&mut state, &[BinaryAction::Cooperate, BinaryAction::Defect]);
        play(&mut state, &[BinaryAction::Defect, BinaryAction::Cooperate]);
        let obs = Observation::from_state(&state, 0, &[]).unwrap();
        assert_eq!(
            scripted_decide(&StrategySpec::GrimTrigger, &obs, &mut rng()).unwrap(),
            ActionRecord::Choice(BinaryAction::Defect)
        );
    }

    #[test]
    fn contribution_strategies() {
        let mut state = GameState::new(GameSpec::new(GameKind::IpggPunish, 3)).unwrap();
        let obs = Observation::from_state(&state, 0, &[]).unwrap();
        assert_eq!(
            scripted_decide(&StrategySpec::FixedContribution { amount: 10 }, &obs, &mut rng()).unwrap(),
            ActionRecord::Contribute(Contribution(10))
        );
        assert_eq!(
            scripted_decide(&StrategySpec::MatchMeanContribution, &obs, &mut rng()).unwrap(),
            ActionRecord::Contribute(Contribution(10))
        );
        assert!(scripted_decide(&StrategySpec::FixedContribution { amount: 21 }, &obs, &mut rng()).is_err());
        assert!(matches!(
            scripted_decide(&StrategySpec::TitForTat, &obs, &mut rng()),
            Err(StrategyError::PhaseMismatch { .. })
        ));

        state
            .step(
                Phase::Contribute,
                [4, 20, 20, 5].iter().map(|&c| ActionRecord::Contribute(Contribution(c))).collect(),
            )
            .unwrap();
        let obs = Observation::from_state(&state, 1, &[]).unwrap();
        assert_eq!(
            scripted_decide(&StrategySpec::PunishBelowMean { spend: 2 }, &obs, &mut rng()).unwrap(),
            ActionRecord::Punish(PunishmentAllocation::from_pairs([(0, 2), (3, 2)]))
        );
        state
            .step(Phase::Punish, vec![ActionRecord::Punish(PunishmentAllocation::none()); 4])
            .unwrap();
        let obs = Observation::from_state(&state, 0, &[]).unwrap();
        // mean of 4, 20, 20, 5 = 12.25
        assert_eq!(
            scripted_decide(&StrategySpec::MatchMeanContribution, &obs, &mut rng()).unwrap(),
            ActionRecord::Contribute(Contribution(12))
        );
    }

    #[test]
    fn communication_follows_intent() {
        let state = GameState::new(GameSpec::new(GameKind::StagHuntComm, 3)).unwrap();
        let obs = Observation::from_state(&state, 0, &[]).unwrap();
        assert_eq!(
            scripted_decide(&StrategySpec::AlwaysDefect, &obs, &mut rng()).unwrap(),
            ActionRecord::Communicate("hare".into())
        );
    }

    #[test]
    fn bernoulli_is_seed_deterministic() {
        let state = GameState::new(GameSpec::new(GameKind::Nipd, 3)).unwrap();
        let obs = Observation::from_state(&state, 2, &[]).unwrap();
        let s = StrategySpec::RandomBernoulli { p: 0.5 };
        let run = || {
            let mut r = rng();
            (0..32)
                .map(|_| scripted_decide(&s, &obs, &mut r).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
        assert!(scripted_decide(&StrategySpec::RandomBernoulli { p: 1.5 }, &obs, &mut rng()).is_err());
    }
}
