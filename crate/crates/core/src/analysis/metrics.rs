use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::{compensated_sum, SampleSummary};
use super::AnalysisError;
use crate::game::{GameKind, GameLog, GameSpec, RoundRecord};

fn require_complete(log: &GameLog) -> Result<(), AnalysisError> {
    if log.is_aborted() {
        return Err(AnalysisError::Aborted);
    }
    Ok(())
}

/// Per-player values for one round: 1/0 for cooperative choices, or the contributed fraction.
fn round_fractions(spec: &GameSpec, record: &RoundRecord) -> Vec<f64> {
    if spec.kind.is_contribution() {
        let e = f64::from(spec.endowment);
        record
            .contributions()
            .unwrap_or_default()
            .iter()
            .map(|c| f64::from(c.0) / e)
            .collect()
    } else {
        record
            .choices()
            .unwrap_or_default()
            .iter()
            .map(|c| if c.is_cooperative() { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Fraction of cooperative decisions (binary games) or mean contributed share of
/// the endowment (public goods games), over all player-rounds. In `[0, 1]`.
pub fn cooperation_rate(log: &GameLog) -> Result<f64, AnalysisError> {
    require_complete(log)?;
    let values: Vec<f64> = log
        .rounds
        .iter()
        .flat_map(|r| round_fractions(&log.spec, r))
        .collect();
    if values.is_empty() {
        return Err(AnalysisError::Empty);
    }
    Ok(compensated_sum(values.iter().copied()) / values.len() as f64)
}

/// Cooperation rate of each round, in round order.
pub fn cooperation_by_round(log: &GameLog) -> Result<Vec<f64>, AnalysisError> {
    require_complete(log)?;
    Ok(log
        .rounds
        .iter()
        .map(|r| {
            let v = round_fractions(&log.spec, r);
            compensated_sum(v.iter().copied()) / v.len().max(1) as f64
        })
        .collect())
}

/// Mean of the players' cumulative totals.
pub fn average_player_payoff(log: &GameLog) -> f64 {
    compensated_sum(log.totals.iter().map(|t| t.as_f64())) / log.totals.len().max(1) as f64
}

/// Per-player value plotted over rounds: contribution in tokens, or 1/0 cooperation.
fn round_values(spec: &GameSpec, record: &RoundRecord) -> Vec<f64> {
    if spec.kind.is_contribution() {
        record
            .contributions()
            .unwrap_or_default()
            .iter()
            .map(|c| f64::from(c.0))
            .collect()
    } else {
        round_fractions(spec, record)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundPoint {
    pub round: u32,
    pub n: usize,
    pub mean: f64,
    /// Sample std across players and trials: the behavioral consistency measure.
    pub std: Option<f64>,
    pub ci95: Option<f64>,
}

/// Round-wise contribution (or cooperation fraction) across a set of games.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySeries {
    pub condition: String,
    pub points: Vec<RoundPoint>,
}

impl TrajectorySeries {
    /// (first-round mean, last-round mean, last minus first).
    pub fn first_vs_last(&self) -> Option<(f64, f64, f64)> {
        let first = self.points.first()?.mean;
        let last = self.points.last()?.mean;
        Some((first, last, last - first))
    }

    /// Round-by-round `self - other`, over the rounds both series share.
    pub fn difference(&self, other: &TrajectorySeries) -> Vec<f64> {
        self.points.iter().zip(&other.points).map(|(a, b)| a.mean - b.mean).collect()
    }
}

pub fn contribution_trajectory(condition: &str, logs: &[&GameLog]) -> Result<TrajectorySeries, AnalysisError> {
    let first = logs.first().ok_or(AnalysisError::Empty)?;
    for log in logs {
        if log.spec != first.spec {
            return Err(AnalysisError::MixedSpecs);
        }
        require_complete(log)?;
    }
    let points = (0..first.spec.rounds as usize)
        .map(|i| {
            let values: Vec<f64> = logs
                .iter()
                .filter_map(|log| log.rounds.get(i))
                .flat_map(|r| round_values(&first.spec, r))
                .collect();
            let s = SampleSummary::of(&values)?;
            Ok(RoundPoint {
                round: i as u32 + 1,
                n: s.n,
                mean: s.mean,
                std: s.std,
                ci95: s.ci95,
            })
        })
        .collect::<Result<_, AnalysisError>>()?;
    Ok(TrajectorySeries {
        condition: condition.to_string(),
        points,
    })
}

/// Case-folded counts of every broadcast word across cheap-talk games.
pub fn word_frequency(logs: &[&GameLog]) -> Result<BTreeMap<String, u64>, AnalysisError> {
    let mut counts = BTreeMap::new();
    for log in logs {
        if log.spec.kind != GameKind::StagHuntComm {
            return Err(AnalysisError::WrongGame(log.spec.kind));
        }
        for record in &log.rounds {
            for word in record.broadcast_words().unwrap_or_default() {
                *counts.entry(word.to_lowercase()).or_insert(0) += 1;
            }
        }
    }
    if counts.is_empty() {
        return Err(AnalysisError::Empty);
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{ActionRecord, BinaryAction, Contribution, GameState, Phase};

    fn binary_log(kind: GameKind, rounds: &[&[bool]]) -> GameLog {
        let mut g = GameState::new(GameSpec::new(kind, rounds.len() as u32)).unwrap();
        for r in rounds {
            if kind == GameKind::StagHuntComm {
                g.step(Phase::Communicate, vec![ActionRecord::Communicate("Stag".into()); 4]).unwrap();
            }
            let acts = r
                .iter()
                .map(|&c| ActionRecord::Choice(BinaryAction::for_game(kind, c)))
                .collect();
            g.step(Phase::Act, acts).unwrap();
        }
        g.into_log()
    }

    fn pgg_log(rounds: &[[u32; 4]]) -> GameLog {
        let mut g = GameState::new(GameSpec::new(GameKind::Pgg, rounds.len() as u32)).unwrap();
        for r in rounds {
            g.step(Phase::Contribute, r.iter().map(|&c| ActionRecord::Contribute(Contribution(c))).collect())
                .unwrap();
        }
        g.into_log()
    }

    #[test]
    fn stag_hunt_rates() {
        let all = binary_log(GameKind::StagHunt, &[&[true; 4], &[true; 4], &[true; 4]]);
        assert_eq!(cooperation_rate(&all).unwrap(), 1.0);
        let none = binary_log(GameKind::StagHunt, &[&[false; 4], &[false; 4], &[false; 4]]);
        assert_eq!(cooperation_rate(&none).unwrap(), 0.0);
        let half = binary_log(
            GameKind::StagHunt,
            &[&[true, true, false, false], &[true, false, true, false], &[false, true, true, false]],
        );
        assert_eq!(cooperation_rate(&half).unwrap(), 0.5);
    }

    #[test]
    fn pgg_rate_is_normalized_contribution() {
        let log = pgg_log(&[[10; 4], [10; 4], [10; 4]]);
        assert_eq!(cooperation_rate(&log).unwrap(), 0.5);
        let t = contribution_trajectory("c", &[&log]).unwrap();
        assert!(t.points.iter().all(|p| p.mean == 10.0 && p.std == Some(0.0)));
    }

    #[test]
    fn aborted_logs_are_rejected() {
        let mut log = pgg_log(&[[1; 4]]);
        log.abort = Some(crate::game::AbortInfo {
            round: 1,
            phase: Phase::Contribute,
            player: None,
            agent_id: None,
            cause: "x".into(),
        });
        assert!(matches!(cooperation_rate(&log), Err(AnalysisError::Aborted)));
    }

    #[test]
    fn mixed_specs_rejected() {
        let a = pgg_log(&[[1; 4]]);
        let b = pgg_log(&[[1; 4], [2; 4]]);
        assert!(matches!(contribution_trajectory("c", &[&a, &b]), Err(AnalysisError::MixedSpecs)));
    }

    #[test]
    fn decaying_trajectory() {
        let a = pgg_log(&[[20, 16, 12, 12], [10, 8, 6, 4], [0, 0, 2, 2]]);
        let b = pgg_log(&[[18, 14, 10, 10], [8, 8, 8, 8], [0, 0, 0, 0]]);
        let t = contribution_trajectory("c", &[&a, &b]).unwrap();
        // round 1: (60 + 52) / 8 = 14; round 3: 4 / 8 = 0.5
        assert_eq!(t.points[0].mean, 14.0);
        assert_eq!(t.points[2].mean, 0.5);
        assert_eq!(t.first_vs_last().unwrap().2, -13.5);
    }

    #[test]
    fn words_are_case_folded() {
        let log = binary_log(GameKind::StagHuntComm, &[&[true; 4], &[true; 4], &[true; 4]]);
        let counts = word_frequency(&[&log]).unwrap();
        assert_eq!(counts.len(), 1);
        assert_eq!(counts["stag"], 12);
        let pgg = pgg_log(&[[1; 4]]);
        assert!(matches!(word_frequency(&[&pgg]), Err(AnalysisError::WrongGame(_))));
        assert!(matches!(word_frequency(&[]), Err(AnalysisError::Empty)));
    }
}
