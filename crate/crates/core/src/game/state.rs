use serde::{Deserialize, Serialize};
use tracing::warn;

use super::payoff::{apply_punishments, resolve_ipd2, resolve_nipd, resolve_pgg, resolve_stag_hunt};
use super::{ActionRecord, BinaryAction, Contribution, GameError, GameKind, GameSpec, Phase, PhaseActions, PunishmentAllocation, Tokens};

/// Everything that happened in one round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundRecord {
    /// 1-based.
    pub round: u32,
    pub phases: Vec<PhaseActions>,
    /// Contribution-stage payoffs, present only when a punishment phase follows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_payoffs: Option<Vec<Tokens>>,
    pub payoffs: Vec<Tokens>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RoundRecord {
    pub fn actions(&self, phase: Phase) -> Option<&[ActionRecord]> {
        self.phases
            .iter()
            .find(|p| p.phase == phase)
            .map(|p| p.actions.as_slice())
    }

    pub fn choices(&self) -> Option<Vec<BinaryAction>> {
        self.actions(Phase::Act)?
            .iter()
            .map(|a| match a {
                ActionRecord::Choice(c) => Some(*c),
                _ => None,
            })
            .collect()
    }

    pub fn contributions(&self) -> Option<Vec<Contribution>> {
        self.actions(Phase::Contribute)?
            .iter()
            .map(|a| match a {
                ActionRecord::Contribute(c) => Some(*c),
                _ => None,
            })
            .collect()
    }

    pub fn punishments(&self) -> Option<Vec<PunishmentAllocation>> {
        self.actions(Phase::Punish)?
            .iter()
            .map(|a| match a {
                ActionRecord::Punish(p) => Some(p.clone()),
                _ => None,
            })
            .collect()
    }

    /// Words broadcast in the communication phase, if the game has one.
    pub fn broadcast_words(&self) -> Option<Vec<String>> {
        self.actions(Phase::Communicate)?
            .iter()
            .map(|a| match a {
                ActionRecord::Communicate(w) => Some(w.clone()),
                _ => None,
            })
            .collect()
    }
}

/// Where and why a game stopped early.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbortInfo {
    pub round: u32,
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub player: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_id: Option<String>,
    pub cause: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameLog {
    pub spec: GameSpec,
    pub rounds: Vec<RoundRecord>,
    pub totals: Vec<Tokens>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort: Option<AbortInfo>,
}

impl GameLog {
    pub fn is_complete(&self) -> bool {
        self.abort.is_none() && self.rounds.len() == self.spec.rounds as usize
    }

    pub fn is_aborted(&self) -> bool {
        self.abort.is_some()
    }

    /// Re-derives every round from its recorded actions and checks payoffs and totals.
    pub fn verify(&self) -> Result<(), LogMismatch> {
        let mut state = GameState::new(self.spec.clone()).map_err(|e| LogMismatch {
            round: 0,
            detail: e.to_string(),
        })?;
        for record in &self.rounds {
            let mut replayed = None;
            for phase in &record.phases {
                replayed = state
                    .step(phase.phase, phase.actions.clone())
                    .map_err(|e| LogMismatch {
                        round: record.round,
                        detail: e.to_string(),
                    })?;
            }
            let replayed = replayed.ok_or_else(|| LogMismatch {
                round: record.round,
                detail: "round has missing phases".into(),
            })?;
            if replayed.round != record.round {
                return Err(LogMismatch {
                    round: record.round,
                    detail: format!("expected round {}", replayed.round),
                });
            }
            if replayed.payoffs != record.payoffs || replayed.stage_payoffs != record.stage_payoffs {
                return Err(LogMismatch {
                    round: record.round,
                    detail: format!(
                        "payoffs {} do not match recomputed {}",
                        fmt_tokens(&record.payoffs),
                        fmt_tokens(&replayed.payoffs)
                    ),
                });
            }
        }
        if state.log().totals != self.totals {
            return Err(LogMismatch {
                round: self.rounds.len() as u32,
                detail: format!(
                    "totals {} do not match recomputed {}",
                    fmt_tokens(&self.totals),
                    fmt_tokens(&state.log().totals)
                ),
            });
        }
        Ok(())
    }
}

fn fmt_tokens(v: &[Tokens]) -> String {
    let parts: Vec<String> = v.iter().map(Tokens::to_string).collect();
    format!("[{}]", parts.join(", "))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogMismatch {
    pub round: u32,
    pub detail: String,
}

/// A game in progress. Plain data: clone it, move it across threads, replay it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameState {
    log: GameLog,
    pending: Vec<PhaseActions>,
    pending_stage_payoffs: Option<Vec<Tokens>>,
    pending_warnings: Vec<String>,
}

impl GameState {
    pub fn new(spec: GameSpec) -> Result<Self, GameError> {
        spec.validate()?;
        let n = spec.n_players;
        Ok(GameState {
            log: GameLog {
                spec,
                rounds: Vec::new(),
                totals: vec![Tokens::ZERO; n],
                abort: None,
            },
            pending: Vec::new(),
            pending_stage_payoffs: None,
            pending_warnings: Vec::new(),
        })
    }

    pub fn spec(&self) -> &GameSpec {
        &self.log.spec
    }

    pub fn log(&self) -> &GameLog {
        &self.log
    }

    pub fn into_log(self) -> GameLog {
        self.log
    }

    pub fn completed_rounds(&self) -> u32 {
        self.log.rounds.len() as u32
    }

    /// 1-based index of the round being played (or last played, once terminal).
    pub fn round_index(&self) -> u32 {
        (self.completed_rounds() + 1).min(self.log.spec.rounds)
    }

    pub fn is_terminal(&self) -> bool {
        self.log.abort.is_some() || self.completed_rounds() >= self.log.spec.rounds
    }

    pub fn is_aborted(&self) -> bool {
        self.log.abort.is_some()
    }

    pub fn current_phase(&self) -> Option<Phase> {
        if self.is_terminal() {
            return None;
        }
        self.log.spec.kind.phases().get(self.pending.len()).copied()
    }

    /// Phases already played in the current, unfinished round.
    pub fn pending_phases(&self) -> &[PhaseActions] {
        &self.pending
    }

    pub fn pending_stage_payoffs(&self) -> Option<&[Tokens]> {
        self.pending_stage_payoffs.as_deref()
    }

    pub fn abort(&mut self, info: AbortInfo) {
        if self.log.abort.is_none() {
            self.log.abort = Some(info);
        }
    }

    /// Plays one phase. Returns the finished round once its last phase is in.
    pub fn step(&mut self, phase: Phase, actions: Vec<ActionRecord>) -> Result<Option<RoundRecord>, GameError> {
        let expected = self.current_phase().ok_or(GameError::Terminal)?;
        if phase != expected {
            return Err(GameError::PhaseMismatch { expected, got: phase });
        }
        let spec = &self.log.spec;
        if actions.len() != spec.n_players {
            return Err(GameError::Arity {
                expected: spec.n_players,
                got: actions.len(),
            });
        }
        for (player, action) in actions.iter().enumerate() {
            if action.phase() != phase {
                return Err(GameError::WrongAction {
                    expected: phase,
                    detail: format!("player {player} sent a {} action", action.phase()),
                });
            }
            action.validate_for(player, spec)?;
        }

        let round = self.completed_rounds() + 1;
        let payoffs = match phase {
            Phase::Communicate => None,
            Phase::Act => Some(resolve_choices(spec, &actions)?),
            Phase::Contribute => {
                let contributions: Vec<Contribution> = actions
                    .iter()
                    .map(|a| match a {
                        ActionRecord::Contribute(c) => *c,
                        _ => unreachable!("checked above"),
                    })
                    .collect();
                let stage = resolve_pgg(&contributions, spec.endowment, spec.multiplier)?;
                if spec.kind == GameKind::IpggPunish {
                    self.pending_stage_payoffs = Some(stage);
                    None
                } else {
                    Some(stage)
                }
            }
            Phase::Punish => {
                let stage = self
                    .pending_stage_payoffs
                    .clone()
                    .ok_or(GameError::PhaseMismatch {
                        expected: Phase::Contribute,
                        got: Phase::Punish,
                    })?;
                let mut allocations = Vec::with_capacity(actions.len());
                for (player, action) in actions.iter().enumerate() {
                    let ActionRecord::Punish(alloc) = action else {
                        unreachable!("checked above")
                    };
                    let budget = stage[player].whole_floor();
                    let (clamped, removed) = alloc.clamp_to_budget(budget);
                    if removed > 0 {
                        let msg = format!(
                            "round {round}: player {player} punishment spend {} clamped to budget {budget}",
                            alloc.total()
                        );
                        warn!("{msg}");
                        self.pending_warnings.push(msg);
                    }
                    allocations.push(clamped);
                }
                let finals = apply_punishments(&stage, &allocations, spec.punish_ratio)?;
                let applied = allocations.into_iter().map(ActionRecord::Punish).collect();
                self.pending.push(PhaseActions { phase, actions: applied });
                return Ok(Some(self.finish_round(round, finals)));
            }
        };

        self.pending.push(PhaseActions { phase, actions });
        Ok(payoffs.map(|p| self.finish_round(round, p)))
    }

    fn finish_round(&mut self, round: u32, payoffs: Vec<Tokens>) -> RoundRecord {
        for (total, p) in self.log.totals.iter_mut().zip(&payoffs) {
            *total += *p;
        }
        let record = RoundRecord {
            round,
            phases: std::mem::take(&mut self.pending),
            stage_payoffs: self.pending_stage_payoffs.take(),
            payoffs,
            warnings: std::mem::take(&mut self.pending_warnings),
        };
        self.log.rounds.push(record.clone());
        record
    }
}

fn resolve_choices(spec: &GameSpec, actions: &[ActionRecord]) -> Result<Vec<Tokens>, GameError> {
    let choices: Vec<BinaryAction> = actions
        .iter()
        .map(|a| match a {
            ActionRecord::Choice(c) => *c,
            _ => unreachable!("checked by caller"),
        })
        .collect();
    match spec.kind {
        GameKind::StagHunt | GameKind::StagHuntComm => resolve_stag_hunt(&choices, spec.n_players),
        GameKind::Ipd2 => {
            let (a, b) = resolve_ipd2(choices[0], choices[1])?;
            Ok(vec![a, b])
        }
        GameKind::Nipd => resolve_nipd(&choices, spec.npd_rule),
        GameKind::Pgg | GameKind::IpggPunish => Err(GameError::PhaseMismatch {
            expected: Phase::Contribute,
            got: Phase::Act,
        }),
    }
}
