use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::template::{PromptTemplate, RenderError, TemplateId};
use crate::game::{ActionRecord, Contribution, GameKind, GameSpec, GameState, Phase, PhaseActions, RoundRecord, Tokens};

/// Shown in place of the history before any round has been played.
pub const NO_HISTORY: &str = "No previous rounds have been played yet.";

/// Heading of the lesson block placed ahead of the game rules.
pub const LESSON_HEADER: &str = "### LESSONS FROM PREVIOUS GAMES";

/// Separates the lesson block from the game prompt.
pub const LESSON_RULE: &str = "--------------------------------------------------------------------------------";

/// What one player sees when asked to act.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// 0-based; prompts show `player + 1`.
    pub player: usize,
    pub spec: GameSpec,
    /// 1-based round being played.
    pub round: u32,
    pub phase: Phase,
    pub history_text: String,
    /// This round's broadcast words, during the action phase of the cheap-talk game.
    pub broadcast_words: Option<Vec<String>>,
    /// Lesson texts in curriculum order.
    pub lessons: Vec<String>,
    /// Completed rounds.
    pub history: Vec<RoundRecord>,
    /// This round's revealed contributions, during a punishment phase.
    pub current_contributions: Option<Vec<Contribution>>,
}

impl Observation {
    /// Builds the observation for `player` at the state's current phase.
    /// Returns `None` once the game is terminal.
    pub fn from_state(state: &GameState, player: usize, lessons: &[String]) -> Option<Self> {
        let phase = state.current_phase()?;
        let spec = state.spec().clone();
        let pending = state.pending_phases();
        let broadcast_words = pending
            .iter()
            .find(|p| p.phase == Phase::Communicate)
            .map(|p| p.actions.iter().filter_map(word_of).collect());
        let current_contributions = if phase == Phase::Punish {
            pending.iter().find(|p| p.phase == Phase::Contribute).map(|p| {
                p.actions
                    .iter()
                    .filter_map(|a| match a {
                        ActionRecord::Contribute(c) => Some(*c),
                        _ => None,
                    })
                    .collect()
            })
        } else {
            None
        };
        let history_text = render_history(
            &state.log().rounds,
            pending,
            state.pending_stage_payoffs(),
            state.round_index(),
            player,
        );
        Some(Observation {
            player,
            round: state.round_index(),
            phase,
            history_text,
            broadcast_words,
            lessons: lessons.to_vec(),
            history: state.log().rounds.clone(),
            current_contributions,
            spec,
        })
    }

    /// Placeholder values this observation can supply.
    pub fn placeholder_values(&self) -> BTreeMap<&'static str, String> {
        let mut v = BTreeMap::new();
        v.insert("player_id", (self.player + 1).to_string());
        v.insert("round_number", self.round.to_string());
        v.insert("round_num", self.round.to_string());
        v.insert("rounds", self.spec.rounds.to_string());
        v.insert("rounds - round_num", self.spec.rounds.saturating_sub(self.round).to_string());
        v.insert("n_players", self.spec.n_players.to_string());
        v.insert("game_history_string", self.history_text.clone());
        if self.spec.n_players == 2 {
            v.insert("opponent_name", format!("Player {}", 2 - self.player));
        }
        if let Some(words) = &self.broadcast_words {
            let lines: Vec<String> = words
                .iter()
                .enumerate()
                .map(|(i, w)| format!("Player {}: {w}", i + 1))
                .collect();
            v.insert("communication_results_string", lines.join("\n"));
        }
        if self.spec.kind == GameKind::IpggPunish {
            let stage = if self.phase == Phase::Punish { "Punishment" } else { "Contribution" };
            v.insert("stage_name", stage.to_string());
        }
        v
    }
}

fn word_of(action: &ActionRecord) -> Option<String> {
    match action {
        ActionRecord::Communicate(w) => Some(w.clone()),
        _ => None,
    }
}

/// Renders the prompt for an observation: the lesson block (if any), then the filled template.
pub fn render_prompt(template: &PromptTemplate, obs: &Observation) -> Result<String, RenderError> {
    let values = obs.placeholder_values();
    let body = template.render(&values)?;
    Ok(prepend_lessons(&obs.lessons, &body))
}

/// Renders with the bundled template for the observation's game and phase.
pub fn render_observation(obs: &Observation) -> Result<String, RenderError> {
    let id = TemplateId::for_phase(obs.spec.kind, obs.phase).ok_or_else(|| RenderError::MissingPlaceholder {
        template: format!("{}/{}", obs.spec.kind, obs.phase),
        placeholder: "template".into(),
    })?;
    render_prompt(&PromptTemplate::builtin(id), obs)
}

pub fn prepend_lessons(lessons: &[String], body: &str) -> String {
    if lessons.is_empty() {
        return body.to_string();
    }
    let mut out = String::new();
    out.push_str(LESSON_HEADER);
    out.push('\n');
    for (i, lesson) in lessons.iter().enumerate() {
        let _ = writeln!(out, "Lesson {}: {}", i + 1, lesson.trim());
    }
    out.push_str(LESSON_RULE);
    out.push_str("\n\n");
    out.push_str(body);
    out
}

fn fmt_amount(t: Tokens) -> String {
    if t.tenths() % 10 == 0 {
        (t.tenths() / 10).to_string()
    } else {
        t.to_string()
    }
}

fn label(player: usize, viewer: usize) -> String {
    if player == viewer {
        format!("P{} (you)", player + 1)
    } else {
        format!("P{}", player + 1)
    }
}

fn entries<T>(items: &[T], viewer: usize, mut f: impl FnMut(&T) -> String) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, x)| format!("{}={}", label(i, viewer), f(x)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn phase_line(out: &mut String, round: u32, phase: &PhaseActions, viewer: usize) {
    let (name, body) = match phase.phase {
        Phase::Communicate => ("words", entries(&phase.actions, viewer, describe)),
        Phase::Act => ("actions", entries(&phase.actions, viewer, describe)),
        Phase::Contribute => ("contributions", entries(&phase.actions, viewer, describe)),
        Phase::Punish => ("punishments", entries(&phase.actions, viewer, describe)),
    };
    let _ = write!(out, "Round {round} {name}: {body}");
}

fn describe(action: &ActionRecord) -> String {
    match action {
        ActionRecord::Choice(c) => c.label().to_string(),
        ActionRecord::Contribute(c) => c.0.to_string(),
        ActionRecord::Communicate(w) => w.clone(),
        ActionRecord::Punish(p) if p.spends.is_empty() => "none".to_string(),
        ActionRecord::Punish(p) => p
            .by_target()
            .iter()
            .map(|(t, s)| format!("P{}:{s}", t + 1))
            .collect::<Vec<_>>()
            .join("+"),
    }
}

/// One line per round per phase, players in index order, the viewer marked `(you)`.
/// Includes the phases already revealed in the current round.
pub fn render_history(
    rounds: &[RoundRecord],
    pending: &[PhaseActions],
    pending_stage_payoffs: Option<&[Tokens]>,
    current_round: u32,
    viewer: usize,
) -> String {
    let mut out = String::new();
    for record in rounds {
        let last = record.phases.len().saturating_sub(1);
        for (i, phase) in record.phases.iter().enumerate() {
            phase_line(&mut out, record.round, phase, viewer);
            if phase.phase == Phase::Contribute && i != last {
                if let Some(stage) = &record.stage_payoffs {
                    let _ = write!(out, " | stage payoffs: {}", entries(stage, viewer, |t| fmt_amount(*t)));
                }
            }
            if i == last {
                let _ = write!(out, " | payoffs: {}", entries(&record.payoffs, viewer, |t| fmt_amount(*t)));
            }
            out.push('\n');
        }
    }
    // The communication phase of the current round is shown separately, not as history.
    for phase in pending.iter().filter(|p| p.phase == Phase::Contribute) {
        phase_line(&mut out, current_round, phase, viewer);
        if let Some(stage) = pending_stage_payoffs {
            let _ = write!(out, " | stage payoffs: {}", entries(stage, viewer, |t| fmt_amount(*t)));
        }
        out.push('\n');
    }
    if out.is_empty() {
        NO_HISTORY.to_string()
    } else {
        out.pop();
        out
    }
}
