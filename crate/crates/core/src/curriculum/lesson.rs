use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::CurriculumError;
use crate::agent::{PromptTemplate, TemplateId};
use crate::analysis::{average_player_payoff, cooperation_by_round, cooperation_rate};
use crate::game::{GameLog, Tokens};
use crate::gateway::ChatClient;

pub const NO_PREVIOUS_LESSONS: &str = "None (this is the first stage).";
pub const LESSON_SYSTEM_PROMPT: &str = "You analyze game theory experiments and write strategic lessons for AI agents.";
pub const STUB_GENERATOR_ID: &str = "stub";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lesson {
    pub stage_index: usize,
    pub game_name: String,
    pub text: String,
    pub generator_id: String,
    /// Unix seconds; only recorded for live generators so offline runs stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<u64>,
}

/// Values for the lesson prompt. Rates are percentages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LessonPromptContext {
    pub game_name: String,
    pub stage_num: usize,
    pub rounds_played: usize,
    pub num_players: usize,
    pub cooperation_rate: f64,
    pub avg_payoff: f64,
    pub cooperation_trajectory: Vec<f64>,
    pub patterns: String,
    pub previous_lessons: Vec<String>,
}

impl LessonPromptContext {
    pub fn placeholder_values(&self) -> BTreeMap<&'static str, String> {
        let trajectory = self
            .cooperation_trajectory
            .iter()
            .map(|v| format!("{v:.1}%"))
            .collect::<Vec<_>>()
            .join(" -> ");
        let previous = if self.previous_lessons.is_empty() {
            NO_PREVIOUS_LESSONS.to_string()
        } else {
            self.previous_lessons
                .iter()
                .enumerate()
                .map(|(i, l)| format!("Lesson {}: {}", i + 1, l.trim()))
                .collect::<Vec<_>>()
                .join("\n")
        };
        BTreeMap::from([
            ("game_name", self.game_name.clone()),
            ("stage_num", self.stage_num.to_string()),
            ("rounds_played", self.rounds_played.to_string()),
            ("num_players", self.num_players.to_string()),
            ("cooperation_rate:.1f", format!("{:.1}", self.cooperation_rate)),
            ("avg_payoff:.1f", format!("{:.1}", self.avg_payoff)),
            ("cooperation_trajectory", trajectory),
            ("patterns", self.patterns.clone()),
            ("previous_lessons_string", previous),
        ])
    }

    pub fn render_prompt(&self) -> Result<String, CurriculumError> {
        PromptTemplate::builtin(TemplateId::Lesson)
            .render(&self.placeholder_values())
            .map_err(|e| CurriculumError::Render(e.to_string()))
    }

    pub fn stub_text(&self) -> String {
        format!(
            "Lesson from {}: cooperation rate was {:.1}%, payoffs averaged {:.1} tokens per player over {} rounds.",
            self.game_name, self.cooperation_rate, self.avg_payoff, self.rounds_played
        )
    }
}

pub fn build_lesson_context(
    log: &GameLog,
    stage_num: usize,
    previous: &[Lesson],
) -> Result<LessonPromptContext, CurriculumError> {
    if !log.is_complete() {
        return Err(CurriculumError::IncompleteLog);
    }
    let rate = cooperation_rate(log).map_err(|e| CurriculumError::Context(e.to_string()))?;
    let trajectory = cooperation_by_round(log).map_err(|e| CurriculumError::Context(e.to_string()))?;
    Ok(LessonPromptContext {
        game_name: log.spec.kind.display_name().to_string(),
        stage_num,
        rounds_played: log.rounds.len(),
        num_players: log.spec.n_players,
        cooperation_rate: 100.0 * rate,
        avg_payoff: average_player_payoff(log),
        cooperation_trajectory: trajectory.iter().map(|v| 100.0 * v).collect(),
        patterns: behavior_patterns(log),
        previous_lessons: previous.iter().map(|l| l.text.clone()).collect(),
    })
}

/// One line per player: cooperative share or mean contribution, first defection,
/// punishment given and received; then final totals.
pub fn behavior_patterns(log: &GameLog) -> String {
    let spec = &log.spec;
    let n = spec.n_players;
    let mut out = String::new();
    for p in 0..n {
        let _ = write!(out, "- Player {}: ", p + 1);
        if spec.kind.is_contribution() {
            let amounts: Vec<u32> = log
                .rounds
                .iter()
                .filter_map(|r| r.contributions().map(|c| c[p].0))
                .collect();
            let total: u64 = amounts.iter().map(|&a| u64::from(a)).sum();
            let mean = total as f64 / amounts.len().max(1) as f64;
            let _ = write!(out, "mean contribution {mean:.1} of {}", spec.endowment);
            match amounts.iter().position(|&a| a == 0) {
                Some(r) => {
                    let _ = write!(out, "; first zero contribution in round {}", r + 1);
                }
                None => out.push_str("; never contributed zero"),
            }
            if spec.kind.phases().len() > 1 {
                let mut spent = 0u64;
                let mut received = 0u64;
                for r in &log.rounds {
                    if let Some(allocs) = r.punishments() {
                        spent += allocs[p].total();
                        received += allocs
                            .iter()
                            .filter_map(|a| a.by_target().get(&p).copied())
                            .sum::<u64>();
                    }
                }
                let _ = write!(
                    out,
                    "; spent {spent} on punishment; lost {} to punishment",
                    received * u64::from(spec.punish_ratio)
                );
            }
        } else {
            let choices: Vec<bool> = log
                .rounds
                .iter()
                .filter_map(|r| r.choices().map(|c| c[p].is_cooperative()))
                .collect();
            let coop = choices.iter().filter(|&&c| c).count();
            let _ = write!(out, "cooperated in {coop} of {} rounds", choices.len());
            match choices.iter().position(|&c| !c) {
                Some(r) => {
                    let _ = write!(out, "; first defected in round {}", r + 1);
                }
                None => out.push_str("; never defected"),
            }
        }
        out.push('\n');
    }
    let totals: Vec<String> = log
        .totals
        .iter()
        .enumerate()
        .map(|(i, t)| format!("P{}={}", i + 1, fmt_tokens(*t)))
        .collect();
    let _ = write!(out, "- Final totals: {}", totals.join(", "));
    out
}

fn fmt_tokens(t: Tokens) -> String {
    if t.tenths() % 10 == 0 {
        (t.tenths() / 10).to_string()
    } else {
        t.to_string()
    }
}

/// Where lesson text comes from.
pub enum LessonGenerator<'a> {
    /// Deterministic text built from the context metrics.
    Stub,
    Model(&'a mut ChatClient),
}

impl LessonGenerator<'_> {
    pub fn id(&self) -> String {
        match self {
            LessonGenerator::Stub => STUB_GENERATOR_ID.to_string(),
            LessonGenerator::Model(c) => c.endpoint().model_id.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedLesson {
    pub lesson: Lesson,
    pub prompt: String,
}

/// Model replies are stored verbatim. Model exchanges stay recorded in the client.
pub fn generate_lesson(
    ctx: &LessonPromptContext,
    generator: &mut LessonGenerator<'_>,
) -> Result<GeneratedLesson, CurriculumError> {
    let prompt = ctx.render_prompt()?;
    let generator_id = generator.id();
    let (text, generated_at) = match generator {
        LessonGenerator::Stub => (ctx.stub_text(), None),
        LessonGenerator::Model(client) => {
            let text = client
                .chat_complete(LESSON_SYSTEM_PROMPT, &prompt)
                .map_err(CurriculumError::Gateway)?;
            let stamp = client
                .endpoint()
                .is_live()
                .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
            (text, stamp)
        }
    };
    if text.trim().is_empty() {
        return Err(CurriculumError::EmptyLesson { stage: ctx.stage_num });
    }
    Ok(GeneratedLesson {
        lesson: Lesson {
            stage_index: ctx.stage_num,
            game_name: ctx.game_name.clone(),
            text,
            generator_id,
            generated_at,
        },
        prompt,
    })
}

pub fn accumulate(mut lessons: Vec<Lesson>, new: Lesson) -> Vec<Lesson> {
    lessons.push(new);
    lessons
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{ActionRecord, BinaryAction, Contribution, GameKind, GameSpec, GameState, Phase, PunishmentAllocation};
    use crate::gateway::{Gate, MockScript, ModelEndpoint, UreqTransport};
    use std::sync::Arc;

    fn play(spec: GameSpec, mut f: impl FnMut(u32, Phase, usize) -> ActionRecord) -> GameLog {
        let mut g = GameState::new(spec).unwrap();
        while let Some(phase) = g.current_phase() {
            let r = g.round_index();
            let n = g.spec().n_players;
            g.step(phase, (0..n).map(|p| f(r, phase, p)).collect()).unwrap();
        }
        g.into_log()
    }

    fn all_defect_nipd() -> GameLog {
        play(GameSpec::new(GameKind::Nipd, 3), |_, _, _| ActionRecord::Choice(BinaryAction::Defect))
    }

    #[test]
    fn zero_cooperation_context() {
        let ctx = build_lesson_context(&all_defect_nipd(), 2, &[]).unwrap();
        assert_eq!(ctx.cooperation_rate, 0.0);
        assert_eq!(ctx.cooperation_trajectory, [0.0, 0.0, 0.0]);
        assert_eq!(ctx.game_name, "NPlayerIteratedPrisonersDilemma");
        let prompt = ctx.render_prompt().unwrap();
        assert!(prompt.contains("Overall cooperation rate: 0.0%"));
        assert!(prompt.contains(&format!("PREVIOUS LESSONS LEARNED:\n{NO_PREVIOUS_LESSONS}\n")));
        assert!(prompt.contains("Start with \"Lesson from NPlayerIteratedPrisonersDilemma:\""));
        assert!(ctx.patterns.contains("- Player 4: cooperated in 0 of 3 rounds; first defected in round 1"));
    }

    #[test]
    fn half_contribution_rate() {
        let log = play(GameSpec::new(GameKind::Pgg, 3), |_, _, _| ActionRecord::Contribute(Contribution(10)));
        let ctx = build_lesson_context(&log, 3, &[]).unwrap();
        assert_eq!(ctx.cooperation_rate, 50.0);
        assert_eq!(ctx.avg_payoff, 78.0);
        assert!(ctx.patterns.contains("mean contribution 10.0 of 20; never contributed zero"));
    }

    #[test]
    fn punishment_patterns() {
        let log = play(GameSpec::new(GameKind::IpggPunish, 2), |_, phase, p| match phase {
            Phase::Contribute => ActionRecord::Contribute(Contribution(if p == 0 { 0 } else { 20 })),
            _ if p == 1 => ActionRecord::Punish(PunishmentAllocation::from_pairs([(0, 2)])),
            _ => ActionRecord::Punish(PunishmentAllocation::none()),
        });
        let pat = behavior_patterns(&log);
        assert!(pat.contains("- Player 1: mean contribution 0.0 of 20; first zero contribution in round 1; spent 0 on punishment; lost 12 to punishment"), "{pat}");
        assert!(pat.contains("- Player 2: mean contribution 20.0 of 20; never contributed zero; spent 4 on punishment; lost 0"));
    }

    #[test]
    fn aborted_log_rejected() {
        let mut g = GameState::new(GameSpec::new(GameKind::Ipd2, 3)).unwrap();
        g.abort(crate::game::AbortInfo {
            round: 1,
            phase: Phase::Act,
            player: Some(0),
            agent_id: None,
            cause: "test".into(),
        });
        assert_eq!(build_lesson_context(g.log(), 1, &[]), Err(CurriculumError::IncompleteLog));
    }

    #[test]
    fn stub_is_deterministic() {
        let ctx = build_lesson_context(&all_defect_nipd(), 2, &[]).unwrap();
        let a = generate_lesson(&ctx, &mut LessonGenerator::Stub).unwrap();
        let b = generate_lesson(&ctx, &mut LessonGenerator::Stub).unwrap();
        assert_eq!(a.lesson, b.lesson);
        assert!(a.lesson.text.starts_with("Lesson from NPlayerIteratedPrisonersDilemma:"));
        assert!(a.lesson.text.contains("0.0"));
        assert_eq!(a.lesson.generator_id, STUB_GENERATOR_ID);
        assert_eq!(a.lesson.generated_at, None);
    }

    fn canned_client(reply: &str) -> ChatClient {
        let ep = ModelEndpoint::mock(
            "lesson-mock",
            MockScript::Canned {
                responses: vec![reply.to_string()],
            },
        );
        ChatClient::connect(ep, Arc::new(UreqTransport), Arc::new(Gate::new(1)), 0).unwrap()
    }

    #[test]
    fn model_reply_kept_verbatim() {
        let earlier = Lesson {
            stage_index: 1,
            game_name: "TwoPlayerIteratedPrisonersDilemma".into(),
            text: "Lesson from TwoPlayerIteratedPrisonersDilemma: defect late.".into(),
            generator_id: STUB_GENERATOR_ID.into(),
            generated_at: None,
        };
        let ctx = build_lesson_context(&all_defect_nipd(), 2, std::slice::from_ref(&earlier)).unwrap();
        let reply = "Lesson from NPlayerIteratedPrisonersDilemma:  keep  spacing \n";
        let mut client = canned_client(reply);
        let out = generate_lesson(&ctx, &mut LessonGenerator::Model(&mut client)).unwrap();
        assert_eq!(out.lesson.text, reply);
        assert_eq!(out.lesson.generator_id, "lesson-mock");
        assert_eq!(client.take_exchanges().len(), 1);
        assert!(out.prompt.contains(&format!("PREVIOUS LESSONS LEARNED:\nLesson 1: {}\n", earlier.text)));
    }

    #[test]
    fn empty_reply_is_error() {
        let ctx = build_lesson_context(&all_defect_nipd(), 2, &[]).unwrap();
        let mut client = canned_client("  \n");
        let err = generate_lesson(&ctx, &mut LessonGenerator::Model(&mut client)).unwrap_err();
        assert_eq!(err, CurriculumError::EmptyLesson { stage: 2 });
    }

    #[test]
    fn accumulate_appends_in_order() {
        let mk = |i: usize| Lesson {
            stage_index: i,
            game_name: "g".into(),
            text: format!("L{i}"),
            generator_id: "stub".into(),
            generated_at: None,
        };
        let one = accumulate(Vec::new(), mk(1));
        assert_eq!(one, [mk(1)]);
        assert_eq!(accumulate(one, mk(2)), [mk(1), mk(2)]);
    }
}
