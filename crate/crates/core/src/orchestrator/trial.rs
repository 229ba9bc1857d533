use std::collections::BTreeSet;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracing::info;

use super::events::{Event, EventSink};
use super::pool::{seat_agents, AgentPool, Decider, Grouping, DEFAULT_LESSON_MODEL};
use super::runner::{run_game, GameContext, Seat};
use super::OrchestratorError;
use crate::analysis::{average_player_payoff, cooperation_rate};
use crate::curriculum::{
    accumulate, build_lesson_context, generate_lesson, CurriculumCondition, CurriculumError, Lesson, LessonGenerator,
    StageSpec,
};
use crate::game::{GameLog, GameSpec, Phase, Tokens};
use crate::gateway::{ChatClient, GateRegistry, MockScript, ModelEndpoint, RetryPolicy, Transport};

/// Seed for a labelled sub-stream: the first 8 bytes (little-endian) of
/// SHA-256 over the parts joined with `:`.
pub fn derive_seed(parts: &[&str]) -> u64 {
    let digest = Sha256::digest(parts.join(":").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// `derive_seed(master, condition, index)`.
pub fn trial_seed(master: u64, condition: &str, index: usize) -> u64 {
    derive_seed(&[&master.to_string(), condition, &index.to_string()])
}

pub fn trial_id(condition: &str, index: usize) -> String {
    format!("{condition}-{index:03}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrialStatus {
    Completed,
    /// `stage` counts from 1; `round` is the round being played.
    Aborted {
        reason: String,
        stage: usize,
        round: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<Phase>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        agent_id: Option<String>,
    },
}

/// Target-stage outcome of a completed trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalMetrics {
    /// Mean of the players' totals.
    pub avg_payoff: f64,
    pub cooperation_rate: f64,
    pub totals: Vec<Tokens>,
}

impl FinalMetrics {
    pub fn of(log: &GameLog) -> Self {
        FinalMetrics {
            avg_payoff: average_player_payoff(log),
            cooperation_rate: cooperation_rate(log).unwrap_or(0.0),
            totals: log.totals.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_id: String,
    pub condition: String,
    pub seed: u64,
    pub role_assignment: Vec<String>,
    pub stage_logs: Vec<GameLog>,
    pub lessons: Vec<Lesson>,
    pub status: TrialStatus,
    pub final_metrics: Option<FinalMetrics>,
}

impl TrialResult {
    pub fn is_completed(&self) -> bool {
        self.status == TrialStatus::Completed
    }

    /// The target-stage log of a completed trial.
    pub fn target_log(&self) -> Option<&GameLog> {
        self.is_completed().then(|| self.stage_logs.last()).flatten()
    }
}

/// The games a trial plays, in order, and how agents are seated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub condition: String,
    pub stages: Vec<StageSpec>,
    #[serde(default)]
    pub grouping: Grouping,
}

impl TrialPlan {
    pub fn from_condition(condition: &CurriculumCondition) -> Self {
        TrialPlan {
            condition: condition.name.label().to_string(),
            stages: condition.stages.clone(),
            grouping: Grouping::Heterogeneous,
        }
    }

    pub fn single(condition: &str, game: GameSpec, grouping: Grouping) -> Self {
        TrialPlan {
            condition: condition.into(),
            stages: vec![StageSpec { stage_index: 1, game }],
            grouping,
        }
    }

    pub fn seats_needed(&self) -> usize {
        self.stages.iter().map(|s| s.game.n_players).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LessonSource {
    /// Deterministic lessons from stage metrics.
    Stub,
    Model { endpoint: ModelEndpoint },
}

impl Default for LessonSource {
    fn default() -> Self {
        LessonSource::Model {
            endpoint: ModelEndpoint::anthropic(DEFAULT_LESSON_MODEL),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Every model endpoint answers from its offline mock.
    #[default]
    Mock,
    Live,
}

/// Shared runtime for trials.
#[derive(Clone)]
pub struct TrialEnv {
    pub mode: RunMode,
    pub transport: Arc<dyn Transport>,
    pub gates: Arc<GateRegistry>,
    pub retry_policy: RetryPolicy,
    pub max_retries: u32,
    pub lesson_source: LessonSource,
}

impl TrialEnv {
    pub fn new(mode: RunMode, transport: Arc<dyn Transport>) -> Self {
        TrialEnv {
            mode,
            transport,
            gates: Arc::new(GateRegistry::default()),
            retry_policy: RetryPolicy::default(),
            max_retries: 3,
            lesson_source: LessonSource::Stub,
        }
    }

    pub fn effective(&self, endpoint: &ModelEndpoint) -> ModelEndpoint {
        match self.mode {
            RunMode::Mock => endpoint.offline(),
            RunMode::Live => endpoint.clone(),
        }
    }

    pub fn connect(&self, endpoint: &ModelEndpoint, seed: u64) -> Result<ChatClient, OrchestratorError> {
        let endpoint = self.effective(endpoint);
        let gate = self.gates.gate(&endpoint.gate_key(), endpoint.max_in_flight);
        Ok(ChatClient::connect(endpoint, self.transport.clone(), gate, seed)
            .map_err(OrchestratorError::Gateway)?
            .with_retry_policy(self.retry_policy))
    }
}

/// Runs a trial: seats agents, plays the stages in order and generates a lesson
/// after every non-final stage. Agents listed in `garbage_agents` are replaced by
/// a mock that never produces a usable reply.
pub fn run_trial(
    trial_id: &str,
    plan: &TrialPlan,
    pool: &AgentPool,
    seed: u64,
    garbage_agents: &BTreeSet<String>,
    env: &TrialEnv,
    sink: &mut dyn EventSink,
) -> Result<TrialResult, OrchestratorError> {
    let io = |e: std::io::Error| OrchestratorError::Io(e.to_string());
    let seed_str = seed.to_string();
    let mut role_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[&seed_str, "roles"]));
    let roles = seat_agents(pool, plan.grouping, plan.seats_needed(), &mut role_rng)?;
    let role_ids: Vec<String> = roles.iter().map(|&i| pool.agents[i].id.clone()).collect();
    sink.emit(Event::TrialStart {
        trial_id: trial_id.into(),
        condition: plan.condition.clone(),
        seed,
        role_assignment: role_ids.clone(),
        stages: plan.stages.iter().map(|s| s.game.clone()).collect(),
    })
    .map_err(io)?;

    let mut lesson_client = match &env.lesson_source {
        LessonSource::Stub => None,
        LessonSource::Model { endpoint } => Some(env.connect(endpoint, derive_seed(&[&seed_str, "lesson"]))?),
    };
    let mut lessons: Vec<Lesson> = Vec::new();
    let mut logs = Vec::new();
    let mut status = TrialStatus::Completed;
    let n_stages = plan.stages.len();

    for stage in &plan.stages {
        let spec = &stage.game;
        let mut seats = Vec::with_capacity(spec.n_players);
        for (p, &agent) in roles.iter().take(spec.n_players).enumerate() {
            let agent = &pool.agents[agent];
            let seat_seed = derive_seed(&[&seed_str, &format!("stage{}", stage.stage_index), &format!("seat{p}")]);
            let seat = if garbage_agents.contains(&agent.id) {
                let ep = ModelEndpoint::mock(&agent.id, MockScript::Garbage);
                Seat::model(&agent.id, env.connect(&ep, seat_seed)?)
            } else {
                match &agent.decider {
                    Decider::Scripted { strategies } => Seat::scripted(&agent.id, strategies.clone(), seat_seed),
                    Decider::Model { endpoint } => Seat::model(&agent.id, env.connect(endpoint, seat_seed)?),
                }
            };
            seats.push(seat);
        }
        let lesson_texts: Vec<String> = lessons.iter().map(|l| l.text.clone()).collect();
        sink.emit(Event::StageStart {
            trial_id: trial_id.into(),
            stage_index: stage.stage_index,
            spec: spec.clone(),
            seats: seats.iter().map(|s| s.agent_id.clone()).collect(),
            lessons: lesson_texts.clone(),
        })
        .map_err(io)?;
        let ctx = GameContext {
            trial_id,
            stage_index: stage.stage_index,
            lessons: &lesson_texts,
            max_retries: env.max_retries,
        };
        let log = run_game(spec, &mut seats, &ctx, sink)?;
        sink.emit(Event::StageEnd {
            trial_id: trial_id.into(),
            stage_index: stage.stage_index,
            rounds_completed: log.rounds.len() as u32,
            totals: log.totals.clone(),
            abort: log.abort.clone(),
        })
        .map_err(io)?;
        if let Some(abort) = &log.abort {
            status = TrialStatus::Aborted {
                reason: abort.cause.clone(),
                stage: stage.stage_index,
                round: abort.round,
                phase: Some(abort.phase),
                agent_id: abort.agent_id.clone(),
            };
            logs.push(log);
            break;
        }
        let is_last = stage.stage_index == n_stages;
        if !is_last {
            let generated = build_lesson_context(&log, stage.stage_index, &lessons).and_then(|ctx| {
                let mut generator = match lesson_client.as_mut() {
                    Some(c) => LessonGenerator::Model(c),
                    None => LessonGenerator::Stub,
                };
                generate_lesson(&ctx, &mut generator)
            });
            if let Some(client) = lesson_client.as_mut() {
                let agent_id = client.endpoint().model_id.clone();
                for (i, exchange) in client.take_exchanges().into_iter().enumerate() {
                    sink.emit(Event::Exchange {
                        trial_id: trial_id.into(),
                        stage_index: stage.stage_index,
                        round: None,
                        phase: None,
                        player: None,
                        agent_id: agent_id.clone(),
                        attempt: i as u32 + 1,
                        exchange,
                        parse_error: None,
                    })
                    .map_err(io)?;
                }
            }
            match generated {
                Ok(g) => {
                    sink.emit(Event::Lesson {
                        trial_id: trial_id.into(),
                        lesson: g.lesson.clone(),
                        prompt: g.prompt,
                    })
                    .map_err(io)?;
                    lessons = accumulate(lessons, g.lesson);
                }
                Err(CurriculumError::Gateway(e)) if e.is_auth() => {
                    return Err(OrchestratorError::Gateway(e));
                }
                Err(e) => {
                    status = TrialStatus::Aborted {
                        reason: format!("lesson generation failed: {e}"),
                        stage: stage.stage_index,
                        round: spec.rounds,
                        phase: None,
                        agent_id: None,
                    };
                    logs.push(log);
                    break;
                }
            }
        }
        logs.push(log);
    }

    let final_metrics = (status == TrialStatus::Completed)
        .then(|| logs.last().map(FinalMetrics::of))
        .flatten();
    info!(trial_id, completed = status == TrialStatus::Completed, "trial finished");
    sink.emit(Event::TrialEnd {
        trial_id: trial_id.into(),
        status: status.clone(),
        final_metrics: final_metrics.clone(),
    })
    .map_err(io)?;
    Ok(TrialResult {
        trial_id: trial_id.into(),
        condition: plan.condition.clone(),
        seed,
        role_assignment: role_ids,
        stage_logs: logs,
        lessons,
        status,
        final_metrics,
    })
}
