use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tracing::{debug, warn};

use super::events::{Event, EventSink};
use super::OrchestratorError;
use crate::agent::{parse_response, prepend_lessons, scripted_decide, Observation, PromptTemplate, StrategySpec, TemplateId};
use crate::game::{AbortInfo, ActionRecord, GameLog, GameSpec, GameState, Phase};
use crate::gateway::{ChatClient, GatewayError};

pub const PLAYER_SYSTEM_PROMPT: &str =
    "You are a strategic player in a multi-round economic game. Think step by step, then give your final action in the requested JSON format.";

/// Appended to the unchanged prompt when a reply could not be used.
pub fn format_reminder(problem: &str) -> String {
    format!(
        "FORMAT REMINDER: your previous reply could not be used ({problem}). Respond with your reasoning and a single \
         JSON object with \"reasoning\" and \"action\" keys, using exactly the action format described above."
    )
}

pub enum SeatDecider {
    Scripted { strategies: Vec<StrategySpec>, rng: ChaCha8Rng },
    Model(Box<ChatClient>),
}

/// An agent occupying one player position for one game.
pub struct Seat {
    pub agent_id: String,
    pub decider: SeatDecider,
}

impl Seat {
    pub fn scripted(agent_id: &str, strategies: Vec<StrategySpec>, seed: u64) -> Self {
        Seat {
            agent_id: agent_id.into(),
            decider: SeatDecider::Scripted {
                strategies,
                rng: ChaCha8Rng::seed_from_u64(seed),
            },
        }
    }

    pub fn model(agent_id: &str, client: ChatClient) -> Self {
        Seat {
            agent_id: agent_id.into(),
            decider: SeatDecider::Model(Box::new(client)),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GameContext<'a> {
    pub trial_id: &'a str,
    pub stage_index: usize,
    /// Lesson texts shown to every seat.
    pub lessons: &'a [String],
    /// Re-queries after an unusable reply; a seat gets `max_retries + 1` attempts.
    pub max_retries: u32,
}

enum Failure {
    Abort(String),
    Fatal(GatewayError),
}

struct Decision {
    action: Result<ActionRecord, Failure>,
    events: Vec<Event>,
}

fn decide(seat: &mut Seat, obs: &Observation, ctx: &GameContext<'_>) -> Decision {
    let mut events = Vec::new();
    let action = match &mut seat.decider {
        SeatDecider::Scripted { strategies, rng } => match strategies.iter().find(|s| s.applies_to(obs.phase)) {
            Some(s) => scripted_decide(s, obs, rng).map_err(|e| Failure::Abort(e.to_string())),
            None => Err(Failure::Abort(format!("no strategy for the {} phase", obs.phase))),
        },
        SeatDecider::Model(client) => query_model(client, &seat.agent_id, obs, ctx, &mut events),
    };
    Decision { action, events }
}

fn query_model(
    client: &mut ChatClient,
    agent_id: &str,
    obs: &Observation,
    ctx: &GameContext<'_>,
    events: &mut Vec<Event>,
) -> Result<ActionRecord, Failure> {
    let id = TemplateId::for_phase(obs.spec.kind, obs.phase)
        .ok_or_else(|| Failure::Abort(format!("no prompt for {} / {}", obs.spec.kind, obs.phase)))?;
    let user = PromptTemplate::builtin(id)
        .render(&obs.placeholder_values())
        .map_err(|e| Failure::Abort(e.to_string()))?;
    let system = prepend_lessons(ctx.lessons, PLAYER_SYSTEM_PROMPT);
    let mut problem: Option<String> = None;
    for attempt in 1..=ctx.max_retries + 1 {
        let message = match &problem {
            None => user.clone(),
            Some(p) => format!("{user}\n\n{}", format_reminder(p)),
        };
        events.push(Event::Prompt {
            trial_id: ctx.trial_id.into(),
            stage_index: ctx.stage_index,
            round: obs.round,
            phase: obs.phase,
            player: obs.player,
            agent_id: agent_id.into(),
            attempt,
            system: system.clone(),
            user: message.clone(),
        });
        let reply = client.chat_complete(&system, &message);
        let parsed = reply.as_ref().ok().map(|text| {
            parse_response(text, obs.phase, &obs.spec)
                .map_err(|e| e.to_string())
                .and_then(|a| a.validate_for(obs.player, &obs.spec).map(|_| a).map_err(|e| e.to_string()))
        });
        for exchange in client.take_exchanges() {
            events.push(Event::Exchange {
                trial_id: ctx.trial_id.into(),
                stage_index: ctx.stage_index,
                round: Some(obs.round),
                phase: Some(obs.phase),
                player: Some(obs.player),
                agent_id: agent_id.into(),
                attempt,
                exchange,
                parse_error: parsed.as_ref().and_then(|p| p.as_ref().err().cloned()),
            });
        }
        match (reply, parsed) {
            (Err(e), _) if e.is_auth() => return Err(Failure::Fatal(e)),
            (Err(e), _) => return Err(Failure::Abort(format!("model call failed: {e}"))),
            (Ok(_), Some(Ok(action))) => return Ok(action),
            (Ok(_), Some(Err(p))) => {
                debug!(agent_id, attempt, "unusable reply: {p}");
                problem = Some(p);
            }
            (Ok(_), None) => unreachable!("parsed whenever the reply is Ok"),
        }
    }
    Err(Failure::Abort(format!(
        "no valid action after {} attempts: {}",
        ctx.max_retries + 1,
        problem.unwrap_or_default()
    )))
}

/// Plays one game to completion or abort. Every seat sees the same history
/// prefix within a phase; decisions are joined before resolution.
pub fn run_game(
    spec: &GameSpec,
    seats: &mut [Seat],
    ctx: &GameContext<'_>,
    sink: &mut dyn EventSink,
) -> Result<GameLog, OrchestratorError> {
    let mut state = GameState::new(spec.clone()).map_err(|e| OrchestratorError::Config(e.to_string()))?;
    if seats.len() != spec.n_players {
        return Err(OrchestratorError::Config(format!(
            "{} seats for a {}-player game",
            seats.len(),
            spec.n_players
        )));
    }
    let io = |e: std::io::Error| OrchestratorError::Io(e.to_string());
    while let Some(phase) = state.current_phase() {
        let round = state.round_index();
        let observations: Vec<Observation> = (0..spec.n_players)
            .map(|p| Observation::from_state(&state, p, ctx.lessons).expect("game not terminal"))
            .collect();
        let decisions: Vec<Decision> = seats
            .par_iter_mut()
            .zip(observations.par_iter())
            .map(|(seat, obs)| decide(seat, obs, ctx))
            .collect();
        let mut actions = Vec::with_capacity(spec.n_players);
        let mut failure = None;
        for (player, d) in decisions.into_iter().enumerate() {
            for e in d.events {
                sink.emit(e).map_err(io)?;
            }
            match d.action {
                Ok(a) => actions.push(a),
                Err(Failure::Fatal(e)) => return Err(OrchestratorError::Gateway(e)),
                Err(Failure::Abort(cause)) => {
                    failure.get_or_insert((player, cause));
                }
            }
        }
        if let Some((player, cause)) = failure {
            abort(&mut state, round, phase, Some((player, seats[player].agent_id.clone())), cause);
            break;
        }
        match state.step(phase, actions) {
            Ok(Some(record)) => sink
                .emit(Event::Round {
                    trial_id: ctx.trial_id.into(),
                    stage_index: ctx.stage_index,
                    record,
                })
                .map_err(io)?,
            Ok(None) => {}
            Err(e) => {
                abort(&mut state, round, phase, None, e.to_string());
                break;
            }
        }
    }
    Ok(state.into_log())
}

fn abort(state: &mut GameState, round: u32, phase: Phase, who: Option<(usize, String)>, cause: String) {
    warn!(round, %phase, "game aborted: {cause}");
    let (player, agent_id) = who.map_or((None, None), |(p, a)| (Some(p), Some(a)));
    state.abort(AbortInfo {
        round,
        phase,
        player,
        agent_id,
        cause,
    });
}
