use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::trial::{FinalMetrics, TrialStatus};
use crate::curriculum::Lesson;
use crate::game::{AbortInfo, GameSpec, Phase, RoundRecord, Tokens};
use crate::gateway::ChatExchange;

/// One line of a trial's JSONL stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    TrialStart {
        trial_id: String,
        condition: String,
        seed: u64,
        /// Agent id per player seat.
        role_assignment: Vec<String>,
        stages: Vec<GameSpec>,
    },
    StageStart {
        trial_id: String,
        stage_index: usize,
        spec: GameSpec,
        seats: Vec<String>,
        lessons: Vec<String>,
    },
    /// Messages sent to a model agent; `attempt` counts from 1.
    Prompt {
        trial_id: String,
        stage_index: usize,
        round: u32,
        phase: Phase,
        player: usize,
        agent_id: String,
        attempt: u32,
        system: String,
        user: String,
    },
    /// A model call. Player fields are absent for lesson generation.
    Exchange {
        trial_id: String,
        stage_index: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        round: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<Phase>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        player: Option<usize>,
        agent_id: String,
        attempt: u32,
        exchange: ChatExchange,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        parse_error: Option<String>,
    },
    Round {
        trial_id: String,
        stage_index: usize,
        record: RoundRecord,
    },
    Lesson {
        trial_id: String,
        lesson: Lesson,
        prompt: String,
    },
    StageEnd {
        trial_id: String,
        stage_index: usize,
        rounds_completed: u32,
        totals: Vec<Tokens>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        abort: Option<AbortInfo>,
    },
    TrialEnd {
        trial_id: String,
        status: TrialStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        final_metrics: Option<FinalMetrics>,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::TrialStart { .. } => "trial_start",
            Event::StageStart { .. } => "stage_start",
            Event::Prompt { .. } => "prompt",
            Event::Exchange { .. } => "exchange",
            Event::Round { .. } => "round",
            Event::Lesson { .. } => "lesson",
            Event::StageEnd { .. } => "stage_end",
            Event::TrialEnd { .. } => "trial_end",
        }
    }

    pub fn trial_id(&self) -> &str {
        match self {
            Event::TrialStart { trial_id, .. }
            | Event::StageStart { trial_id, .. }
            | Event::Prompt { trial_id, .. }
            | Event::Exchange { trial_id, .. }
            | Event::Round { trial_id, .. }
            | Event::Lesson { trial_id, .. }
            | Event::StageEnd { trial_id, .. }
            | Event::TrialEnd { trial_id, .. } => trial_id,
        }
    }
}

pub trait EventSink {
    fn emit(&mut self, event: Event) -> std::io::Result<()>;
}

/// Keeps events in memory.
#[derive(Debug, Default)]
pub struct VecSink(pub Vec<Event>);

impl EventSink for VecSink {
    fn emit(&mut self, event: Event) -> std::io::Result<()> {
        self.0.push(event);
        Ok(())
    }
}

/// Discards events.
#[derive(Debug, Default)]
pub struct NullSink;

impl EventSink for NullSink {
    fn emit(&mut self, _event: Event) -> std::io::Result<()> {
        Ok(())
    }
}

/// One JSON object per line.
pub struct JsonlSink<W: Write> {
    out: W,
}

impl JsonlSink<BufWriter<File>> {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        Ok(JsonlSink {
            out: BufWriter::new(File::create(path)?),
        })
    }
}

impl<W: Write> JsonlSink<W> {
    pub fn new(out: W) -> Self {
        JsonlSink { out }
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> EventSink for JsonlSink<W> {
    fn emit(&mut self, event: Event) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, &event)?;
        self.out.write_all(b"\n")
    }
}
