//! Games, trials and batches: seating, agent queries with retries, failure
//! accounting and JSONL persistence.
//!
//! Each trial is written as one JSONL stream. Every line is an object whose
//! `kind` is one of `trial_start`, `stage_start`, `prompt`, `exchange`,
//! `round`, `lesson`, `stage_end` or `trial_end` (see [`Event`]). A batch also
//! writes `summary.json` with completed and aborted counts per condition.

mod analyze;
mod events;
mod experiment;
mod pool;
mod reader;
mod runner;
mod trial;

pub use analyze::{
    analyze_trials, write_analysis, write_trial_exports, AnalysisReport, ConditionCounts, ANALYSIS_JSON_FILE,
    CONDITION_STATS_FILE, COOPERATION_FILE, TRAJECTORY_FILE, TRIALS_CSV_FILE, TRIAL_TRAJECTORY_FILE, WORD_FREQUENCY_FILE,
};
pub use events::{Event, EventSink, JsonlSink, NullSink, VecSink};
pub use experiment::{
    run_batch, run_experiment, run_pilot, trial_path, AbortedTrial, BatchSummary, BatchTrial, ConditionSummary,
    ExperimentConfig, FaultInjection, PilotSpec, DEFAULT_PILOT_ROUNDS, DEFAULT_TRIALS, SUMMARY_FILE, TRIALS_DIR,
};
pub use pool::{
    assign_roles, coalition_roles, seat_agents, AgentPool, AgentSpec, Decider, Grouping, DEFAULT_LESSON_MODEL,
    DEFAULT_MODELS,
};
pub use reader::{check_trial_file, load_trials, trial_files, validate_dir, ValidationReport, Violation};
pub use runner::{format_reminder, run_game, GameContext, Seat, SeatDecider, PLAYER_SYSTEM_PROMPT};
pub use trial::{
    derive_seed, run_trial, trial_id, trial_seed, FinalMetrics, LessonSource, RunMode, TrialEnv, TrialPlan, TrialResult,
    TrialStatus,
};

use thiserror::Error;

use crate::curriculum::CurriculumError;
use crate::gateway::GatewayError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrchestratorError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("agent pool has {have} agents, {need} needed")]
    InsufficientPool { have: usize, need: usize },
    #[error("coalition seating needs at least 2 model families, pool has {have}")]
    InsufficientFamilies { have: usize },
    #[error(transparent)]
    Curriculum(CurriculumError),
    #[error(transparent)]
    Gateway(GatewayError),
    #[error("I/O: {0}")]
    Io(String),
    #[error("invalid trial log: {0}")]
    InvalidLog(String),
    #[error("zero completed trials to analyze")]
    NoCompletedTrials,
}
