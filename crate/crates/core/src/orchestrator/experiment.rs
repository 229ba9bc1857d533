use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::events::JsonlSink;
use super::pool::{AgentPool, Grouping};
use super::trial::{derive_seed, run_trial, trial_id, trial_seed, LessonSource, RunMode, TrialEnv, TrialPlan, TrialStatus};
use super::OrchestratorError;
use crate::curriculum::{build_condition_with, ConditionName, CurriculumError, StageRounds};
use crate::game::{GameKind, GameSpec};
use crate::gateway::{ModelEndpoint, Transport};

pub const TRIALS_DIR: &str = "trials";
pub const SUMMARY_FILE: &str = "summary.json";
pub const DEFAULT_TRIALS: usize = 30;
pub const DEFAULT_PILOT_ROUNDS: u32 = 3;

fn default_conditions() -> Vec<ConditionName> {
    ConditionName::ALL.to_vec()
}
fn default_trials() -> usize {
    DEFAULT_TRIALS
}
fn default_max_retries() -> u32 {
    3
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Replace one agent with a garbage-emitting mock in one trial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultInjection {
    pub condition: String,
    /// 0-based trial index within the condition.
    pub trial: usize,
    pub agent_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_conditions")]
    pub conditions: Vec<ConditionName>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Required when the scrambled condition runs; otherwise defaults to 0.
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub pool: AgentPool,
    #[serde(default)]
    pub lesson_source: LessonSource,
    /// Re-queries after an unusable reply before the game is aborted.
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub stage_rounds: StageRounds,
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Concurrent trials; the CPU count when absent.
    #[serde(default)]
    pub parallelism: Option<usize>,
    #[serde(default)]
    pub inject_garbage: Vec<FaultInjection>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, OrchestratorError> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| OrchestratorError::Config(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.trials == 0 {
            return Err(OrchestratorError::Config("trials must be at least 1".into()));
        }
        if self.parallelism == Some(0) {
            return Err(OrchestratorError::Config("parallelism must be at least 1".into()));
        }
        self.pool.validate()?;
        if let LessonSource::Model { endpoint } = &self.lesson_source {
            endpoint.validate().map_err(|e| OrchestratorError::Config(e.to_string()))?;
        }
        for f in &self.inject_garbage {
            if self.pool.get(&f.agent_id).is_none() {
                return Err(OrchestratorError::Config(format!("fault injection names unknown agent `{}`", f.agent_id)));
            }
        }
        Ok(())
    }

    /// Every model endpoint a run would call.
    pub fn endpoints(&self) -> Vec<&ModelEndpoint> {
        let mut out: Vec<&ModelEndpoint> = self.pool.agents.iter().filter_map(|a| a.endpoint()).collect();
        if let LessonSource::Model { endpoint } = &self.lesson_source {
            out.push(endpoint);
        }
        out
    }

    /// Fails if a live run would lack a key, before anything is played.
    pub fn preflight(&self) -> Result<(), OrchestratorError> {
        if self.mode == RunMode::Live {
            for ep in self.endpoints() {
                ep.read_api_key().map_err(OrchestratorError::Gateway)?;
            }
        }
        Ok(())
    }

    /// One entry per trial, conditions in order.
    pub fn curriculum_batch(&self) -> Result<Vec<BatchTrial>, OrchestratorError> {
        let needs_seed = self.conditions.contains(&ConditionName::Scrambled);
        let master = match (self.master_seed, needs_seed) {
            (Some(s), _) => s,
            (None, true) => return Err(OrchestratorError::Curriculum(CurriculumError::MissingSeed)),
            (None, false) => 0,
        };
        let mut out = Vec::new();
        for &name in &self.conditions {
            for idx in 0..self.trials {
                let seed = trial_seed(master, name.label(), idx);
                let scramble = (name == ConditionName::Scrambled).then(|| derive_seed(&[&seed.to_string(), "scramble"]));
                let condition =
                    build_condition_with(name, scramble, self.stage_rounds).map_err(OrchestratorError::Curriculum)?;
                out.push(BatchTrial {
                    trial_id: trial_id(name.label(), idx),
                    index: idx,
                    seed,
                    plan: TrialPlan::from_condition(&condition),
                });
            }
        }
        Ok(out)
    }

    pub fn pilot_batch(&self, pilot: &PilotSpec) -> Result<Vec<BatchTrial>, OrchestratorError> {
        pilot.validate()?;
        let label = pilot.label();
        let kind = if pilot.comm { GameKind::StagHuntComm } else { GameKind::StagHunt };
        let game = GameSpec::new(kind, pilot.rounds);
        game.validate().map_err(|e| OrchestratorError::Config(e.to_string()))?;
        let master = self.master_seed.unwrap_or(0);
        Ok((0..pilot.trials)
            .map(|idx| BatchTrial {
                trial_id: trial_id(&label, idx),
                index: idx,
                seed: trial_seed(master, &label, idx),
                plan: TrialPlan::single(&label, game.clone(), pilot.grouping),
            })
            .collect())
    }
}

/// Stag Hunt pilot settings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PilotSpec {
    pub comm: bool,
    pub grouping: Grouping,
    pub trials: usize,
    pub rounds: u32,
}

impl PilotSpec {
    pub fn label(&self) -> String {
        let g = match self.grouping {
            Grouping::Heterogeneous => "hetero",
            Grouping::Coalition => "coalition",
        };
        let c = if self.comm { "comm" } else { "no-comm" };
        format!("pilot-{g}-{c}")
    }

    fn validate(&self) -> Result<(), OrchestratorError> {
        if self.trials == 0 || self.rounds == 0 {
            return Err(OrchestratorError::Config("pilot trials and rounds must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchTrial {
    pub trial_id: String,
    pub index: usize,
    pub seed: u64,
    pub plan: TrialPlan,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbortedTrial {
    pub trial_id: String,
    pub reason: String,
    pub stage: usize,
    pub round: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSummary {
    pub condition: String,
    pub trials: usize,
    pub completed: usize,
    pub aborted: usize,
    pub aborted_trials: Vec<AbortedTrial>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSummary {
    pub master_seed: Option<u64>,
    pub mode: RunMode,
    pub trial_files: Vec<String>,
    pub conditions: Vec<ConditionSummary>,
}

fn check_seating(pool: &AgentPool, plan: &TrialPlan) -> Result<(), OrchestratorError> {
    let need = plan.seats_needed();
    match plan.grouping {
        Grouping::Heterogeneous if pool.agents.len() < need => Err(OrchestratorError::InsufficientPool {
            have: pool.agents.len(),
            need,
        }),
        Grouping::Coalition if pool.families().len() < 2 => Err(OrchestratorError::InsufficientFamilies {
            have: pool.families().len(),
        }),
        _ => Ok(()),
    }
}

pub fn trial_path(out_dir: &Path, trial_id: &str) -> PathBuf {
    out_dir.join(TRIALS_DIR).join(format!("{trial_id}.jsonl"))
}

/// Runs every trial of `batch` under `config`, writing one JSONL file per trial
/// and a summary. Aborted trials are counted, never fatal; configuration,
/// credential and I/O failures stop the batch.
pub fn run_batch(
    config: &ExperimentConfig,
    batch: &[BatchTrial],
    transport: Arc<dyn Transport>,
) -> Result<BatchSummary, OrchestratorError> {
    config.validate()?;
    for t in batch {
        check_seating(&config.pool, &t.plan)?;
    }
    config.preflight()?;
    let io = |what: &Path| {
        let what = what.display().to_string();
        move |e: std::io::Error| OrchestratorError::Io(format!("{what}: {e}"))
    };
    let trials_dir = config.out_dir.join(TRIALS_DIR);
    fs::create_dir_all(&trials_dir).map_err(io(&trials_dir))?;
    let env = TrialEnv {
        max_retries: config.max_retries,
        lesson_source: config.lesson_source.clone(),
        ..TrialEnv::new(config.mode, transport)
    };
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism.unwrap_or(0))
        .build()
        .map_err(|e| OrchestratorError::Config(e.to_string()))?;
    let outcomes: Vec<Result<TrialStatus, OrchestratorError>> = threads.install(|| {
        batch
            .par_iter()
            .map(|t| {
                let garbage: BTreeSet<String> = config
                    .inject_garbage
                    .iter()
                    .filter(|f| f.condition == t.plan.condition && f.trial == t.index)
                    .map(|f| f.agent_id.clone())
                    .collect();
                let path = trial_path(&config.out_dir, &t.trial_id);
                let mut sink = JsonlSink::create(&path).map_err(io(&path))?;
                let result = run_trial(&t.trial_id, &t.plan, &config.pool, t.seed, &garbage, &env, &mut sink)?;
                sink.finish().map_err(io(&path))?;
                Ok(result.status)
            })
            .collect()
    });

    let mut conditions: Vec<ConditionSummary> = Vec::new();
    let mut trial_files = Vec::new();
    for (t, outcome) in batch.iter().zip(outcomes) {
        let status = outcome?;
        trial_files.push(format!("{TRIALS_DIR}/{}.jsonl", t.trial_id));
        let pos = match conditions.iter().position(|c| c.condition == t.plan.condition) {
            Some(p) => p,
            None => {
                conditions.push(ConditionSummary {
                    condition: t.plan.condition.clone(),
                    trials: 0,
                    completed: 0,
                    aborted: 0,
                    aborted_trials: Vec::new(),
                });
                conditions.len() - 1
            }
        };
        let c = &mut conditions[pos];
        c.trials += 1;
        match status {
            TrialStatus::Completed => c.completed += 1,
            TrialStatus::Aborted { reason, stage, round, .. } => {
                c.aborted += 1;
                c.aborted_trials.push(AbortedTrial {
                    trial_id: t.trial_id.clone(),
                    reason,
                    stage,
                    round,
                });
            }
        }
    }
    let summary = BatchSummary {
        master_seed: config.master_seed,
        mode: config.mode,
        trial_files,
        conditions,
    };
    let path = config.out_dir.join(SUMMARY_FILE);
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| OrchestratorError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(io(&path))?;
    Ok(summary)
}

pub fn run_experiment(config: &ExperimentConfig, transport: Arc<dyn Transport>) -> Result<BatchSummary, OrchestratorError> {
    let batch = config.curriculum_batch()?;
    run_batch(config, &batch, transport)
}

pub fn run_pilot(
    config: &ExperimentConfig,
    pilot: &PilotSpec,
    transport: Arc<dyn Transport>,
) -> Result<BatchSummary, OrchestratorError> {
    let batch = config.pilot_batch(pilot)?;
    run_batch(config, &batch, transport)
}
