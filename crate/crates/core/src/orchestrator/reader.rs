use std::fs;
use std::path::{Path, PathBuf};

use super::events::Event;
use super::experiment::TRIALS_DIR;
use super::trial::{FinalMetrics, TrialResult, TrialStatus};
use super::OrchestratorError;
use crate::curriculum::Lesson;
use crate::game::{GameLog, GameSpec, RoundRecord};

/// A problem found in a trial file. `line` counts from 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub file: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{l}: {}", self.file.display(), self.message),
            None => write!(f, "{}: {}", self.file.display(), self.message),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub files_checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Trial files under `dir/trials`, or directly in `dir`, in name order.
pub fn trial_files(dir: &Path) -> Result<Vec<PathBuf>, OrchestratorError> {
    let nested = dir.join(TRIALS_DIR);
    let root = if nested.is_dir() { nested } else { dir.to_path_buf() };
    let entries = fs::read_dir(&root).map_err(|e| OrchestratorError::Io(format!("{}: {e}", root.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| OrchestratorError::Io(e.to_string()))?.path();
        if path.extension().is_some_and(|x| x == "jsonl") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Parses one line per event; stops at the first unparseable line.
fn parse_events(file: &Path, text: &str, out: &mut Vec<Violation>) -> Vec<(usize, Event)> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        match serde_json::from_str::<Event>(line) {
            Ok(e) => events.push((i + 1, e)),
            Err(e) => {
                out.push(Violation {
                    file: file.to_path_buf(),
                    line: Some(i + 1),
                    message: format!("invalid event (column {}): {e}", e.column()),
                });
                return events;
            }
        }
    }
    if !text.is_empty() && !text.ends_with('\n') {
        out.push(Violation {
            file: file.to_path_buf(),
            line: Some(text.lines().count()),
            message: "file does not end with a newline".into(),
        });
    }
    events
}

struct StageBuild {
    spec: GameSpec,
    stage_index: usize,
    rounds: Vec<RoundRecord>,
    closed: bool,
}

/// Rebuilds a trial from its events, checking structure and recomputing every payoff.
fn replay(file: &Path, events: &[(usize, Event)], out: &mut Vec<Violation>) -> Option<TrialResult> {
    let mut flag = |line: usize, message: String| {
        out.push(Violation {
            file: file.to_path_buf(),
            line: Some(line),
            message,
        })
    };
    let Some((_, Event::TrialStart { trial_id, condition, seed, role_assignment, stages })) = events.first() else {
        flag(1, "first event must be trial_start".into());
        return None;
    };
    let mut logs: Vec<GameLog> = Vec::new();
    let mut lessons: Vec<Lesson> = Vec::new();
    let mut current: Option<StageBuild> = None;
    let mut end: Option<(TrialStatus, Option<FinalMetrics>)> = None;
    for (line, event) in &events[1..] {
        let line = *line;
        if event.trial_id() != trial_id {
            flag(line, format!("trial id `{}` differs from `{trial_id}`", event.trial_id()));
        }
        if end.is_some() {
            flag(line, format!("{} after trial_end", event.kind()));
            continue;
        }
        match event {
            Event::TrialStart { .. } => flag(line, "repeated trial_start".into()),
            Event::StageStart { stage_index, spec, .. } => {
                if current.as_ref().is_some_and(|c| !c.closed) {
                    flag(line, "stage_start before the previous stage ended".into());
                }
                let expected = logs.len() + 1;
                if *stage_index != expected {
                    flag(line, format!("stage {stage_index} where stage {expected} was expected"));
                }
                if stages.get(expected - 1) != Some(spec) {
                    flag(line, format!("stage {stage_index} spec differs from the trial plan"));
                }
                current = Some(StageBuild {
                    spec: spec.clone(),
                    stage_index: *stage_index,
                    rounds: Vec::new(),
                    closed: false,
                });
            }
            Event::Prompt { stage_index, .. } | Event::Exchange { stage_index, .. } => {
                if current.as_ref().is_none_or(|c| c.stage_index != *stage_index) {
                    flag(line, format!("{} outside stage {stage_index}", event.kind()));
                }
            }
            Event::Round { stage_index, record, .. } => match current.as_mut() {
                Some(c) if c.stage_index == *stage_index && !c.closed => {
                    let expected = c.rounds.len() as u32 + 1;
                    if record.round != expected {
                        flag(line, format!("round {} where round {expected} was expected", record.round));
                    }
                    c.rounds.push(record.clone());
                }
                _ => flag(line, format!("round outside stage {stage_index}")),
            },
            Event::StageEnd { stage_index, rounds_completed, totals, abort, .. } => match current.as_mut() {
                Some(c) if c.stage_index == *stage_index && !c.closed => {
                    c.closed = true;
                    if *rounds_completed as usize != c.rounds.len() {
                        flag(line, format!("stage_end reports {rounds_completed} rounds, {} recorded", c.rounds.len()));
                    }
                    let log = GameLog {
                        spec: c.spec.clone(),
                        rounds: c.rounds.clone(),
                        totals: totals.clone(),
                        abort: abort.clone(),
                    };
                    if abort.is_none() && !log.is_complete() {
                        flag(line, format!("stage {stage_index} ended early without an abort"));
                    }
                    if let Err(m) = log.verify() {
                        flag(line, format!("trial {trial_id} stage {stage_index} round {}: {}", m.round, m.detail));
                    }
                    logs.push(log);
                }
                _ => flag(line, format!("stage_end outside stage {stage_index}")),
            },
            Event::Lesson { lesson, .. } => {
                if lesson.text.trim().is_empty() {
                    flag(line, "empty lesson".into());
                }
                if lesson.stage_index != logs.len() || current.as_ref().is_some_and(|c| !c.closed) {
                    flag(line, format!("lesson for stage {} out of place", lesson.stage_index));
                }
                lessons.push(lesson.clone());
            }
            Event::TrialEnd { status, final_metrics, .. } => {
                match status {
                    TrialStatus::Completed => {
                        if logs.len() != stages.len() || logs.iter().any(|l| !l.is_complete()) {
                            flag(line, "completed trial is missing stages".into());
                        }
                        if lessons.len() + 1 != stages.len() {
                            flag(line, format!("{} lessons for {} stages", lessons.len(), stages.len()));
                        }
                        match (logs.last(), final_metrics) {
                            (Some(log), Some(m)) => {
                                let expect = FinalMetrics::of(log);
                                if m.totals != expect.totals
                                    || (m.avg_payoff - expect.avg_payoff).abs() > 1e-9
                                    || (m.cooperation_rate - expect.cooperation_rate).abs() > 1e-9
                                {
                                    flag(line, "final metrics do not match the target stage".into());
                                }
                            }
                            _ => flag(line, "completed trial without final metrics".into()),
                        }
                    }
                    TrialStatus::Aborted { stage, .. } => {
                        if *stage != logs.len() {
                            flag(line, format!("aborted at stage {stage} but {} stages logged", logs.len()));
                        }
                    }
                }
                end = Some((status.clone(), final_metrics.clone()));
            }
        }
    }
    let Some((status, final_metrics)) = end else {
        let last = events.last().map_or(1, |(l, _)| *l);
        flag(last, "missing trial_end".into());
        return None;
    };
    Some(TrialResult {
        trial_id: trial_id.clone(),
        condition: condition.clone(),
        seed: *seed,
        role_assignment: role_assignment.clone(),
        stage_logs: logs,
        lessons,
        status,
        final_metrics,
    })
}

/// Reads and checks one trial file.
pub fn check_trial_file(path: &Path) -> (Option<TrialResult>, Vec<Violation>) {
    let mut violations = Vec::new();
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            violations.push(Violation {
                file: path.to_path_buf(),
                line: None,
                message: e.to_string(),
            });
            return (None, violations);
        }
    };
    let events = parse_events(path, &text, &mut violations);
    if events.is_empty() {
        if violations.is_empty() {
            violations.push(Violation {
                file: path.to_path_buf(),
                line: None,
                message: "no events".into(),
            });
        }
        return (None, violations);
    }
    let trial = replay(path, &events, &mut violations);
    (trial, violations)
}

pub fn validate_dir(dir: &Path) -> Result<ValidationReport, OrchestratorError> {
    let mut report = ValidationReport::default();
    for file in trial_files(dir)? {
        report.files_checked += 1;
        report.violations.extend(check_trial_file(&file).1);
    }
    Ok(report)
}

/// Loads every trial under `dir`; any violation is an error.
pub fn load_trials(dir: &Path) -> Result<Vec<TrialResult>, OrchestratorError> {
    let mut trials = Vec::new();
    for file in trial_files(dir)? {
        let (trial, violations) = check_trial_file(&file);
        if let Some(v) = violations.first() {
            return Err(OrchestratorError::InvalidLog(v.to_string()));
        }
        trials.extend(trial);
    }
    Ok(trials)
}
