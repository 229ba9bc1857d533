use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::trial::TrialResult;
use super::OrchestratorError;
use crate::analysis::{
    condition_stats_csv, contribution_trajectory, cooperation_csv, cooperation_rate, payoff_stats, trajectory_csv,
    word_frequency, word_frequency_csv, AnalysisError, ConditionStats, CooperationStats, SampleSummary, TrajectorySeries,
};
use crate::curriculum::ConditionName;
use crate::game::{GameKind, GameLog};

pub const CONDITION_STATS_FILE: &str = "condition_stats.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const COOPERATION_FILE: &str = "cooperation.csv";
pub const WORD_FREQUENCY_FILE: &str = "word_frequency.csv";
pub const ANALYSIS_JSON_FILE: &str = "analysis.json";
pub const TRIALS_CSV_FILE: &str = "trials.csv";
pub const TRIAL_TRAJECTORY_FILE: &str = "trial_trajectories.csv";

const CONTROL: &str = "control";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionCounts {
    pub condition: String,
    pub trials: usize,
    pub n_completed: usize,
    pub n_aborted: usize,
}

/// Everything `analyze` reports over a set of trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub counts: Vec<ConditionCounts>,
    pub condition_stats: Vec<ConditionStats>,
    pub cooperation: Vec<CooperationStats>,
    pub trajectories: Vec<TrajectorySeries>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub word_frequency: BTreeMap<String, u64>,
}

const TABLE_ORDER: [ConditionName; 4] = [
    ConditionName::Control,
    ConditionName::DirectPrecursor,
    ConditionName::Scrambled,
    ConditionName::FullCurriculum,
];

/// Curriculum conditions first, control leading, then others by name.
fn condition_order(label: &str) -> (usize, String) {
    let rank = TABLE_ORDER
        .iter()
        .position(|c| c.label() == label)
        .unwrap_or(TABLE_ORDER.len());
    (rank, label.to_string())
}

fn analysis_err(e: AnalysisError) -> OrchestratorError {
    OrchestratorError::InvalidLog(e.to_string())
}

/// Aborted trials are counted but excluded from every statistic.
pub fn analyze_trials(trials: &[TrialResult]) -> Result<AnalysisReport, OrchestratorError> {
    let mut groups: BTreeMap<(usize, String), Vec<&TrialResult>> = BTreeMap::new();
    for t in trials {
        groups.entry(condition_order(&t.condition)).or_default().push(t);
    }
    let completed: Vec<(&str, Vec<&GameLog>)> = groups
        .iter()
        .map(|((_, name), ts)| (name.as_str(), ts.iter().filter_map(|t| t.target_log()).collect()))
        .collect();
    if completed.iter().all(|(_, logs)| logs.is_empty()) {
        return Err(OrchestratorError::NoCompletedTrials);
    }
    let counts = groups
        .iter()
        .map(|((_, name), ts)| {
            let done = ts.iter().filter(|t| t.is_completed()).count();
            ConditionCounts {
                condition: name.clone(),
                trials: ts.len(),
                n_completed: done,
                n_aborted: ts.len() - done,
            }
        })
        .collect();

    let payoffs = |logs: &[&GameLog]| -> Vec<f64> { logs.iter().map(|l| crate::analysis::average_player_payoff(l)).collect() };
    let control_mean = completed
        .iter()
        .find(|(name, logs)| *name == CONTROL && !logs.is_empty())
        .map(|(_, logs)| crate::analysis::mean(&payoffs(logs)).expect("non-empty"));

    let mut condition_stats = Vec::new();
    let mut cooperation = Vec::new();
    let mut trajectories = Vec::new();
    let mut comm_logs = Vec::new();
    for (name, logs) in &completed {
        if logs.is_empty() {
            continue;
        }
        let reference = if *name == CONTROL { None } else { control_mean };
        condition_stats.push(payoff_stats(name, &payoffs(logs), reference).map_err(analysis_err)?);
        let rates: Vec<f64> = logs
            .iter()
            .map(|l| cooperation_rate(l).map(|r| 100.0 * r))
            .collect::<Result<_, _>>()
            .map_err(analysis_err)?;
        let s = SampleSummary::of(&rates).map_err(analysis_err)?;
        cooperation.push(CooperationStats {
            condition: name.to_string(),
            n: s.n,
            cooperation_pct: s.mean,
            std_pct: s.std,
            ci95_pct: s.ci95,
        });
        trajectories.push(contribution_trajectory(name, logs).map_err(analysis_err)?);
        comm_logs.extend(logs.iter().copied().filter(|l| l.spec.kind == GameKind::StagHuntComm));
    }
    let word_frequency = if comm_logs.is_empty() {
        BTreeMap::new()
    } else {
        word_frequency(&comm_logs).map_err(analysis_err)?
    };
    Ok(AnalysisReport {
        counts,
        condition_stats,
        cooperation,
        trajectories,
        word_frequency,
    })
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, OrchestratorError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| OrchestratorError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Writes the report CSVs and `analysis.json`; returns the files written.
pub fn write_analysis(report: &AnalysisReport, out_dir: &Path) -> Result<Vec<PathBuf>, OrchestratorError> {
    fs::create_dir_all(out_dir).map_err(|e| OrchestratorError::Io(format!("{}: {e}", out_dir.display())))?;
    let csv_err = |e: AnalysisError| OrchestratorError::Io(e.to_string());
    let mut files = vec![
        write(out_dir, CONDITION_STATS_FILE, &condition_stats_csv(&report.condition_stats).map_err(csv_err)?)?,
        write(out_dir, TRAJECTORY_FILE, &trajectory_csv(&report.trajectories).map_err(csv_err)?)?,
        write(out_dir, COOPERATION_FILE, &cooperation_csv(&report.cooperation).map_err(csv_err)?)?,
    ];
    if !report.word_frequency.is_empty() {
        files.push(write(out_dir, WORD_FREQUENCY_FILE, &word_frequency_csv(&report.word_frequency).map_err(csv_err)?)?);
    }
    let mut json = serde_json::to_string_pretty(report).map_err(|e| OrchestratorError::Io(e.to_string()))?;
    json.push('\n');
    files.push(write(out_dir, ANALYSIS_JSON_FILE, json.as_bytes())?);
    Ok(files)
}

/// Per-trial rows for plotting individual runs: `trials.csv`
/// (trial_id,condition,status,stages,avg_payoff,cooperation_pct) and
/// `trial_trajectories.csv` (trial_id,condition,round,mean).
pub fn write_trial_exports(trials: &[TrialResult], out_dir: &Path) -> Result<Vec<PathBuf>, OrchestratorError> {
    fs::create_dir_all(out_dir).map_err(|e| OrchestratorError::Io(format!("{}: {e}", out_dir.display())))?;
    let csv_err = |e: csv::Error| OrchestratorError::Io(e.to_string());
    let mut summary = csv::Writer::from_writer(Vec::new());
    summary
        .write_record(["trial_id", "condition", "status", "stages", "avg_payoff", "cooperation_pct"])
        .map_err(csv_err)?;
    let mut rounds = csv::Writer::from_writer(Vec::new());
    rounds.write_record(["trial_id", "condition", "round", "mean"]).map_err(csv_err)?;
    for t in trials {
        let (status, payoff, coop) = match &t.final_metrics {
            Some(m) if t.is_completed() => (
                "completed",
                format!("{:.1}", m.avg_payoff),
                format!("{:.1}", 100.0 * m.cooperation_rate),
            ),
            _ => ("aborted", String::new(), String::new()),
        };
        summary
            .write_record([
                t.trial_id.as_str(),
                t.condition.as_str(),
                status,
                &t.stage_logs.len().to_string(),
                &payoff,
                &coop,
            ])
            .map_err(csv_err)?;
        if let Some(log) = t.target_log() {
            let series = contribution_trajectory(&t.condition, &[log]).map_err(analysis_err)?;
            for p in series.points {
                rounds
                    .write_record([&t.trial_id, &t.condition, &p.round.to_string(), &format!("{:.1}", p.mean)])
                    .map_err(csv_err)?;
            }
        }
    }
    let bytes = |w: csv::Writer<Vec<u8>>| w.into_inner().map_err(|e| OrchestratorError::Io(e.to_string()));
    Ok(vec![
        write(out_dir, TRIALS_CSV_FILE, &bytes(summary)?)?,
        write(out_dir, TRIAL_TRAJECTORY_FILE, &bytes(rounds)?)?,
    ])
}
