//! Metrics over completed game logs and CSV exports for reporting.
//!
//! Cooperation rate is the fraction of cooperative choices in binary games and
//! the mean contributed share of the endowment in public goods games. A trial's
//! payoff is the mean of its four players' final-stage totals; condition
//! statistics treat each trial as one sample.

mod export;
mod metrics;
mod stats;

pub use export::{
    condition_stats_csv, cooperation_csv, trajectory_csv, word_frequency_csv, CooperationStats, CONDITION_STATS_HEADER,
    COOPERATION_HEADER, TRAJECTORY_HEADER, WORD_FREQUENCY_HEADER,
};
pub use metrics::{
    average_player_payoff, contribution_trajectory, cooperation_by_round, cooperation_rate, word_frequency, RoundPoint,
    TrajectorySeries,
};
pub use stats::{
    ci95_half_width, compensated_sum, mean, payoff_stats, pct_vs_control, sample_std, t_critical_95, ConditionStats,
    SampleSummary,
};

use thiserror::Error;

use crate::game::GameKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("game log is aborted")]
    Aborted,
    #[error("no data")]
    Empty,
    #[error("logs do not share one game spec")]
    MixedSpecs,
    #[error("{0} has no broadcast words")]
    WrongGame(GameKind),
    #[error("export failed: {0}")]
    Io(String),
}
