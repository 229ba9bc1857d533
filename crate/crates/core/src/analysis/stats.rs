use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::AnalysisError;

/// Neumaier-compensated sum; the result does not depend on summation order beyond rounding of the total.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(compensated_sum(values.iter().copied()) / values.len() as f64)
    }
}

/// Sample standard deviation (n - 1 denominator); needs at least two values.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss = compensated_sum(values.iter().map(|v| (v - m) * (v - m)));
    Some((ss / (values.len() - 1) as f64).sqrt())
}

/// Two-sided 95% Student-t critical value with `dof` degrees of freedom.
pub fn t_critical_95(dof: usize) -> Option<f64> {
    if dof == 0 {
        return None;
    }
    let t = StudentsT::new(0.0, 1.0, dof as f64).ok()?;
    Some(t.inverse_cdf(0.975))
}

/// Half-width of the 95% t interval around the mean.
pub fn ci95_half_width(values: &[f64]) -> Option<f64> {
    let s = sample_std(values)?;
    let n = values.len();
    Some(t_critical_95(n - 1)? * s / (n as f64).sqrt())
}

/// Mean, sample std and CI of a set of samples. Std and CI are `None` below two samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub std: Option<f64>,
    pub ci95: Option<f64>,
}

impl SampleSummary {
    pub fn of(values: &[f64]) -> Result<Self, AnalysisError> {
        let mean = mean(values).ok_or(AnalysisError::Empty)?;
        Ok(SampleSummary {
            n: values.len(),
            mean,
            std: sample_std(values),
            ci95: ci95_half_width(values),
        })
    }
}

pub fn pct_vs_control(mean: f64, control_mean: f64) -> f64 {
    100.0 * (mean - control_mean) / control_mean
}

/// One row of the condition comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionStats {
    pub condition: String,
    pub n_completed: usize,
    pub mean_payoff: f64,
    pub std_payoff: Option<f64>,
    pub ci95_half_width: Option<f64>,
    /// Undefined for the control row itself.
    pub pct_vs_control: Option<f64>,
}

/// Summarizes per-trial payoffs (each the mean of that trial's final player totals).
pub fn payoff_stats(condition: &str, per_trial: &[f64], control_mean: Option<f64>) -> Result<ConditionStats, AnalysisError> {
    let s = SampleSummary::of(per_trial)?;
    Ok(ConditionStats {
        condition: condition.to_string(),
        n_completed: s.n,
        mean_payoff: s.mean,
        std_payoff: s.std,
        ci95_half_width: s.ci95,
        pct_vs_control: control_mean.map(|c| pct_vs_control(s.mean, c)),
    })
}
