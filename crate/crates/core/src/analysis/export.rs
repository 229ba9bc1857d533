//! CSV renderings with a fixed column order and explicit precision.

use std::collections::BTreeMap;

use super::metrics::TrajectorySeries;
use super::stats::ConditionStats;
use super::AnalysisError;

pub const CONDITION_STATS_HEADER: [&str; 6] = ["condition", "n", "mean", "std", "ci95", "pct_vs_control"];
pub const TRAJECTORY_HEADER: [&str; 6] = ["condition", "round", "mean", "std", "ci95", "n"];
pub const WORD_FREQUENCY_HEADER: [&str; 2] = ["word", "count"];
pub const COOPERATION_HEADER: [&str; 5] = ["condition", "n", "cooperation_pct", "std", "ci95"];

fn fixed(v: f64, decimals: usize) -> String {
    // avoid "-0.0"
    let s = format!("{v:.decimals$}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map(|x| fixed(x, decimals)).unwrap_or_default()
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, AnalysisError> {
    writer.into_inner().map_err(|e| AnalysisError::Io(e.to_string()))
}

fn write_row<const N: usize>(w: &mut csv::Writer<Vec<u8>>, row: [String; N]) -> Result<(), AnalysisError> {
    w.write_record(row).map_err(|e| AnalysisError::Io(e.to_string()))
}

/// `condition,n,mean,std,ci95,pct_vs_control`; payoffs and percentages at 1 decimal, CI at 2.
pub fn condition_stats_csv(stats: &[ConditionStats]) -> Result<Vec<u8>, AnalysisError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_row(&mut w, CONDITION_STATS_HEADER.map(String::from))?;
    for s in stats {
        write_row(
            &mut w,
            [
                s.condition.clone(),
                s.n_completed.to_string(),
                fixed(s.mean_payoff, 1),
                opt(s.std_payoff, 1),
                opt(s.ci95_half_width, 2),
                opt(s.pct_vs_control, 1),
            ],
        )?;
    }
    finish(w)
}

/// `condition,round,mean,std,ci95,n`, one row per round.
pub fn trajectory_csv(series: &[TrajectorySeries]) -> Result<Vec<u8>, AnalysisError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_row(&mut w, TRAJECTORY_HEADER.map(String::from))?;
    for s in series {
        for p in &s.points {
            write_row(
                &mut w,
                [
                    s.condition.clone(),
                    p.round.to_string(),
                    fixed(p.mean, 1),
                    opt(p.std, 1),
                    opt(p.ci95, 2),
                    p.n.to_string(),
                ],
            )?;
        }
    }
    finish(w)
}

/// `word,count`, most frequent first, ties alphabetical.
pub fn word_frequency_csv(counts: &BTreeMap<String, u64>) -> Result<Vec<u8>, AnalysisError> {
    let mut rows: Vec<(&String, &u64)> = counts.iter().collect();
    rows.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    let mut w = csv::Writer::from_writer(Vec::new());
    write_row(&mut w, WORD_FREQUENCY_HEADER.map(String::from))?;
    for (word, count) in rows {
        write_row(&mut w, [word.clone(), count.to_string()])?;
    }
    finish(w)
}

/// Per-condition cooperation rate, from per-trial rates in `[0, 1]`; rendered as percentages.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CooperationStats {
    pub condition: String,
    pub n: usize,
    pub cooperation_pct: f64,
    pub std_pct: Option<f64>,
    pub ci95_pct: Option<f64>,
}

pub fn cooperation_csv(stats: &[CooperationStats]) -> Result<Vec<u8>, AnalysisError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_row(&mut w, COOPERATION_HEADER.map(String::from))?;
    for s in stats {
        write_row(
            &mut w,
            [
                s.condition.clone(),
                s.n.to_string(),
                fixed(s.cooperation_pct, 1),
                opt(s.std_pct, 1),
                opt(s.ci95_pct, 2),
            ],
        )?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::metrics::RoundPoint;
    use crate::analysis::stats::payoff_stats;

    fn parse(bytes: &[u8]) -> Vec<Vec<String>> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes);
        r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
    }

    fn table2_fixture() -> Vec<ConditionStats> {
        let control = payoff_stats("control", &[190.0, 211.7, 233.4], None).unwrap();
        let c = control.mean_payoff;
        vec![
            control,
            payoff_stats("direct-precursor", &[150.0, 199.0, 248.0], Some(c)).unwrap(),
            payoff_stats("scrambled", &[182.0, 182.0], Some(c)).unwrap(),
            payoff_stats("full-curriculum", &[153.6], Some(c)).unwrap(),
        ]
    }

    #[test]
    fn condition_csv_shape_and_round_trip() {
        let stats = table2_fixture();
        let bytes = condition_stats_csv(&stats).unwrap();
        let rows = parse(&bytes);
        assert_eq!(rows[0], CONDITION_STATS_HEADER);
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[1][5], "");
        assert_eq!(rows[4][3], "");
        for (row, s) in rows[1..].iter().zip(&stats) {
            assert_eq!(row[0], s.condition);
            assert_eq!(row[1].parse::<usize>().unwrap(), s.n_completed);
            let mean: f64 = row[2].parse().unwrap();
            assert!((mean - s.mean_payoff).abs() <= 0.05 + 1e-12);
            assert_eq!(row[2], format!("{:.1}", s.mean_payoff));
            if let Some(ci) = s.ci95_half_width {
                let parsed: f64 = row[4].parse().unwrap();
                assert!((parsed - ci).abs() <= 0.005 + 1e-12);
            }
        }
    }

    #[test]
    fn trajectory_rows_are_rounds() {
        let series = TrajectorySeries {
            condition: "control".into(),
            points: (1..=3)
                .map(|r| RoundPoint {
                    round: r,
                    n: 4,
                    mean: 10.0,
                    std: Some(0.0),
                    ci95: Some(0.0),
                })
                .collect(),
        };
        let rows = parse(&trajectory_csv(&[series]).unwrap());
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[3], ["control", "3", "10.0", "0.0", "0.00", "4"]);
    }

    #[test]
    fn words_sorted_by_count() {
        let mut counts = BTreeMap::new();
        counts.insert("hare".to_string(), 2);
        counts.insert("stag".to_string(), 9);
        counts.insert("go".to_string(), 2);
        let rows = parse(&word_frequency_csv(&counts).unwrap());
        assert_eq!(rows[1], ["stag", "9"]);
        assert_eq!(rows[2], ["go", "2"]);
        assert_eq!(rows[3], ["hare", "2"]);
    }

    #[test]
    fn no_negative_zero() {
        assert_eq!(fixed(-0.04, 1), "0.0");
        assert_eq!(fixed(-0.06, 1), "-0.1");
    }
}
