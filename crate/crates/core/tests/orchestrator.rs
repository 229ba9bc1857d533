use std::collections::BTreeSet;
use std::fs;
use std::sync::Arc;

use dilemma_core::agent::{response_json, StrategySpec};
use dilemma_core::curriculum::{build_condition, ConditionName};
use dilemma_core::game::{ActionRecord, Contribution, GameKind};
use dilemma_core::gateway::{MockScript, ModelEndpoint, UreqTransport};
use dilemma_core::orchestrator::*;

fn transport() -> Arc<UreqTransport> {
    Arc::new(UreqTransport)
}

fn mock_env() -> TrialEnv {
    TrialEnv::new(RunMode::Mock, transport())
}

fn plan(name: ConditionName, seed: Option<u64>) -> TrialPlan {
    TrialPlan::from_condition(&build_condition(name, seed).unwrap())
}

fn system_prompts(events: &[Event], stage: usize) -> Vec<&str> {
    events
        .iter()
        .filter_map(|e| match e {
            Event::Prompt { stage_index, system, .. } if *stage_index == stage => Some(system.as_str()),
            _ => None,
        })
        .collect()
}

#[test]
fn control_trial_has_one_stage_and_no_lessons() {
    let mut sink = VecSink::default();
    let r = run_trial(
        "control-000",
        &plan(ConditionName::Control, None),
        &AgentPool::default(),
        9,
        &BTreeSet::new(),
        &mock_env(),
        &mut sink,
    )
    .unwrap();
    assert!(r.is_completed());
    assert_eq!(r.stage_logs.len(), 1);
    assert!(r.lessons.is_empty());
    assert_eq!(r.stage_logs[0].spec.kind, GameKind::IpggPunish);
    assert_eq!(r.stage_logs[0].rounds.len(), 10);
    assert_eq!(sink.0.first().unwrap().kind(), "trial_start");
    assert_eq!(sink.0.last().unwrap().kind(), "trial_end");
    let mut ids = r.role_assignment.clone();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 4);
}

#[test]
fn full_curriculum_accumulates_three_lessons() {
    let mut sink = VecSink::default();
    let r = run_trial(
        "full-curriculum-000",
        &plan(ConditionName::FullCurriculum, None),
        &AgentPool::default(),
        1,
        &BTreeSet::new(),
        &mock_env(),
        &mut sink,
    )
    .unwrap();
    assert!(r.is_completed(), "{:?}", r.status);
    assert_eq!(r.stage_logs.len(), 4);
    assert_eq!(r.lessons.len(), 3);
    assert_eq!(r.stage_logs[0].spec.n_players, 2);
    for (stage, expected) in [(1usize, 0usize), (2, 1), (3, 2), (4, 3)] {
        for system in system_prompts(&sink.0, stage) {
            assert_eq!(system.matches("\nLesson ").count(), expected);
        }
    }
    let last = system_prompts(&sink.0, 4)[0];
    let positions: Vec<usize> = r.lessons.iter().map(|l| last.find(&l.text).unwrap()).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]));
    for (i, l) in r.lessons.iter().enumerate() {
        assert_eq!(l.stage_index, i + 1);
        assert!(l.text.starts_with("Lesson from "));
    }
}

#[test]
fn lesson_model_mock_used_offline() {
    let env = TrialEnv {
        lesson_source: LessonSource::default(),
        ..mock_env()
    };
    let mut sink = VecSink::default();
    let r = run_trial(
        "direct-precursor-000",
        &plan(ConditionName::DirectPrecursor, None),
        &AgentPool::default(),
        4,
        &BTreeSet::new(),
        &env,
        &mut sink,
    )
    .unwrap();
    assert_eq!(r.lessons.len(), 1);
    assert_eq!(r.lessons[0].generator_id, DEFAULT_LESSON_MODEL);
    assert!(r.lessons[0].text.starts_with("Lesson from PublicGoodsGame:"));
    let lesson_calls = sink
        .0
        .iter()
        .filter(|e| matches!(e, Event::Exchange { player: None, .. }))
        .count();
    assert_eq!(lesson_calls, 1);
}

#[test]
fn abort_in_second_stage_keeps_partial_logs() {
    let contribute = response_json("keep going", &ActionRecord::Contribute(Contribution(5)));
    let mut agents: Vec<AgentSpec> = (0..3)
        .map(|i| {
            AgentSpec::scripted(
                &format!("s{i}"),
                vec![StrategySpec::FixedContribution { amount: 10 }, StrategySpec::NoPunish],
            )
        })
        .collect();
    agents.push(AgentSpec::model(
        "short",
        "mock",
        ModelEndpoint::mock_script("short", vec![contribute; 3]).unwrap(),
    ));
    let pool = AgentPool::new(agents).unwrap();
    let r = run_trial(
        "direct-precursor-000",
        &plan(ConditionName::DirectPrecursor, None),
        &pool,
        2,
        &BTreeSet::new(),
        &mock_env(),
        &mut NullSink,
    )
    .unwrap();
    match &r.status {
        TrialStatus::Aborted { stage, round, agent_id, .. } => {
            assert_eq!((*stage, *round), (2, 1));
            assert_eq!(agent_id.as_deref(), Some("short"));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(r.stage_logs.len(), 2);
    assert!(r.stage_logs[0].is_complete());
    assert!(r.stage_logs[1].is_aborted());
    assert_eq!(r.lessons.len(), 1);
    assert!(r.final_metrics.is_none());
}

#[test]
fn fixed_seed_fixes_assignment() {
    let pool = AgentPool::default();
    let run = |seed| {
        run_trial(
            "t",
            &plan(ConditionName::Control, None),
            &pool,
            seed,
            &BTreeSet::new(),
            &mock_env(),
            &mut NullSink,
        )
        .unwrap()
    };
    assert_eq!(run(5), run(5));
    let distinct: BTreeSet<Vec<String>> = (0..20).map(|s| run(s).role_assignment).collect();
    assert!(distinct.len() > 1);
}

fn config(dir: &std::path::Path, conditions: Vec<ConditionName>, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        conditions,
        trials,
        master_seed: Some(7),
        lesson_source: LessonSource::Stub,
        out_dir: dir.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

#[test]
fn batch_writes_files_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), vec![ConditionName::Control, ConditionName::Scrambled], 2);
    let summary = run_experiment(&cfg, transport()).unwrap();
    assert_eq!(summary.trial_files.len(), 4);
    for f in &summary.trial_files {
        assert!(dir.path().join(f).is_file());
    }
    assert_eq!(
        summary.conditions.iter().map(|c| (c.condition.as_str(), c.completed)).collect::<Vec<_>>(),
        [("control", 2), ("scrambled", 2)]
    );
    let on_disk: BatchSummary =
        serde_json::from_str(&fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(on_disk, summary);
    let report = validate_dir(dir.path()).unwrap();
    assert_eq!(report.files_checked, 4);
    assert!(report.is_ok(), "{:?}", report.violations);
    let trials = load_trials(dir.path()).unwrap();
    assert!(trials.iter().all(|t| t.is_completed()));
    assert_eq!(trials.iter().filter(|t| t.condition == "scrambled").map(|t| t.stage_logs.len()).sum::<usize>(), 8);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        run_experiment(&config(d.path(), vec![ConditionName::DirectPrecursor], 2), transport()).unwrap();
    }
    let files = trial_files(a.path()).unwrap();
    assert_eq!(files.len(), 2);
    for f in files {
        let other = b.path().join(TRIALS_DIR).join(f.file_name().unwrap());
        assert_eq!(fs::read(&f).unwrap(), fs::read(other).unwrap());
    }
    assert_eq!(
        fs::read(a.path().join(SUMMARY_FILE)).unwrap(),
        fs::read(b.path().join(SUMMARY_FILE)).unwrap()
    );
}

#[test]
fn injected_garbage_aborts_one_trial() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), vec![ConditionName::Control], 3);
    cfg.inject_garbage.push(FaultInjection {
        condition: "control".into(),
        trial: 1,
        agent_id: "qwen".into(),
    });
    let summary = run_experiment(&cfg, transport()).unwrap();
    let c = &summary.conditions[0];
    assert_eq!((c.trials, c.completed, c.aborted), (3, 2, 1));
    assert_eq!(c.aborted_trials[0].trial_id, "control-001");
    assert!(validate_dir(dir.path()).unwrap().is_ok());
}

#[test]
fn scrambled_needs_a_seed() {
    let mut cfg = config(std::path::Path::new("unused"), vec![ConditionName::Scrambled], 1);
    cfg.master_seed = None;
    assert!(matches!(
        cfg.curriculum_batch(),
        Err(OrchestratorError::Curriculum(dilemma_core::curriculum::CurriculumError::MissingSeed))
    ));
}

fn single_control_run() -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&config(dir.path(), vec![ConditionName::Control], 1), transport()).unwrap();
    let file = trial_files(dir.path()).unwrap().remove(0);
    (dir, file)
}

#[test]
fn corrupted_payoff_is_reported() {
    let (dir, file) = single_control_run();
    let text = fs::read_to_string(&file).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let idx = lines.iter().position(|l| l.starts_with("{\"kind\":\"round\"")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&lines[idx]).unwrap();
    let p = v["record"]["payoffs"][0].as_f64().unwrap();
    v["record"]["payoffs"][0] = serde_json::json!(p + 1.0);
    lines[idx] = serde_json::to_string(&v).unwrap();
    fs::write(&file, lines.join("\n") + "\n").unwrap();
    let report = validate_dir(dir.path()).unwrap();
    assert!(!report.is_ok());
    let msg = report.violations[0].to_string();
    assert!(msg.contains("trial control-000 stage 1 round 1"), "{msg}");
}

#[test]
fn truncated_line_is_located() {
    let (dir, file) = single_control_run();
    let text = fs::read_to_string(&file).unwrap();
    let n = text.lines().count();
    fs::write(&file, &text[..text.len() - 20]).unwrap();
    let report = validate_dir(dir.path()).unwrap();
    let v = &report.violations[0];
    assert_eq!(v.line, Some(n));
    assert!(v.message.starts_with("invalid event"));
    assert!(load_trials(dir.path()).is_err());
}

#[test]
fn pilot_batches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), vec![], 1);
    let pilot = PilotSpec {
        comm: true,
        grouping: Grouping::Heterogeneous,
        trials: 2,
        rounds: 3,
    };
    let summary = run_pilot(&cfg, &pilot, transport()).unwrap();
    assert_eq!(summary.conditions[0].condition, "pilot-hetero-comm");
    let trials = load_trials(dir.path()).unwrap();
    for t in &trials {
        let log = &t.stage_logs[0];
        assert_eq!(log.spec.kind, GameKind::StagHuntComm);
        assert!(log.rounds.iter().all(|r| r.broadcast_words().is_some_and(|w| w.len() == 4)));
    }

    let coalition = PilotSpec {
        comm: false,
        grouping: Grouping::Coalition,
        ..pilot
    };
    run_pilot(&cfg, &coalition, transport()).unwrap();

    let one_family = ExperimentConfig {
        pool: AgentPool::new(
            (0..4)
                .map(|i| AgentSpec::model(&format!("m{i}"), "same", ModelEndpoint::mock("m", MockScript::default())))
                .collect(),
        )
        .unwrap(),
        ..cfg
    };
    assert_eq!(
        run_pilot(&one_family, &coalition, transport()),
        Err(OrchestratorError::InsufficientFamilies { have: 1 })
    );
}

#[test]
fn live_without_key_fails_before_playing() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), vec![ConditionName::Control], 1);
    cfg.mode = RunMode::Live;
    let mut pool = AgentPool::default();
    for a in &mut pool.agents {
        if let Decider::Model { endpoint } = &mut a.decider {
            endpoint.api_key_env_var = Some("DILEMMA_TEST_KEY_THAT_IS_NOT_SET".into());
        }
    }
    cfg.pool = pool;
    let err = run_experiment(&cfg, transport()).unwrap_err();
    assert!(matches!(err, OrchestratorError::Gateway(ref g) if g.is_auth()), "{err:?}");
    assert!(!dir.path().join(TRIALS_DIR).exists());
}

#[test]
fn config_json_defaults() {
    let cfg = ExperimentConfig::from_json(r#"{"trials": 2, "master_seed": 3}"#).unwrap();
    assert_eq!(cfg.conditions.len(), 4);
    assert_eq!(cfg.max_retries, 3);
    assert_eq!(cfg.pool.agents.len(), 4);
    assert!(ExperimentConfig::from_json(r#"{"trials": 0}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
}

#[test]
fn analysis_matches_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), vec![ConditionName::Control, ConditionName::DirectPrecursor], 3);
    cfg.inject_garbage.push(FaultInjection {
        condition: "direct-precursor".into(),
        trial: 0,
        agent_id: "llama".into(),
    });
    run_experiment(&cfg, transport()).unwrap();
    let trials = load_trials(dir.path()).unwrap();
    let report = analyze_trials(&trials).unwrap();
    assert_eq!(report.counts[0].condition, "control");
    assert_eq!((report.counts[1].n_completed, report.counts[1].n_aborted), (2, 1));

    let per_trial = |cond: &str| -> Vec<f64> {
        trials
            .iter()
            .filter(|t| t.condition == cond && t.is_completed())
            .map(|t| {
                let totals = &t.stage_logs.last().unwrap().totals;
                totals.iter().map(|x| x.as_f64()).sum::<f64>() / totals.len() as f64
            })
            .collect()
    };
    let control: Vec<f64> = per_trial("control");
    let cm = control.iter().sum::<f64>() / control.len() as f64;
    let direct = per_trial("direct-precursor");
    let dm = direct.iter().sum::<f64>() / direct.len() as f64;
    let ds = ((direct.iter().map(|x| (x - dm).powi(2)).sum::<f64>()) / (direct.len() - 1) as f64).sqrt();
    let row = &report.condition_stats[1];
    assert_eq!(row.n_completed, 2);
    assert!((row.mean_payoff - dm).abs() <= 1e-9 * dm.abs());
    assert!((row.std_payoff.unwrap() - ds).abs() <= 1e-9 * ds.max(1.0));
    let pct = 100.0 * (dm - cm) / cm;
    assert!((row.pct_vs_control.unwrap() - pct).abs() <= 1e-9 * pct.abs().max(1.0));
    assert_eq!(report.condition_stats[0].pct_vs_control, None);

    let out = dir.path().join("analysis");
    let first = write_analysis(&report, &out).unwrap();
    let bytes: Vec<Vec<u8>> = first.iter().map(|f| fs::read(f).unwrap()).collect();
    let again = write_analysis(&analyze_trials(&load_trials(dir.path()).unwrap()).unwrap(), &out).unwrap();
    assert_eq!(first, again);
    for (f, b) in again.iter().zip(bytes) {
        assert_eq!(fs::read(f).unwrap(), b);
    }
    assert!(!out.join(WORD_FREQUENCY_FILE).exists());
    let exports = write_trial_exports(&trials, &out).unwrap();
    let text = fs::read_to_string(&exports[0]).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.contains("direct-precursor-000,direct-precursor,aborted,"));
}

#[test]
fn only_aborted_trials_cannot_be_analyzed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), vec![ConditionName::Control], 1);
    cfg.inject_garbage.push(FaultInjection {
        condition: "control".into(),
        trial: 0,
        agent_id: "mixtral".into(),
    });
    run_experiment(&cfg, transport()).unwrap();
    let err = analyze_trials(&load_trials(dir.path()).unwrap()).unwrap_err();
    assert!(err.to_string().contains("zero completed"));
}

#[test]
fn comm_pilot_word_counts() {
    let dir = tempfile::tempdir().unwrap();
    let pilot = PilotSpec {
        comm: true,
        grouping: Grouping::Coalition,
        trials: 3,
        rounds: 3,
    };
    run_pilot(&config(dir.path(), vec![], 1), &pilot, transport()).unwrap();
    let trials = load_trials(dir.path()).unwrap();
    let report = analyze_trials(&trials).unwrap();
    assert_eq!(report.word_frequency.values().sum::<u64>(), 3 * 3 * 4);
    let files = write_analysis(&report, &dir.path().join("a")).unwrap();
    assert!(files.iter().any(|f| f.ends_with(WORD_FREQUENCY_FILE)));
    assert_eq!(report.trajectories[0].points.len(), 3);
}
