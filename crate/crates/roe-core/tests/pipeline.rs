//! End-to-end harness checks on desk-scale runs: artifact layout,
//! byte-determinism, resume equivalence, evaluation consistency, heat maps,
//! and the adaptation study's null behavior.

use std::path::Path;

use sha2::{Digest, Sha256};

use roe_core::env::{Scenario, WeaponVariant};
use roe_core::harness::{
    self, adaptation_study, evaluate, heatmap_export, read_csv_column, Checkpoint, EvalReport,
    RunConfig,
};

fn tiny_config(dir: &Path, scenario: Scenario, seed: u64) -> RunConfig {
    RunConfig {
        scenario,
        mode: roe_core::a2c::RewardMode::Roe,
        total_steps: 400,
        master_seed: seed,
        out_dir: dir.to_path_buf(),
        workers: Some(2),
        t_max: 10,
        width: Some(7),
        height: Some(7),
        max_ticks: Some(60),
        hidden_units: Some(32),
        checkpoint_every_updates: Some(10),
        ..Default::default()
    }
}

fn sha(path: &Path) -> String {
    let bytes = std::fs::read(path).unwrap();
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[test]
fn train_produces_expected_artifacts_and_update_count() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path(), Scenario::HealthGathering, 1);
    let artifacts = harness::train(&config).unwrap();
    // 400 steps / (2 workers x 10 steps) = 20 updates.
    assert_eq!(artifacts.updates, 20);
    assert!(dir.path().join("config.json").exists());
    assert!(artifacts.final_checkpoint.exists());
    assert!(artifacts.diagnostics_csv.exists());
    assert!(artifacts.events_csv.exists());
    let steps = read_csv_column(&artifacts.diagnostics_csv, "step").unwrap();
    assert_eq!(steps.len(), 20);
    assert_eq!(steps.last().unwrap().0, 400);
    // Event means are logged per update under the taxonomy's names.
    let movement = read_csv_column(&artifacts.events_csv, "movement").unwrap();
    assert_eq!(movement.len(), 20);
}

#[test]
fn identical_config_and_seed_give_byte_identical_logs() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let a = harness::train(&tiny_config(dir_a.path(), Scenario::HealthGathering, 7)).unwrap();
    let b = harness::train(&tiny_config(dir_b.path(), Scenario::HealthGathering, 7)).unwrap();
    assert_eq!(sha(&a.diagnostics_csv), sha(&b.diagnostics_csv));
    assert_eq!(sha(&a.events_csv), sha(&b.events_csv));
    let c = harness::train(&tiny_config(dir_a.path(), Scenario::HealthGathering, 8)).unwrap();
    assert_ne!(sha(&c.diagnostics_csv), sha(&b.diagnostics_csv));
}

#[test]
fn resume_from_checkpoint_matches_uninterrupted_run() {
    // Full run in one directory.
    let dir_full = tempfile::tempdir().unwrap();
    let full = harness::train(&tiny_config(dir_full.path(), Scenario::HealthGathering, 3)).unwrap();

    // Same run elsewhere, then resume from the halfway step checkpoint:
    // the interrupted copies of the logs are overwritten past that row.
    let dir_resumed = tempfile::tempdir().unwrap();
    harness::train(&tiny_config(dir_resumed.path(), Scenario::HealthGathering, 3)).unwrap();
    let halfway = dir_resumed.path().join("checkpoints/step_200.json");
    assert!(halfway.exists());
    let resumed = harness::resume(&halfway).unwrap();
    assert_eq!(sha(&full.diagnostics_csv), sha(&resumed.diagnostics_csv));
    assert_eq!(sha(&full.events_csv), sha(&resumed.events_csv));
    // The checkpoints embed their run directory; equality holds modulo it.
    let mut a = Checkpoint::load(&full.final_checkpoint).unwrap();
    let mut b = Checkpoint::load(&resumed.final_checkpoint).unwrap();
    a.run_config.out_dir = "x".into();
    b.run_config.out_dir = "x".into();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn best_checkpoint_records_running_maximum_of_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny_config(dir.path(), Scenario::HealthGathering, 11);
    config.total_steps = 1200;
    let artifacts = harness::train(&config).unwrap();
    let best_path = artifacts.best_checkpoint.expect("some episode completed");
    let best = Checkpoint::load(&best_path).unwrap();
    let recorded = best.best.unwrap().mean;
    let column = read_csv_column(&artifacts.diagnostics_csv, "mean_extrinsic_episode_reward")
        .unwrap();
    let max = column
        .iter()
        .filter_map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(recorded, max);
}

#[test]
fn evaluation_is_reproducible_and_side_effect_free() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path(), Scenario::HealthGathering, 5);
    let artifacts = harness::train(&config).unwrap();
    let hash_before = sha(&artifacts.final_checkpoint);
    let ckpt = Checkpoint::load(&artifacts.final_checkpoint).unwrap();
    let a = evaluate(&ckpt, Scenario::HealthGathering, None, 20, 99).unwrap();
    let b = evaluate(&ckpt, Scenario::HealthGathering, None, 20, 99).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert_eq!(hash_before, sha(&artifacts.final_checkpoint));

    // Report statistics recompute from the per-episode logs.
    let mean = a.episode_scores.iter().sum::<f64>() / a.episodes as f64;
    assert!((a.mean - mean).abs() < 1e-12);
    let visit_sum: f64 = a.visitation.proportions.iter().sum();
    assert!((visit_sum - 1.0).abs() < 1e-9);
    // Architecture mismatch (different action count) is a config error.
    let err = evaluate(&ckpt, Scenario::DeadlyCorridor, None, 5, 1);
    assert!(err.is_err());
}

#[test]
fn heatmap_clips_and_preserves_proportions() {
    let report = EvalReport {
        scenario: Scenario::HealthGathering,
        variant: None,
        episodes: 1,
        seed: 0,
        mean: 0.0,
        std: 0.0,
        mean_episode_ticks: 0.0,
        taxonomy: roe_core::EventTaxonomy::doom26(),
        per_event_means: vec![0.0; 26],
        episode_scores: vec![0.0],
        episode_ticks: vec![1],
        episode_events: vec![roe_core::EventVector::zeros(26)],
        visitation: roe_core::harness::VisitationGrid {
            width: 2,
            height: 2,
            proportions: vec![0.10, 0.40, 0.50, 0.0],
        },
    };
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("heatmap.csv");
    let pgm = dir.path().join("heatmap.pgm");
    heatmap_export(&report, 0.025, &csv, &pgm).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let values: Vec<f64> = text
        .lines()
        .flat_map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()))
        .collect();
    assert_eq!(values, vec![0.10, 0.40, 0.50, 0.0]);
    assert!((values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let bytes = std::fs::read(&pgm).unwrap();
    let header_end = bytes.windows(4).position(|w| w == b"255\n").unwrap() + 4;
    // Everything at or above the 0.025 ceiling renders saturated.
    assert_eq!(&bytes[header_end..], &[255, 255, 255, 0]);
}

#[test]
fn uniform_visitation_is_one_over_k() {
    let k = 4;
    let grid = roe_core::harness::VisitationGrid {
        width: 2,
        height: 2,
        proportions: vec![1.0 / k as f64; k],
    };
    assert!(grid.proportions.iter().all(|&p| (p - 0.25).abs() < 1e-12));
}

#[test]
fn adaptation_study_requires_base_arena_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path(), Scenario::HealthGathering, 2);
    let artifacts = harness::train(&config).unwrap();
    let ckpt = Checkpoint::load(&artifacts.final_checkpoint).unwrap();
    let err = adaptation_study(&ckpt, &ckpt, 5, 0);
    assert!(err.is_err());
}

#[test]
fn adaptation_null_study_on_identical_checkpoints_is_non_significant() {
    // A tiny arena run; both arms share the same checkpoint, so score
    // differences are pure sampling noise and significance at alpha = 0.01
    // should be rare across repeated studies.
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny_config(dir.path(), Scenario::Deathmatch, 13);
    config.scenario = Scenario::Deathmatch;
    config.width = Some(11);
    config.height = Some(11);
    config.workers = Some(2);
    config.max_ticks = Some(120);
    config.total_steps = 400;
    let artifacts = harness::train(&config).unwrap();
    let ckpt = Checkpoint::load(&artifacts.final_checkpoint).unwrap();
    let mut non_significant = 0;
    let repeats = 10;
    for r in 0..repeats {
        let report = adaptation_study(&ckpt, &ckpt, 30, 1000 + r).unwrap();
        if report.rows.iter().all(|row| row.p_value > 0.01) {
            non_significant += 1;
        }
    }
    assert!(
        non_significant * 100 >= repeats * 95,
        "only {non_significant}/{repeats} studies were fully non-significant"
    );
}

#[test]
fn roe_learner_rewards_contain_no_extrinsic_term() {
    // Train a short RoE run, then re-derive every learner reward from the
    // recorded events against the frozen snapshot sequence: in RoE mode the
    // reward stream must be exactly the intrinsic rarity stream.
    use roe_core::a2c::{collect_segment, RewardSpec, Worker};
    use roe_core::neural::PolicyValueNet;
    use roe_core::reward::{rarity_reward, EventBuffer};

    let config = RunConfig {
        width: Some(7),
        height: Some(7),
        max_ticks: Some(40),
        ..tiny_config(Path::new("unused"), Scenario::HealthGathering, 21)
    };
    let def = config.def().unwrap();
    let mut workers: Vec<Worker> = (0..2)
        .map(|i| Worker::new(i, def.clone(), 4, 21).unwrap())
        .collect();
    let mut rng = roe_core::rng::derive_rng(21, "net-init", 0);
    let net = PolicyValueNet::new(config.net_config(&def), &mut rng).unwrap();
    let mut buffer = EventBuffer::new(def.taxonomy.clone(), 100).unwrap();
    for _ in 0..5 {
        let snapshot = buffer.temporal_mean();
        let spec = RewardSpec::Roe { snapshot: &snapshot, tau: 0.01 };
        let (trajs, completed) = collect_segment(&mut workers, &net, &spec, 10).unwrap();
        for t in &trajs {
            assert_eq!(t.reward_source, roe_core::a2c::RewardSource::Intrinsic);
            for s in &t.steps {
                let recomputed = rarity_reward(&s.events, &snapshot, 0.01);
                assert_eq!(s.reward.to_bits(), recomputed.to_bits());
            }
        }
        for eps in completed {
            for ep in eps {
                buffer.push_episode(ep.events).unwrap();
            }
        }
    }
}
