use super::*;
use crate::env::{KillRewardRescale, Scenario};

fn plain_normalizer() -> RewardNormalizer {
    RewardNormalizer {
        mode: NormalizationMode::Affine01,
        declared_range: (-100.0, 100.0),
        rescale: None,
    }
}

#[test]
fn affine_normalization_endpoints_and_midpoint() {
    let n = plain_normalizer();
    assert_eq!(n.normalize(-100.0).unwrap(), 0.0);
    assert_eq!(n.normalize(100.0).unwrap(), 1.0);
    assert_eq!(n.normalize(0.0).unwrap(), 0.5);
}

#[test]
fn scale100_mode() {
    let n = RewardNormalizer { mode: NormalizationMode::Scale100, ..plain_normalizer() };
    assert_eq!(n.normalize(-100.0).unwrap(), -1.0);
    assert_eq!(n.normalize(50.0).unwrap(), 0.5);
}

#[test]
fn out_of_range_raw_is_contract_violation() {
    let n = plain_normalizer();
    assert!(matches!(n.normalize(150.0), Err(Error::Contract(_))));
    assert!(matches!(n.normalize(-101.0), Err(Error::Contract(_))));
}

#[test]
fn arena_kill_rewards_rescale_into_unit_range() {
    let n = RewardNormalizer {
        mode: NormalizationMode::Affine01,
        declared_range: (-100.0, 2400.0),
        rescale: Some(KillRewardRescale { threshold: 100.0, divisor: 10.0 }),
    };
    assert_eq!(n.normalize(1000.0).unwrap(), 1.0); // 1000 -> 100 -> 1.0
    assert_eq!(n.normalize(300.0).unwrap(), 0.65); // 300 -> 30 -> 0.65
    assert_eq!(n.normalize(100.0).unwrap(), 1.0); // at threshold: untouched
    assert_eq!(n.normalize(-100.0).unwrap(), 0.0);
}

#[test]
fn checkpoint_rule_is_strict_improvement() {
    assert!(!checkpoint_if_improved(5.0, 5.0));
    assert!(checkpoint_if_improved(5.0, f64::NEG_INFINITY));
    assert!(checkpoint_if_improved(5.1, 5.0));
    // A monotone-improving sequence of k means saves exactly k times.
    let means = [1.0, 2.0, 3.5, 7.0];
    let mut best = f64::NEG_INFINITY;
    let mut saves = 0;
    for &m in &means {
        if checkpoint_if_improved(m, best) {
            best = m;
            saves += 1;
        }
    }
    assert_eq!(saves, means.len());
}

#[test]
fn welch_t_test_reference_value() {
    let a = [1.0, 2.0, 3.0, 4.0, 5.0];
    let b = [2.0, 3.0, 4.0, 5.0, 6.0];
    let (t, p) = welch_t_test(&a, &b);
    assert!((t + 1.0).abs() < 1e-12);
    // df = 8 for equal sizes and variances; 2 * (1 - cdf(1)) ~ 0.34659.
    assert!((p - 0.3466).abs() < 1e-3, "p = {p}");
    let (t2, p2) = welch_t_test(&a, &a);
    assert_eq!(t2, 0.0);
    assert!((p2 - 1.0).abs() < 1e-12);
}

#[test]
fn run_config_json_defaults_and_unknown_keys() {
    let cfg = RunConfig::from_json("{}").unwrap();
    assert_eq!(cfg.learning_rate, 7e-4);
    assert_eq!(cfg.gamma, 0.99);
    assert_eq!(cfg.entropy_coef, 0.01);
    assert_eq!(cfg.value_coef, 0.5);
    assert_eq!(cfg.max_grad_norm, 0.5);
    assert_eq!(cfg.t_max, 20);
    assert_eq!(cfg.batch_size, 64);
    assert_eq!(cfg.action_repeat, 4);
    assert_eq!(cfg.buffer_capacity, 100);
    assert_eq!(cfg.tau, 0.01);
    assert_eq!(cfg.rmsprop_eps, 1e-5);
    assert_eq!(cfg.rmsprop_alpha, 0.99);
    assert!(RunConfig::from_json("{\"no_such_key\": 1}").is_err());
}

#[test]
fn effective_workers_default_by_scenario() {
    let mut cfg = RunConfig::default();
    assert_eq!(cfg.effective_workers(), 4);
    cfg.scenario = Scenario::Deathmatch;
    assert_eq!(cfg.effective_workers(), 16);
    cfg.workers = Some(2);
    assert_eq!(cfg.effective_workers(), 2);
}

#[test]
fn total_steps_must_cover_one_segment() {
    let cfg = RunConfig {
        total_steps: 10,
        workers: Some(4),
        t_max: 20,
        ..Default::default()
    };
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
}
