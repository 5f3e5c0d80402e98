use super::*;
use crate::events::EventTaxonomy;

fn floor_def(width: usize, height: usize, taxonomy: Vec<&str>) -> ScenarioDef {
    let mut layout = Vec::new();
    for y in 0..height {
        let row: String = (0..width)
            .map(|x| {
                if x == 0 || y == 0 || x == width - 1 || y == height - 1 {
                    '#'
                } else {
                    '.'
                }
            })
            .collect();
        layout.push(row);
    }
    layout[1].replace_range(1..2, "S");
    ScenarioDef {
        name: "test".into(),
        layout,
        taxonomy: if taxonomy.is_empty() {
            EventTaxonomy::doom26()
        } else {
            EventTaxonomy::new(taxonomy.into_iter().map(String::from).collect()).unwrap()
        },
        max_ticks: 1000,
        attack_enabled: false,
        random_spawn_facing: false,
        alive_reward_per_tick: 0.0,
        death_penalty: 0.0,
        armor_reward: 0.0,
        armor_ends_episode: false,
        kill_rewards_enabled: false,
        medkit_heal: 30.0,
        medkit_respawn: false,
        random_medkits: 0,
        medkit_spawn_cells: None,
        acid: None,
        items: Vec::new(),
        enemies: Vec::new(),
        enemies_chase: true,
        random_enemies: None,
        start_weapon: None,
        declared_reward_range: (-100.0, 100.0),
        kill_reward_rescale: None,
    }
}

const FORWARD: usize = 1;
const NOOP: usize = 0;

#[test]
fn same_seed_same_initial_state() {
    for scenario in Scenario::ALL {
        let config = GridEnvConfig::new(scenario);
        let (a, oa) = reset(&config, 1234).unwrap();
        let (b, ob) = reset(&config, 1234).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap(),
            "{scenario:?}"
        );
        assert_eq!(oa, ob);
    }
}

#[test]
fn step_sequences_are_deterministic() {
    use rand::Rng;
    for scenario in [Scenario::HealthGathering, Scenario::Deathmatch] {
        let config = GridEnvConfig::new(scenario);
        let n_actions = config.action_count().unwrap();
        let mut actions = crate::rng::derive_rng(9, "test-actions", 0);
        let seq: Vec<usize> = (0..200).map(|_| actions.gen_range(0..n_actions)).collect();
        let run = |seed: u64| -> Vec<StepResult> {
            let (mut env, _) = reset(&config, seed).unwrap();
            let mut out = Vec::new();
            for &a in &seq {
                if env.is_done() {
                    break;
                }
                out.push(env.step(a).unwrap());
            }
            out
        };
        assert_eq!(run(77), run(77), "{scenario:?}");
    }
}

#[test]
fn corridor_reset_layout() {
    let config = GridEnvConfig::new(Scenario::DeadlyCorridor);
    let (env, _) = reset(&config, 0).unwrap();
    let (w, h) = env.dims();
    assert_eq!(env.agent().x, 1);
    assert_eq!(env.agent().y, h / 2);
    assert_eq!(env.enemies().len(), 6);
    let armor: Vec<_> = env
        .items()
        .iter()
        .filter(|i| i.kind == ItemKind::Armor)
        .collect();
    assert_eq!(armor.len(), 1);
    assert_eq!((armor[0].x, armor[0].y), (w - 2, h / 2));
}

#[test]
fn my_way_home_spawns_are_uniform_over_10k_resets() {
    let config = GridEnvConfig::new(Scenario::MyWayHome);
    let mut counts: std::collections::HashMap<(usize, usize), u64> = Default::default();
    let n = 10_000u64;
    for seed in 0..n {
        let (env, _) = reset(&config, seed).unwrap();
        *counts.entry((env.agent().x, env.agent().y)).or_default() += 1;
    }
    let k = counts.len() as f64;
    assert_eq!(counts.len(), 8, "expected eight spawn rooms");
    let p = 1.0 / k;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    let expected = n as f64 * p;
    for (&cell, &c) in &counts {
        assert!(
            (c as f64 - expected).abs() <= 3.0 * sigma,
            "spawn {cell:?} count {c} outside 3 sigma of {expected}"
        );
    }
}

#[test]
fn health_gathering_pays_one_per_tick_alive() {
    let config = GridEnvConfig::new(Scenario::HealthGathering);
    let (mut env, _) = reset(&config, 5).unwrap();
    let r = env.step(NOOP).unwrap();
    assert_eq!(r.extrinsic_reward, 4.0); // +1 per tick, action_repeat 4
    assert!(!r.done);
}

#[test]
fn acid_floor_deals_periodic_damage_and_kills() {
    let config = GridEnvConfig::new(Scenario::HealthGathering);
    let (mut env, _) = reset(&config, 5).unwrap();
    env.step(NOOP).unwrap();
    env.step(NOOP).unwrap(); // 8 ticks: one acid hit at the default period
    assert_eq!(env.agent().health, 92.0);
    let mut last = None;
    while !env.is_done() {
        last = Some(env.step(NOOP).unwrap());
    }
    let last = last.unwrap();
    assert!(last.done);
    // Death tick pays -100 with no alive reward; earlier ticks in the step
    // pay +1 each.
    assert!(last.extrinsic_reward <= -97.0);
    assert!(env.tick() < 200, "agent without medkits should die early");
}

#[test]
fn goal_armor_pays_100_and_ends_episode() {
    let mut def = floor_def(6, 3, vec!["movement", "pickup_armor"]);
    def.armor_reward = 100.0;
    def.armor_ends_episode = true;
    def.items.push(ItemPlacement {
        kind: ItemKind::Armor,
        x: 3,
        y: 1,
    });
    let (mut env, _) = reset_def(def, 1, 0).unwrap();
    let r1 = env.step(FORWARD).unwrap();
    assert!(!r1.done);
    let r2 = env.step(FORWARD).unwrap();
    assert!(r2.done);
    assert_eq!(r2.extrinsic_reward, 100.0);
    let armor_idx = env.taxonomy().index("pickup_armor").unwrap();
    assert_eq!(r2.events.get(armor_idx), 1);
}

#[test]
fn step_after_done_is_contract_violation() {
    let mut def = floor_def(6, 3, vec!["movement"]);
    def.max_ticks = 1;
    let (mut env, _) = reset_def(def, 1, 0).unwrap();
    let r = env.step(NOOP).unwrap();
    assert!(r.done);
    assert!(matches!(env.step(NOOP), Err(Error::Contract(_))));
}

#[test]
fn action_out_of_range_is_contract_violation() {
    let config = GridEnvConfig::new(Scenario::HealthGathering);
    let (mut env, _) = reset(&config, 0).unwrap();
    assert_eq!(env.action_count(), 8);
    assert!(matches!(env.step(8), Err(Error::Contract(_))));
    let config = GridEnvConfig::new(Scenario::DeadlyCorridor);
    let (mut env, _) = reset(&config, 0).unwrap();
    assert_eq!(env.action_count(), 16);
    assert!(env.step(15).is_ok());
}

#[test]
fn noop_step_emits_no_events() {
    let def = floor_def(6, 4, vec!["movement", "pickup_armor"]);
    let (mut env, _) = reset_def(def, 4, 0).unwrap();
    let r = env.step(NOOP).unwrap();
    assert!(r.events.is_zero());
}

#[test]
fn movement_counts_cells_travelled_with_action_repeat() {
    let def = floor_def(8, 3, vec!["movement"]);
    let (mut env, _) = reset_def(def, 3, 0).unwrap();
    let r = env.step(FORWARD).unwrap();
    assert_eq!(r.events.get(0), 3);
    // Oracle: replay the anchor rule over the position trace.
    let positions = [(1u32, 1u32), (2, 1), (3, 1), (4, 1)];
    let mut anchor = (positions[0].0 as f64, positions[0].1 as f64);
    let mut count = 0;
    for &(x, y) in &positions[1..] {
        let d = ((x as f64 - anchor.0).powi(2) + (y as f64 - anchor.1).powi(2)).sqrt();
        if d >= 1.0 {
            count += 1;
            anchor = (x as f64, y as f64);
        }
    }
    assert_eq!(count, 3);
}

#[test]
fn turning_in_place_is_not_movement() {
    let def = floor_def(8, 3, vec!["movement"]);
    let (mut env, _) = reset_def(def, 4, 0).unwrap();
    let r = env.step(2).unwrap(); // turn left only
    assert_eq!(r.events.get(0), 0);
}

#[test]
fn kill_emits_weapon_slot_and_kill_any() {
    let mut def = floor_def(8, 3, vec![]);
    def.taxonomy = EventTaxonomy::doom26();
    def.attack_enabled = true;
    def.start_weapon = Some((3, 10));
    def.enemies.push(EnemyPlacement {
        kind: EnemyKind::Zombieman,
        x: 4,
        y: 1,
    });
    let (mut env, _) = reset_def(def, 1, 0).unwrap();
    let r = env.step(8).unwrap(); // attack only
    let tax = env.taxonomy().clone();
    assert_eq!(r.events.get(tax.index("kill_weapon_3").unwrap()), 1);
    assert_eq!(r.events.get(tax.index("kill_any").unwrap()), 1);
    assert_eq!(r.events.get(tax.index("shoot").unwrap()), 1);
    assert_eq!(env.enemies().len(), 0);
    assert_eq!(r.extrinsic_reward, 0.0); // kill rewards disabled by default
}

#[test]
fn kill_reward_paid_in_arena_mode() {
    let mut def = floor_def(8, 3, vec![]);
    def.taxonomy = EventTaxonomy::doom26();
    def.attack_enabled = true;
    def.kill_rewards_enabled = true;
    def.declared_reward_range = (-100.0, 2400.0);
    def.start_weapon = Some((6, 10));
    def.enemies.push(EnemyPlacement {
        kind: EnemyKind::Zombieman,
        x: 3,
        y: 1,
    });
    let (mut env, _) = reset_def(def, 1, 0).unwrap();
    let r = env.step(8).unwrap();
    assert_eq!(r.extrinsic_reward, 100.0);
}

#[test]
fn weapon_pickup_switches_and_bundles_ammo() {
    let mut def = floor_def(8, 3, vec![]);
    def.taxonomy = EventTaxonomy::doom26();
    def.attack_enabled = true;
    def.start_weapon = Some((0, 5));
    def.items.push(ItemPlacement {
        kind: ItemKind::Weapon { slot: 6 },
        x: 2,
        y: 1,
    });
    let (mut env, _) = reset_def(def, 1, 0).unwrap();
    let r = env.step(FORWARD).unwrap();
    let tax = env.taxonomy().clone();
    assert_eq!(r.events.get(tax.index("pickup_weapon_6").unwrap()), 1);
    assert_eq!(env.agent().active_slot, 6);
    assert_eq!(env.agent().ammo[6], WEAPON_PICKUP_AMMO);
    assert!(env.agent().owned[6]);
}

#[test]
fn pickups_bounded_by_items_ever_present() {
    use rand::Rng;
    let config = GridEnvConfig::new(Scenario::Deathmatch);
    let initial_items = config.def().unwrap().items.len() as u64;
    let tax = config.taxonomy();
    let pickup_idx: Vec<usize> = tax
        .names()
        .iter()
        .enumerate()
        .filter(|(_, n)| n.starts_with("pickup_"))
        .map(|(i, _)| i)
        .collect();
    let mut rng = crate::rng::derive_rng(3, "test-actions", 1);
    for seed in 0..5 {
        let (mut env, _) = reset(&config, seed).unwrap();
        let mut picked = 0u64;
        for _ in 0..300 {
            if env.is_done() {
                break;
            }
            let r = env.step(rng.gen_range(0..16)).unwrap();
            picked += pickup_idx.iter().map(|&i| r.events.get(i) as u64).sum::<u64>();
        }
        assert!(picked <= initial_items);
    }
}

#[test]
fn rollout_rewards_and_observations_stay_in_declared_ranges() {
    use rand::Rng;
    for scenario in Scenario::ALL {
        let config = GridEnvConfig::new(scenario);
        let def = config.def().unwrap();
        let (lo, hi) = def.declared_reward_range;
        let mut rng = crate::rng::derive_rng(4, "test-actions", 2);
        let n_actions = config.action_count().unwrap();
        let (mut env, obs0) = reset(&config, 99).unwrap();
        let shape = obs0.shape();
        for _ in 0..300 {
            if env.is_done() {
                break;
            }
            let r = env.step(rng.gen_range(0..n_actions)).unwrap();
            assert!(
                r.extrinsic_reward >= lo && r.extrinsic_reward <= hi,
                "{scenario:?}: raw reward {} outside [{lo}, {hi}]",
                r.extrinsic_reward
            );
            assert_eq!(r.observation.shape(), shape);
            assert!(r.observation.data.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(env.tick() <= def.max_ticks);
        }
    }
}

#[test]
fn variant_config_checks() {
    let dm = GridEnvConfig::new(Scenario::Deathmatch);
    let v = dm.make_variant(WeaponVariant::Rocket).unwrap();
    assert_eq!(v.variant, Some(WeaponVariant::Rocket));
    assert!(matches!(
        v.make_variant(WeaponVariant::Plasma),
        Err(Error::Config(_))
    ));
    let hg = GridEnvConfig::new(Scenario::HealthGathering);
    assert!(matches!(
        hg.make_variant(WeaponVariant::Rocket),
        Err(Error::Config(_))
    ));
    // The variant map only contains the kept weapon's pickups.
    let def = v.def().unwrap();
    for item in &def.items {
        match item.kind {
            ItemKind::Weapon { slot } | ItemKind::Ammo { slot } => assert_eq!(slot, 5),
            _ => {}
        }
    }
}

#[test]
fn env_state_serde_roundtrip_resumes_identically() {
    use rand::Rng;
    let config = GridEnvConfig::new(Scenario::Deathmatch);
    let (mut env, _) = reset(&config, 11).unwrap();
    let mut rng = crate::rng::derive_rng(5, "test-actions", 3);
    for _ in 0..40 {
        if env.is_done() {
            break;
        }
        env.step(rng.gen_range(0..16)).unwrap();
    }
    let json = serde_json::to_string(&env).unwrap();
    let mut restored: EnvState = serde_json::from_str(&json).unwrap();
    for _ in 0..40 {
        if env.is_done() {
            break;
        }
        let a = rng.gen_range(0..16);
        let r1 = env.step(a).unwrap();
        let r2 = restored.step(a).unwrap();
        assert_eq!(r1, r2);
    }
}

#[test]
fn medkit_heals_and_respawns_in_health_scenarios() {
    let config = GridEnvConfig::new(Scenario::HealthGathering);
    let (env, _) = reset(&config, 17).unwrap();
    let medkits = env
        .items()
        .iter()
        .filter(|i| i.kind == ItemKind::Medkit)
        .count();
    assert_eq!(medkits, 4);
}
