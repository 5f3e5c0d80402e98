//! Browser playground for the rarity-of-events lab.
//!
//! Three interactive surfaces, exported through wasm-bindgen and consumed by
//! the static page in `www/`:
//!
//! - [`DemoEnv`]: drive a scenario by keyboard; an event buffer accumulates
//!   across episodes so the per-event rarity rewards adapt live as you play.
//! - [`DemoTrainer`]: run actor-critic updates in the browser and stream
//!   diagnostics (entropy, intrinsic reward, per-event means) for charting,
//!   plus policy rollouts for animation and a visitation heat map.
//! - [`list_scenarios`]: scenario metadata for the page's controls.
//!
//! Everything crosses the JS boundary as JSON strings to keep the ABI dull.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use roe_core::a2c::{collect_segment, update, A2cConfig, RewardMode, RewardSpec, Worker};
use roe_core::env::{
    build_def, reset_def, EnvState, ItemKind, Scenario, ScenarioDef, OBS_CHANNELS,
};
use roe_core::harness::{NormalizationMode, RewardNormalizer};
use roe_core::neural::{sample_action, NetConfig, ObsShape, PolicyValueNet};
use roe_core::reward::{rarity_reward, EventBuffer};
use roe_core::rng;

fn err_str(e: roe_core::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[derive(Serialize)]
struct CellView {
    x: usize,
    y: usize,
    kind: &'static str,
    /// Weapon slot or enemy kind tag, where applicable.
    tag: Option<String>,
}

#[derive(Serialize)]
struct EnvView {
    width: usize,
    height: usize,
    tick: u32,
    done: bool,
    health: f64,
    ammo: u32,
    active_slot: u8,
    agent: (usize, usize),
    facing: &'static str,
    cells: Vec<CellView>,
}

fn env_view(env: &EnvState) -> EnvView {
    let (width, height) = env.dims();
    let mut cells = Vec::new();
    for y in 0..height {
        for x in 0..width {
            if env.is_wall(x, y) {
                cells.push(CellView { x, y, kind: "wall", tag: None });
            } else if env.is_acid(x, y) {
                cells.push(CellView { x, y, kind: "acid", tag: None });
            }
        }
    }
    for item in env.items() {
        let (kind, tag) = match item.kind {
            ItemKind::Medkit => ("medkit", None),
            ItemKind::Armor => ("armor", None),
            ItemKind::Ammo { slot } => ("ammo", Some(slot.to_string())),
            ItemKind::Weapon { slot } => ("weapon", Some(slot.to_string())),
        };
        cells.push(CellView { x: item.x, y: item.y, kind, tag });
    }
    for enemy in env.enemies() {
        cells.push(CellView {
            x: enemy.x,
            y: enemy.y,
            kind: "enemy",
            tag: Some(enemy.kind.name().to_string()),
        });
    }
    let agent = env.agent();
    EnvView {
        width,
        height,
        tick: env.tick(),
        done: env.is_done(),
        health: agent.health,
        ammo: agent.ammo[agent.active_slot as usize],
        active_slot: agent.active_slot,
        agent: (agent.x, agent.y),
        facing: match agent.facing {
            roe_core::env::Facing::North => "north",
            roe_core::env::Facing::East => "east",
            roe_core::env::Facing::South => "south",
            roe_core::env::Facing::West => "west",
        },
        cells,
    }
}

#[derive(Serialize)]
struct StepView {
    view: EnvView,
    extrinsic: f64,
    intrinsic: f64,
    events: Vec<(String, u32)>,
    rarity: RarityView,
    episode: u64,
}

#[derive(Serialize)]
struct RarityView {
    names: Vec<String>,
    means: Vec<f64>,
    rewards_per_occurrence: Vec<f64>,
    episodes_buffered: usize,
}

fn rarity_view(buffer: &EventBuffer, tau: f64) -> RarityView {
    let means = buffer.temporal_mean();
    RarityView {
        names: buffer.taxonomy().names().to_vec(),
        rewards_per_occurrence: means.iter().map(|m| 1.0 / m.max(tau)).collect(),
        means,
        episodes_buffered: buffer.len(),
    }
}

/// Keyboard-driven environment with a live rarity-reward panel.
#[wasm_bindgen]
pub struct DemoEnv {
    def: ScenarioDef,
    env: EnvState,
    buffer: EventBuffer,
    episode_events: roe_core::EventVector,
    tau: f64,
    seed: u64,
    episode: u64,
}

#[wasm_bindgen]
impl DemoEnv {
    #[wasm_bindgen(constructor)]
    pub fn new(scenario: &str, seed: u32) -> Result<DemoEnv, JsValue> {
        let scenario = Scenario::parse(scenario).map_err(err_str)?;
        let def = build_def(scenario, None, None, None, None).map_err(err_str)?;
        let (env, _) = reset_def(def.clone(), 1, seed as u64).map_err(err_str)?;
        let buffer = EventBuffer::new(def.taxonomy.clone(), 100).map_err(err_str)?;
        let dim = def.taxonomy.size();
        Ok(DemoEnv {
            def,
            env,
            buffer,
            episode_events: roe_core::EventVector::zeros(dim),
            tau: 0.01,
            seed: seed as u64,
            episode: 0,
        })
    }

    /// Number of combined actions for the current scenario (8 or 16).
    pub fn action_count(&self) -> usize {
        self.def.action_count()
    }

    pub fn render(&self) -> String {
        serde_json::to_string(&env_view(&self.env)).expect("view serializes")
    }

    /// Apply one combined action (bit 0 forward, 1 left, 2 right,
    /// 3 attack). Returns the step view as JSON.
    pub fn step(&mut self, action: usize) -> Result<String, JsValue> {
        let snapshot = self.buffer.temporal_mean();
        let step = self.env.step(action).map_err(err_str)?;
        let intrinsic = rarity_reward(&step.events, &snapshot, self.tau);
        self.episode_events.add_assign(&step.events).map_err(err_str)?;
        let mut named = Vec::new();
        for (i, name) in self.def.taxonomy.names().iter().enumerate() {
            if step.events.get(i) > 0 {
                named.push((name.clone(), step.events.get(i)));
            }
        }
        if step.done {
            let dim = self.def.taxonomy.size();
            let episode =
                std::mem::replace(&mut self.episode_events, roe_core::EventVector::zeros(dim));
            self.buffer.push_episode(episode).map_err(err_str)?;
            self.episode += 1;
            let seed = rng::derive_u64(self.seed, "demo-episode", self.episode);
            let (env, _) = reset_def(self.def.clone(), 1, seed).map_err(err_str)?;
            self.env = env;
        }
        let view = StepView {
            view: env_view(&self.env),
            extrinsic: step.extrinsic_reward,
            intrinsic,
            events: named,
            rarity: rarity_view(&self.buffer, self.tau),
            episode: self.episode,
        };
        Ok(serde_json::to_string(&view).expect("view serializes"))
    }

    /// Start a fresh episode (keeps the event buffer).
    pub fn reset(&mut self) -> Result<String, JsValue> {
        self.episode += 1;
        let dim = self.def.taxonomy.size();
        self.episode_events = roe_core::EventVector::zeros(dim);
        let seed = rng::derive_u64(self.seed, "demo-episode", self.episode);
        let (env, _) = reset_def(self.def.clone(), 1, seed).map_err(err_str)?;
        self.env = env;
        Ok(self.render())
    }
}

#[derive(Serialize)]
struct TrainView {
    step: u64,
    updates: u64,
    episodes: u64,
    mean_intrinsic: f64,
    entropy: f64,
    policy_loss: f64,
    value_loss: f64,
    mean_episode_score: Option<f64>,
    rarity: RarityView,
}

#[derive(Serialize)]
struct RolloutView {
    positions: Vec<(usize, usize)>,
    score: f64,
    ticks: u32,
    events: Vec<(String, u32)>,
    width: usize,
    height: usize,
    visitation: Vec<f64>,
}

/// In-browser synchronous actor-critic trainer on a down-sized scenario.
#[wasm_bindgen]
pub struct DemoTrainer {
    def: ScenarioDef,
    config: A2cConfig,
    mode: RewardMode,
    normalizer: RewardNormalizer,
    tau: f64,
    workers: Vec<Worker>,
    net: PolicyValueNet,
    buffer: EventBuffer,
    master_seed: u64,
    steps: u64,
    updates: u64,
    episodes: u64,
    score_window: Vec<f64>,
}

#[wasm_bindgen]
impl DemoTrainer {
    #[wasm_bindgen(constructor)]
    pub fn new(scenario: &str, mode: &str, seed: u32) -> Result<DemoTrainer, JsValue> {
        let scenario = Scenario::parse(scenario).map_err(err_str)?;
        let mode = RewardMode::parse(mode).map_err(err_str)?;
        // Down-sized episodes keep a browser frame responsive.
        let (w, h) = match scenario {
            Scenario::DeadlyCorridor => (13, 5),
            Scenario::Deathmatch => (11, 11),
            _ => (7, 7),
        };
        let def = build_def(scenario, Some(w), Some(h), Some(400), None).map_err(err_str)?;
        let master_seed = seed as u64;
        let config = A2cConfig {
            workers: 2,
            t_max: 20,
            ..Default::default()
        };
        let workers = (0..config.workers)
            .map(|i| Worker::new(i, def.clone(), 4, master_seed))
            .collect::<roe_core::Result<Vec<_>>>()
            .map_err(err_str)?;
        let mut net_config = NetConfig::compact(
            ObsShape { channels: OBS_CHANNELS, height: h, width: w },
            def.action_count(),
        );
        net_config.hidden_units = 64;
        let mut init_rng = rng::derive_rng(master_seed, "net-init", 0);
        let net = PolicyValueNet::new(net_config, &mut init_rng).map_err(err_str)?;
        let buffer = EventBuffer::new(def.taxonomy.clone(), 100).map_err(err_str)?;
        let normalizer = RewardNormalizer::for_def(&def, NormalizationMode::Affine01);
        Ok(DemoTrainer {
            def,
            config,
            mode,
            normalizer,
            tau: 0.01,
            workers,
            net,
            buffer,
            master_seed,
            steps: 0,
            updates: 0,
            episodes: 0,
            score_window: Vec::new(),
        })
    }

    /// Run `n` synchronous updates; returns the last update's diagnostics
    /// as JSON.
    pub fn run_updates(&mut self, n: u32) -> Result<String, JsValue> {
        let mut last = None;
        for _ in 0..n.max(1) {
            let snapshot = self.buffer.temporal_mean();
            let spec = match self.mode {
                RewardMode::Roe => RewardSpec::Roe { snapshot: &snapshot, tau: self.tau },
                RewardMode::ExtrinsicBaseline => {
                    RewardSpec::ExtrinsicBaseline { normalizer: &self.normalizer }
                }
            };
            let (trajectories, completed) =
                collect_segment(&mut self.workers, &self.net, &spec, self.config.t_max)
                    .map_err(err_str)?;
            let mut intrinsic_sum = 0.0;
            let mut count = 0usize;
            for t in &trajectories {
                for s in &t.steps {
                    intrinsic_sum += rarity_reward(&s.events, &snapshot, self.tau);
                    count += 1;
                }
            }
            for eps in completed {
                for ep in eps {
                    self.buffer.push_episode(ep.events).map_err(err_str)?;
                    self.score_window.push(ep.extrinsic_total);
                    if self.score_window.len() > 20 {
                        self.score_window.remove(0);
                    }
                    self.episodes += 1;
                }
            }
            let diag = update(
                &mut self.net,
                &trajectories,
                &self.config,
                self.master_seed,
                self.updates,
            )
            .map_err(err_str)?;
            self.steps += (self.config.workers * self.config.t_max) as u64;
            self.updates += 1;
            last = Some(TrainView {
                step: self.steps,
                updates: self.updates,
                episodes: self.episodes,
                mean_intrinsic: intrinsic_sum / count.max(1) as f64,
                entropy: diag.entropy,
                policy_loss: diag.policy_loss,
                value_loss: diag.value_loss,
                mean_episode_score: if self.score_window.is_empty() {
                    None
                } else {
                    Some(self.score_window.iter().sum::<f64>() / self.score_window.len() as f64)
                },
                rarity: rarity_view(&self.buffer, self.tau),
            });
        }
        Ok(serde_json::to_string(&last.expect("n >= 1")).expect("view serializes"))
    }

    /// Play one full episode with the current policy (stochastic sampling);
    /// returns positions, score, events, and the visitation grid as JSON.
    pub fn rollout(&mut self, seed: u32) -> Result<String, JsValue> {
        let env_seed = rng::derive_u64(self.master_seed, "demo-rollout", seed as u64);
        let mut action_rng = rng::derive_rng(self.master_seed, "demo-rollout-act", seed as u64);
        let (mut env, mut obs) = reset_def(self.def.clone(), 4, env_seed).map_err(err_str)?;
        let (width, height) = env.dims();
        let mut positions = vec![(env.agent().x, env.agent().y)];
        let mut visits = vec![0.0f64; width * height];
        let mut score = 0.0;
        let dim = self.def.taxonomy.size();
        let mut events = roe_core::EventVector::zeros(dim);
        while !env.is_done() {
            let (probs, _) = self.net.forward_single(&obs).map_err(err_str)?;
            let action = sample_action(&probs, &mut action_rng);
            let step = env.step(action).map_err(err_str)?;
            score += step.extrinsic_reward;
            events.add_assign(&step.events).map_err(err_str)?;
            positions.push(step.position);
            visits[step.position.1 * width + step.position.0] += 1.0;
            obs = step.observation;
        }
        let total: f64 = visits.iter().sum();
        if total > 0.0 {
            for v in visits.iter_mut() {
                *v /= total;
            }
        }
        let named: Vec<(String, u32)> = self
            .def
            .taxonomy
            .names()
            .iter()
            .enumerate()
            .filter(|(i, _)| events.get(*i) > 0)
            .map(|(i, n)| (n.clone(), events.get(i)))
            .collect();
        let view = RolloutView {
            positions,
            score,
            ticks: env.tick(),
            events: named,
            width,
            height,
            visitation: visits,
        };
        Ok(serde_json::to_string(&view).expect("view serializes"))
    }
}

/// Scenario metadata for the page controls, as JSON.
#[wasm_bindgen]
pub fn list_scenarios() -> String {
    #[derive(Serialize)]
    struct Info {
        name: &'static str,
        actions: usize,
        attack: bool,
        events: Vec<String>,
    }
    let infos: Vec<Info> = Scenario::ALL
        .into_iter()
        .map(|s| {
            let def = build_def(s, None, None, None, None).expect("built-in def");
            Info {
                name: s.name(),
                actions: def.action_count(),
                attack: def.attack_enabled,
                events: def.taxonomy.names().to_vec(),
            }
        })
        .collect();
    serde_json::to_string(&infos).expect("infos serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_env_plays_and_buffers_episodes() {
        let mut env = DemoEnv::new("health_gathering", 7).unwrap();
        assert_eq!(env.action_count(), 8);
        let mut episodes = 0;
        for _ in 0..3000 {
            let out = env.step(1).unwrap();
            let v: serde_json::Value = serde_json::from_str(&out).unwrap();
            episodes = v["episode"].as_u64().unwrap();
            if episodes >= 2 {
                break;
            }
        }
        assert!(episodes >= 2, "agent should die on acid and restart");
        let view: serde_json::Value = serde_json::from_str(&env.render()).unwrap();
        assert_eq!(view["width"], 11);
    }

    #[test]
    fn demo_trainer_improves_counters_and_rolls_out() {
        let mut trainer = DemoTrainer::new("health_gathering", "roe", 3).unwrap();
        let out = trainer.run_updates(3).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["updates"], 3);
        assert_eq!(v["step"], 3 * 2 * 20);
        let roll = trainer.rollout(0).unwrap();
        let r: serde_json::Value = serde_json::from_str(&roll).unwrap();
        assert!(r["positions"].as_array().unwrap().len() > 1);
        let visitation: f64 = r["visitation"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .sum();
        assert!((visitation - 1.0).abs() < 1e-9);
    }

    #[test]
    fn scenario_listing_is_complete() {
        let v: serde_json::Value = serde_json::from_str(&list_scenarios()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 5);
    }
}
