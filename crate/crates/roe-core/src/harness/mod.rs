//! Experiment orchestration: training runs with best-checkpoint selection,
//! reward normalization, CSV diagnostics and event traces, evaluation, heat
//! maps, and the weapon-variant adaptation study.
//!
//! A run directory looks like:
//!
//! ```text
//! <out>/
//!   config.json
//!   checkpoints/{best.json, final.json, step_<k>.json}
//!   logs/{diagnostics.csv, events.csv}
//!   eval/{report.json, heatmap.csv, heatmap.pgm}
//! ```

mod checkpoint;
mod eval;
mod logs;

pub use checkpoint::{BestStat, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use eval::{
    adaptation_study, evaluate, heatmap_export, welch_t_test, AdaptationReport, EvalReport,
    VariantComparison, VisitationGrid,
};
pub use logs::{read_csv_column, CsvLog, DIAGNOSTICS_COLUMNS};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::a2c::{collect_segment, update, A2cConfig, RewardMode, RewardSpec, Worker};
use crate::env::{
    build_def, KillRewardRescale, Scenario, ScenarioDef, WeaponVariant, OBS_CHANNELS,
};
use crate::error::{Error, Result};
use crate::neural::{LossCoefficients, NetConfig, ObsShape, PolicyValueNet};
use crate::reward::{rarity_reward, EventBuffer, RoeConfig};
use crate::rng;

/// How raw extrinsic rewards are squashed for the baseline learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Affine map from [-100, 100] to [0, 1].
    Affine01,
    /// Divide by 100 into [-1, 1].
    Scale100,
}

/// Scenario-aware extrinsic reward normalizer. Arena kill rewards above the
/// rescale threshold are first divided down into the common [-100, 100]
/// band (and clamped there, for the rare multi-kill step), then mapped by
/// the configured mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardNormalizer {
    pub mode: NormalizationMode,
    pub declared_range: (f64, f64),
    pub rescale: Option<KillRewardRescale>,
}

impl RewardNormalizer {
    pub fn for_def(def: &ScenarioDef, mode: NormalizationMode) -> Self {
        RewardNormalizer {
            mode,
            declared_range: def.declared_reward_range,
            rescale: def.kill_reward_rescale,
        }
    }

    /// Normalize one step's raw extrinsic reward.
    pub fn normalize(&self, raw: f64) -> Result<f64> {
        let (lo, hi) = self.declared_range;
        if raw < lo - 1e-9 || raw > hi + 1e-9 {
            return Err(Error::contract(format!(
                "raw reward {raw} outside declared range [{lo}, {hi}]"
            )));
        }
        let mut v = raw;
        if let Some(r) = self.rescale {
            if v > r.threshold {
                v /= r.divisor;
            }
        }
        v = v.clamp(-100.0, 100.0);
        Ok(match self.mode {
            NormalizationMode::Affine01 => (v + 100.0) / 200.0,
            NormalizationMode::Scale100 => v / 100.0,
        })
    }
}

/// Complete description of one training run. JSON keys default to the
/// canonical hyperparameters, so an empty config file is a valid run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub variant: Option<WeaponVariant>,
    /// Custom scenario definition JSON; overrides `scenario` when set.
    pub scenario_file: Option<PathBuf>,
    pub mode: RewardMode,
    /// Total environment transitions fed to the learner.
    pub total_steps: u64,
    pub master_seed: u64,
    pub out_dir: PathBuf,

    // Learner hyperparameters.
    pub learning_rate: f64,
    pub gamma: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    /// Worker threads; defaults to 4 (16 in deathmatch).
    pub workers: Option<usize>,
    pub t_max: usize,
    pub batch_size: usize,
    pub rmsprop_eps: f64,
    pub rmsprop_alpha: f64,

    // Rarity-of-events reward.
    pub buffer_capacity: usize,
    pub tau: f64,

    // Environment overrides.
    pub action_repeat: u32,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub max_ticks: Option<u32>,

    // Network.
    pub hidden_units: Option<usize>,

    // Harness behavior.
    pub reward_norm: NormalizationMode,
    /// Sliding window of completed episodes per worker for the
    /// best-checkpoint statistic.
    pub best_window: usize,
    /// Also save `step_<k>.json` checkpoints every this many updates.
    pub checkpoint_every_updates: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: Scenario::HealthGathering,
            variant: None,
            scenario_file: None,
            mode: RewardMode::Roe,
            total_steps: 200_000,
            master_seed: 0,
            out_dir: PathBuf::from("runs/default"),
            learning_rate: 7e-4,
            gamma: 0.99,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            workers: None,
            t_max: 20,
            batch_size: 64,
            rmsprop_eps: 1e-5,
            rmsprop_alpha: 0.99,
            buffer_capacity: 100,
            tau: 0.01,
            action_repeat: 4,
            width: None,
            height: None,
            max_ticks: None,
            hidden_units: None,
            reward_norm: NormalizationMode::Affine01,
            best_window: 10,
            checkpoint_every_updates: None,
        }
    }
}

impl RunConfig {
    pub fn effective_workers(&self) -> usize {
        self.workers.unwrap_or(match self.scenario {
            Scenario::Deathmatch => 16,
            _ => 4,
        })
    }

    pub fn a2c(&self) -> A2cConfig {
        A2cConfig {
            gamma: self.gamma,
            t_max: self.t_max,
            workers: self.effective_workers(),
            batch_size: self.batch_size,
            coefs: LossCoefficients {
                value_coef: self.value_coef,
                entropy_coef: self.entropy_coef,
                max_grad_norm: self.max_grad_norm,
                learning_rate: self.learning_rate,
            },
            rmsprop_alpha: self.rmsprop_alpha,
            rmsprop_eps: self.rmsprop_eps,
        }
    }

    pub fn roe(&self) -> RoeConfig {
        RoeConfig {
            tau: self.tau,
            buffer_capacity: self.buffer_capacity,
        }
    }

    /// Resolve the scenario definition (built-in or from file).
    pub fn def(&self) -> Result<ScenarioDef> {
        if let Some(path) = &self.scenario_file {
            let text = std::fs::read_to_string(path)?;
            let mut def = ScenarioDef::from_json(&text)?;
            if let Some(t) = self.max_ticks {
                def.max_ticks = t;
            }
            if self.variant.is_some() {
                return Err(Error::config(
                    "weapon variants are not supported with scenario_file",
                ));
            }
            Ok(def)
        } else {
            build_def(self.scenario, self.width, self.height, self.max_ticks, self.variant)
        }
    }

    pub fn net_config(&self, def: &ScenarioDef) -> NetConfig {
        let shape = ObsShape {
            channels: OBS_CHANNELS,
            height: def.height(),
            width: def.width(),
        };
        let mut cfg = NetConfig::compact(shape, def.action_count());
        if let Some(h) = self.hidden_units {
            cfg.hidden_units = h;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.a2c().validate()?;
        self.roe().validate()?;
        let workers = self.effective_workers() as u64;
        if self.total_steps < workers * self.t_max as u64 {
            return Err(Error::config(format!(
                "total_steps {} is less than one segment ({} workers x {} steps)",
                self.total_steps, workers, self.t_max
            )));
        }
        if self.best_window < 1 {
            return Err(Error::config("best_window must be >= 1"));
        }
        let def = self.def()?;
        self.net_config(&def).validate()?;
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<RunConfig> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Paths of the artifacts a training run produces.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub run_dir: PathBuf,
    pub best_checkpoint: Option<PathBuf>,
    pub final_checkpoint: PathBuf,
    pub diagnostics_csv: PathBuf,
    pub events_csv: PathBuf,
    pub updates: u64,
}

/// Decide whether the current sliding-window mean beats the best seen so
/// far; ties keep the earlier checkpoint.
pub fn checkpoint_if_improved(current: f64, best_so_far: f64) -> bool {
    current > best_so_far
}

fn run_paths(dir: &Path) -> (PathBuf, PathBuf, PathBuf, PathBuf, PathBuf) {
    (
        dir.join("checkpoints"),
        dir.join("logs"),
        dir.join("logs/diagnostics.csv"),
        dir.join("logs/events.csv"),
        dir.join("config.json"),
    )
}

/// Train from scratch according to `config`.
pub fn train(config: &RunConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let def = config.def()?;
    let workers = (0..config.effective_workers())
        .map(|i| Worker::new(i, def.clone(), config.action_repeat, config.master_seed))
        .collect::<Result<Vec<_>>>()?;
    let buffer = EventBuffer::new(def.taxonomy.clone(), config.buffer_capacity)?;
    let mut init_rng = rng::derive_rng(config.master_seed, "net-init", 0);
    let net = PolicyValueNet::new(config.net_config(&def), &mut init_rng)?;
    let state = Checkpoint {
        format: CHECKPOINT_FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        run_config: config.clone(),
        net,
        workers,
        event_buffer: buffer,
        update_index: 0,
        steps_collected: 0,
        best: None,
        new_episodes_since_check: false,
    };

    let (ckpt_dir, logs_dir, diag_path, events_path, config_path) = run_paths(&config.out_dir);
    std::fs::create_dir_all(&ckpt_dir)?;
    std::fs::create_dir_all(&logs_dir)?;
    std::fs::write(&config_path, config.to_json_pretty()?)?;
    let mut diag = CsvLog::create(&diag_path, DIAGNOSTICS_COLUMNS)?;
    let event_columns: Vec<String> = std::iter::once("step".to_string())
        .chain(def.taxonomy.names().iter().cloned())
        .collect();
    let mut events = CsvLog::create_owned(&events_path, &event_columns)?;
    run_loop(state, &mut diag, &mut events)
}

/// Resume a run from a checkpoint file; subsequent diagnostics are
/// identical to an uninterrupted run. Log rows past the checkpoint are
/// truncated before appending.
pub fn resume(checkpoint_path: &Path) -> Result<RunArtifacts> {
    let state = Checkpoint::load(checkpoint_path)?;
    let config = state.run_config.clone();
    let (ckpt_dir, logs_dir, diag_path, events_path, config_path) = run_paths(&config.out_dir);
    std::fs::create_dir_all(&ckpt_dir)?;
    std::fs::create_dir_all(&logs_dir)?;
    std::fs::write(&config_path, config.to_json_pretty()?)?;
    let def = config.def()?;
    let event_columns: Vec<String> = std::iter::once("step".to_string())
        .chain(def.taxonomy.names().iter().cloned())
        .collect();
    let mut diag =
        CsvLog::open_truncated(&diag_path, DIAGNOSTICS_COLUMNS, state.update_index as usize)?;
    let mut events =
        CsvLog::open_truncated_owned(&events_path, &event_columns, state.update_index as usize)?;
    run_loop(state, &mut diag, &mut events)
}

fn run_loop(
    mut state: Checkpoint,
    diag: &mut CsvLog,
    events: &mut CsvLog,
) -> Result<RunArtifacts> {
    let config = state.run_config.clone();
    let def = config.def()?;
    let a2c_config = config.a2c();
    let normalizer = RewardNormalizer::for_def(&def, config.reward_norm);
    let (ckpt_dir, _, diag_path, events_path, _) = run_paths(&config.out_dir);
    let best_path = ckpt_dir.join("best.json");
    let final_path = ckpt_dir.join("final.json");
    let segment = (a2c_config.workers * a2c_config.t_max) as u64;

    while state.steps_collected < config.total_steps {
        let snapshot = state.event_buffer.temporal_mean();
        let spec = match config.mode {
            RewardMode::Roe => RewardSpec::Roe {
                snapshot: &snapshot,
                tau: config.tau,
            },
            RewardMode::ExtrinsicBaseline => RewardSpec::ExtrinsicBaseline {
                normalizer: &normalizer,
            },
        };
        let (trajectories, completed) =
            collect_segment(&mut state.workers, &state.net, &spec, a2c_config.t_max)?;

        // Mean intrinsic reward over the segment, in both modes (diagnostic
        // only; the baseline learner never sees it).
        let mut intrinsic_sum = 0.0;
        let mut transitions = 0usize;
        for t in &trajectories {
            for s in &t.steps {
                intrinsic_sum += rarity_reward(&s.events, &snapshot, config.tau);
                transitions += 1;
            }
        }
        let mean_intrinsic = intrinsic_sum / transitions as f64;

        // Join phase: buffer pushes and score windows, in worker order.
        for (worker, eps) in state.workers.iter_mut().zip(completed.into_iter()) {
            for ep in eps {
                state.event_buffer.push_episode(ep.events)?;
                worker.recent_scores.push(ep.extrinsic_total);
                let excess = worker.recent_scores.len().saturating_sub(config.best_window);
                if excess > 0 {
                    worker.recent_scores.drain(..excess);
                }
                state.new_episodes_since_check = true;
            }
        }

        let diagnostics = update(
            &mut state.net,
            &trajectories,
            &a2c_config,
            config.master_seed,
            state.update_index,
        )?;
        state.steps_collected += segment;
        state.update_index += 1;

        // Sliding mean extrinsic episode reward across all workers; defined
        // once every worker has completed at least one episode.
        let stat = if state.workers.iter().all(|w| !w.recent_scores.is_empty()) {
            let per_worker: f64 = state
                .workers
                .iter()
                .map(|w| w.recent_scores.iter().sum::<f64>() / w.recent_scores.len() as f64)
                .sum();
            Some(per_worker / state.workers.len() as f64)
        } else {
            None
        };

        if let Some(current) = stat {
            if state.new_episodes_since_check {
                state.new_episodes_since_check = false;
                let best_so_far = state.best.map_or(f64::NEG_INFINITY, |b| b.mean);
                if checkpoint_if_improved(current, best_so_far) {
                    state.best = Some(BestStat {
                        mean: current,
                        step: state.steps_collected,
                    });
                    state.save(&best_path)?;
                }
            }
        }

        diag.write_row(&[
            logs::field(state.steps_collected),
            stat.map(logs::field).unwrap_or_default(),
            logs::field(mean_intrinsic),
            logs::field(diagnostics.policy_loss),
            logs::field(diagnostics.value_loss),
            logs::field(diagnostics.entropy),
            logs::field(diagnostics.grad_norm),
        ])?;
        let mut row = vec![logs::field(state.steps_collected)];
        row.extend(state.event_buffer.temporal_mean().into_iter().map(logs::field));
        events.write_row(&row)?;

        if let Some(every) = config.checkpoint_every_updates {
            if every > 0 && state.update_index % every == 0 {
                state.save(&ckpt_dir.join(format!("step_{}.json", state.steps_collected)))?;
            }
        }
    }
    diag.flush()?;
    events.flush()?;
    state.save(&final_path)?;
    Ok(RunArtifacts {
        run_dir: config.out_dir.clone(),
        best_checkpoint: best_path.exists().then_some(best_path),
        final_checkpoint: final_path,
        diagnostics_csv: diag_path,
        events_csv: events_path,
        updates: state.update_index,
    })
}

#[cfg(test)]
mod tests;
