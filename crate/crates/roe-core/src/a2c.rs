//! Synchronous advantage actor-critic.
//!
//! Workers step their own environments concurrently for `t_max` steps
//! against a read-only parameter snapshot (fork), then a single batched
//! update applies the n-step policy/value losses (join). Episodes restart
//! per worker as they terminate; the per-episode event vectors they produce
//! are handed back for the event buffer in worker order so runs stay
//! deterministic.

use rand::Rng as _;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{reset_def, EnvState, Observation, ScenarioDef};
use crate::error::{Error, Result};
use crate::events::EventVector;
use crate::harness::RewardNormalizer;
use crate::neural::{
    clip_grad_norm, loss_and_gradients, rmsprop_step, sample_action, LossBatch, LossCoefficients,
    PolicyValueNet,
};
use crate::reward::rarity_reward;
use crate::rng;

/// Which reward stream the learner consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Normalized extrinsic environment reward.
    ExtrinsicBaseline,
    /// Rarity-of-events intrinsic reward; the extrinsic reward is recorded
    /// for checkpoint selection but never fed to the learner.
    Roe,
}

impl RewardMode {
    pub fn name(&self) -> &'static str {
        match self {
            RewardMode::ExtrinsicBaseline => "extrinsic_baseline",
            RewardMode::Roe => "roe",
        }
    }

    pub fn parse(name: &str) -> Result<RewardMode> {
        match name {
            "extrinsic_baseline" | "extrinsic" | "baseline" => Ok(RewardMode::ExtrinsicBaseline),
            "roe" => Ok(RewardMode::Roe),
            other => Err(Error::config(format!("unknown reward mode `{other}`"))),
        }
    }
}

/// Provenance tag carried by every trajectory so tests can verify the
/// learner's reward stream contains no extrinsic term in RoE mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardSource {
    Intrinsic,
    NormalizedExtrinsic,
}

/// Reward computation for one collection segment; the RoE snapshot is
/// frozen for the whole segment.
pub enum RewardSpec<'a> {
    Roe { snapshot: &'a [f64], tau: f64 },
    ExtrinsicBaseline { normalizer: &'a RewardNormalizer },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct A2cConfig {
    pub gamma: f64,
    /// Steps collected per worker between updates.
    pub t_max: usize,
    pub workers: usize,
    pub batch_size: usize,
    pub coefs: LossCoefficients,
    pub rmsprop_alpha: f64,
    pub rmsprop_eps: f64,
}

impl Default for A2cConfig {
    fn default() -> Self {
        A2cConfig {
            gamma: 0.99,
            t_max: 20,
            workers: 4,
            batch_size: 64,
            coefs: LossCoefficients::default(),
            rmsprop_alpha: 0.99,
            rmsprop_eps: 1e-5,
        }
    }
}

impl A2cConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(format!("gamma must be in (0, 1], got {}", self.gamma)));
        }
        if self.t_max < 1 || self.workers < 1 || self.batch_size < 1 {
            return Err(Error::config("t_max, workers, and batch_size must be >= 1"));
        }
        Ok(())
    }
}

/// One transition: the observation the action was chosen from, the action,
/// the learner reward, and everything logged alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub observation: Observation,
    pub action: usize,
    /// Learner reward (intrinsic in RoE mode, normalized extrinsic in
    /// baseline mode).
    pub reward: f64,
    /// Raw extrinsic reward, always recorded.
    pub extrinsic_raw: f64,
    pub value_estimate: f64,
    pub done: bool,
    pub events: EventVector,
    pub position: (usize, usize),
}

/// One worker's slice of a collection segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    /// Value estimate of the state after the last step; zero when that
    /// state is terminal.
    pub bootstrap_value: f64,
    pub reward_source: RewardSource,
}

/// Episode statistics handed to the harness when a worker's episode ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletedEpisode {
    pub events: EventVector,
    pub extrinsic_total: f64,
    pub ticks: u32,
}

/// A rollout worker: an environment, an action-sampling stream, and the
/// running accumulators of the episode in flight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Worker {
    pub index: usize,
    master_seed: u64,
    def: ScenarioDef,
    action_repeat: u32,
    pub env: EnvState,
    action_rng: ChaCha8Rng,
    episode_events: EventVector,
    episode_extrinsic: f64,
    episodes_started: u64,
    /// Extrinsic totals of this worker's most recent completed episodes
    /// (trimmed by the harness to its sliding-window length).
    pub recent_scores: Vec<f64>,
}

impl Worker {
    pub fn new(
        index: usize,
        def: ScenarioDef,
        action_repeat: u32,
        master_seed: u64,
    ) -> Result<Worker> {
        let episode_seed = episode_seed(master_seed, index, 0);
        let (env, _) = reset_def(def.clone(), action_repeat, episode_seed)?;
        let dim = def.taxonomy.size();
        Ok(Worker {
            index,
            master_seed,
            def,
            action_repeat,
            env,
            action_rng: rng::derive_rng(master_seed, "action", index as u64),
            episode_events: EventVector::zeros(dim),
            episode_extrinsic: 0.0,
            episodes_started: 1,
            recent_scores: Vec::new(),
        })
    }

    fn finish_episode(&mut self) -> Result<CompletedEpisode> {
        let dim = self.def.taxonomy.size();
        let done = CompletedEpisode {
            events: std::mem::replace(&mut self.episode_events, EventVector::zeros(dim)),
            extrinsic_total: self.episode_extrinsic,
            ticks: self.env.tick(),
        };
        self.episode_extrinsic = 0.0;
        let seed = episode_seed(self.master_seed, self.index, self.episodes_started);
        let (env, _) = reset_def(self.def.clone(), self.action_repeat, seed)?;
        self.env = env;
        self.episodes_started += 1;
        Ok(done)
    }
}

fn episode_seed(master_seed: u64, worker: usize, episode: u64) -> u64 {
    rng::derive_u64(master_seed, "episode", ((worker as u64) << 40) ^ episode)
}

fn segment_reward(spec: &RewardSpec<'_>, events: &EventVector, extrinsic_raw: f64) -> Result<f64> {
    match spec {
        RewardSpec::Roe { snapshot, tau } => Ok(rarity_reward(events, snapshot, *tau)),
        RewardSpec::ExtrinsicBaseline { normalizer } => normalizer.normalize(extrinsic_raw),
    }
}

/// Advance every worker exactly `t_max` steps against a frozen parameter
/// snapshot, restarting episodes as they end. Returns one trajectory per
/// worker plus the episodes completed along the way, both in worker order.
pub fn collect_segment(
    workers: &mut [Worker],
    net: &PolicyValueNet,
    reward: &RewardSpec<'_>,
    t_max: usize,
) -> Result<(Vec<Trajectory>, Vec<Vec<CompletedEpisode>>)> {
    let source = match reward {
        RewardSpec::Roe { .. } => RewardSource::Intrinsic,
        RewardSpec::ExtrinsicBaseline { .. } => RewardSource::NormalizedExtrinsic,
    };
    let results: Vec<Result<(Trajectory, Vec<CompletedEpisode>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = workers
            .iter_mut()
            .map(|worker| {
                scope.spawn(move || worker_pass(worker, net, reward, t_max, source))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect()
    });
    let mut trajectories = Vec::with_capacity(results.len());
    let mut completed = Vec::with_capacity(results.len());
    for r in results {
        let (t, c) = r?;
        trajectories.push(t);
        completed.push(c);
    }
    Ok((trajectories, completed))
}

fn worker_pass(
    worker: &mut Worker,
    net: &PolicyValueNet,
    reward: &RewardSpec<'_>,
    t_max: usize,
    source: RewardSource,
) -> Result<(Trajectory, Vec<CompletedEpisode>)> {
    let mut steps = Vec::with_capacity(t_max);
    let mut completed = Vec::new();
    let mut obs = worker.env.observation();
    for _ in 0..t_max {
        let (probs, value) = net.forward_single(&obs)?;
        let action = sample_action(&probs, &mut worker.action_rng);
        let step = worker.env.step(action)?;
        let r = segment_reward(reward, &step.events, step.extrinsic_reward)?;
        worker.episode_events.add_assign(&step.events)?;
        worker.episode_extrinsic += step.extrinsic_reward;
        let done = step.done;
        steps.push(StepRecord {
            observation: obs,
            action,
            reward: r,
            extrinsic_raw: step.extrinsic_reward,
            value_estimate: value,
            done,
            events: step.events,
            position: step.position,
        });
        if done {
            completed.push(worker.finish_episode()?);
            obs = worker.env.observation();
        } else {
            obs = step.observation;
        }
    }
    let bootstrap_value = if steps.last().map_or(true, |s| s.done) {
        0.0
    } else {
        net.forward_single(&obs)?.1
    };
    Ok((
        Trajectory {
            steps,
            bootstrap_value,
            reward_source: source,
        },
        completed,
    ))
}

/// Backward-recursive n-step returns: `R_t = r_t + gamma * R_{t+1}`, seeded
/// with the bootstrap value and reset to zero across terminal boundaries.
pub fn compute_returns(trajectory: &Trajectory, gamma: f64) -> Vec<f64> {
    let mut returns = vec![0.0; trajectory.steps.len()];
    let mut acc = trajectory.bootstrap_value;
    for (t, step) in trajectory.steps.iter().enumerate().rev() {
        if step.done {
            acc = 0.0;
        }
        acc = step.reward + gamma * acc;
        returns[t] = acc;
    }
    returns
}

/// Elementwise advantage `A_t = R_t - V(s_t)`.
pub fn compute_advantages(returns: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    if returns.len() != values.len() {
        return Err(Error::contract(format!(
            "returns and values length mismatch: {} vs {}",
            returns.len(),
            values.len()
        )));
    }
    Ok(returns.iter().zip(values.iter()).map(|(r, v)| r - v).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateDiagnostics {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Mean pre-clip global gradient norm over the segment's minibatches.
    pub grad_norm: f64,
    /// Mean learner reward over the segment's transitions.
    pub mean_reward: f64,
}

/// One synchronous update: the segment's transitions are shuffled
/// deterministically, split into minibatches of at most `batch_size` (the
/// final partial batch is processed as-is), and each minibatch applies one
/// clipped RMSprop step.
pub fn update(
    net: &mut PolicyValueNet,
    trajectories: &[Trajectory],
    config: &A2cConfig,
    master_seed: u64,
    update_index: u64,
) -> Result<UpdateDiagnostics> {
    config.validate()?;
    if trajectories.is_empty() {
        return Err(Error::contract("update needs at least one trajectory"));
    }
    let mut observations: Vec<&Observation> = Vec::new();
    let mut actions: Vec<usize> = Vec::new();
    let mut returns: Vec<f64> = Vec::new();
    let mut reward_sum = 0.0;
    for trajectory in trajectories {
        let rs = compute_returns(trajectory, config.gamma);
        for (step, r) in trajectory.steps.iter().zip(rs) {
            observations.push(&step.observation);
            actions.push(step.action);
            returns.push(r);
            reward_sum += step.reward;
        }
    }
    let n = observations.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = rng::derive_rng(master_seed, "shuffle", update_index);
    for i in (1..n).rev() {
        let j = shuffle_rng.gen_range(0..=i);
        order.swap(i, j);
    }

    let mut total = UpdateDiagnostics {
        loss: 0.0,
        policy_loss: 0.0,
        value_loss: 0.0,
        entropy: 0.0,
        grad_norm: 0.0,
        mean_reward: reward_sum / n as f64,
    };
    let mut batches = 0.0;
    for chunk in order.chunks(config.batch_size) {
        let batch_actions: Vec<usize> = chunk.iter().map(|&i| actions[i]).collect();
        let batch_returns: Vec<f64> = chunk.iter().map(|&i| returns[i]).collect();
        let batch = LossBatch {
            observations: chunk.iter().map(|&i| observations[i]).collect(),
            actions: &batch_actions,
            returns: &batch_returns,
        };
        let (loss, mut grad, diag) = loss_and_gradients(net, &batch, &config.coefs)?;
        let norm = clip_grad_norm(&mut grad, config.coefs.max_grad_norm);
        rmsprop_step(
            net,
            &grad,
            config.coefs.learning_rate,
            config.rmsprop_alpha,
            config.rmsprop_eps,
        )?;
        total.loss += loss;
        total.policy_loss += diag.policy_loss;
        total.value_loss += diag.value_loss;
        total.entropy += diag.entropy;
        total.grad_norm += norm;
        batches += 1.0;
    }
    total.loss /= batches;
    total.policy_loss /= batches;
    total.value_loss /= batches;
    total.entropy /= batches;
    total.grad_norm /= batches;
    Ok(total)
}
