//! Policy evaluation, visitation heat maps, and the adaptation study.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::env::{reset_def, Scenario, WeaponVariant};
use crate::error::{Error, Result};
use crate::events::{EventTaxonomy, EventVector};
use crate::neural::sample_action;
use crate::rng;

use super::{Checkpoint, RunConfig};

/// Proportional time spent at each cell, row-major; entries sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitationGrid {
    pub width: usize,
    pub height: usize,
    pub proportions: Vec<f64>,
}

/// Result of evaluating one checkpoint on one scenario or variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: Scenario,
    pub variant: Option<WeaponVariant>,
    pub episodes: usize,
    pub seed: u64,
    /// Mean raw extrinsic episode score.
    pub mean: f64,
    /// Sample standard deviation of episode scores.
    pub std: f64,
    pub mean_episode_ticks: f64,
    pub taxonomy: EventTaxonomy,
    /// Per-event mean occurrences per episode.
    pub per_event_means: Vec<f64>,
    pub episode_scores: Vec<f64>,
    pub episode_ticks: Vec<u32>,
    pub episode_events: Vec<EventVector>,
    pub visitation: VisitationGrid,
}

impl EvalReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<EvalReport> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Run `episodes` stochastic-policy episodes with fresh seeds and collect
/// score, event, and visitation statistics. The checkpoint is read-only.
pub fn evaluate(
    checkpoint: &Checkpoint,
    scenario: Scenario,
    variant: Option<WeaponVariant>,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::config("evaluation needs at least one episode"));
    }
    // Evaluate on the requested scenario with the run's environment
    // overrides (dimensions, action repeat, episode cap).
    let mut eval_config = RunConfig {
        scenario,
        variant,
        scenario_file: checkpoint.run_config.scenario_file.clone(),
        ..checkpoint.run_config.clone()
    };
    eval_config.variant = variant;
    let def = eval_config.def()?;
    let net_config = eval_config.net_config(&def);
    if *checkpoint.net.config() != net_config {
        return Err(Error::config(format!(
            "checkpoint architecture does not match {}: {} actions on {}x{} observations required",
            def.name,
            def.action_count(),
            def.height(),
            def.width(),
        )));
    }

    let dim = def.taxonomy.size();
    let mut episode_scores = Vec::with_capacity(episodes);
    let mut episode_ticks = Vec::with_capacity(episodes);
    let mut episode_events = Vec::with_capacity(episodes);
    let mut visits = vec![0u64; def.width() * def.height()];
    let mut ticks_counted = 0u64;
    for e in 0..episodes {
        let env_seed = rng::derive_u64(seed, "eval-env", e as u64);
        let mut action_rng = rng::derive_rng(seed, "eval-act", e as u64);
        let (mut env, mut obs) = reset_def(def.clone(), eval_config.action_repeat, env_seed)?;
        let mut score = 0.0;
        let mut events = EventVector::zeros(dim);
        loop {
            let (probs, _) = checkpoint.net.forward_single(&obs)?;
            let action = sample_action(&probs, &mut action_rng);
            let step = env.step(action)?;
            score += step.extrinsic_reward;
            events.add_assign(&step.events)?;
            for &(x, y) in &step.tick_positions {
                visits[y * def.width() + x] += 1;
            }
            ticks_counted += step.tick_positions.len() as u64;
            if step.done {
                break;
            }
            obs = step.observation;
        }
        episode_scores.push(score);
        episode_ticks.push(env.tick());
        episode_events.push(events);
    }

    let n = episodes as f64;
    let mean = episode_scores.iter().sum::<f64>() / n;
    let var = if episodes > 1 {
        episode_scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let per_event_means: Vec<f64> = (0..dim)
        .map(|i| episode_events.iter().map(|ev| ev.get(i) as f64).sum::<f64>() / n)
        .collect();
    let proportions: Vec<f64> = visits
        .iter()
        .map(|&v| v as f64 / ticks_counted as f64)
        .collect();
    Ok(EvalReport {
        scenario,
        variant,
        episodes,
        seed,
        mean,
        std: var.sqrt(),
        mean_episode_ticks: episode_ticks.iter().map(|&t| t as f64).sum::<f64>() / n,
        taxonomy: def.taxonomy.clone(),
        per_event_means,
        episode_scores,
        episode_ticks,
        episode_events,
        visitation: VisitationGrid {
            width: def.width(),
            height: def.height(),
            proportions,
        },
    })
}

/// Write the visitation grid as CSV (raw proportions) and a PGM image with
/// values clipped at `clip` (defaults to 0.025 in the CLI).
pub fn heatmap_export(
    report: &EvalReport,
    clip: f64,
    csv_path: &Path,
    pgm_path: &Path,
) -> Result<()> {
    if !(clip > 0.0) {
        return Err(Error::config("heat map clip must be positive"));
    }
    let grid = &report.visitation;
    if let Some(parent) = csv_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut csv = std::io::BufWriter::new(std::fs::File::create(csv_path)?);
    for y in 0..grid.height {
        let row: Vec<String> = (0..grid.width)
            .map(|x| grid.proportions[y * grid.width + x].to_string())
            .collect();
        writeln!(csv, "{}", row.join(","))?;
    }
    csv.flush()?;

    if let Some(parent) = pgm_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut pgm = Vec::with_capacity(grid.width * grid.height + 32);
    write!(pgm, "P5\n{} {}\n255\n", grid.width, grid.height)?;
    for &p in &grid.proportions {
        let v = (p.min(clip) / clip * 255.0).round() as u8;
        pgm.push(v);
    }
    std::fs::write(pgm_path, pgm)?;
    Ok(())
}

/// Welch's two-sample t-test; returns `(t, two_sided_p)`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> (f64, f64) {
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let ma = a.iter().sum::<f64>() / na;
    let mb = b.iter().sum::<f64>() / nb;
    let va = a.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / (na - 1.0);
    let vb = b.iter().map(|x| (x - mb) * (x - mb)).sum::<f64>() / (nb - 1.0);
    let se2 = va / na + vb / nb;
    if se2 <= 0.0 {
        // Degenerate samples: identical constants.
        return if ma == mb { (0.0, 1.0) } else { (f64::INFINITY, 0.0) };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    (t, p)
}

/// One row of the adaptation comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantComparison {
    pub variant: WeaponVariant,
    pub roe_mean: f64,
    pub roe_std: f64,
    pub baseline_mean: f64,
    pub baseline_std: f64,
    pub t_statistic: f64,
    pub p_value: f64,
}

/// Comparison of two arena-trained policies across the five single-weapon
/// variants they were never trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationReport {
    pub episodes_per_variant: usize,
    pub seed: u64,
    pub rows: Vec<VariantComparison>,
}

impl AdaptationReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Variants where the first (RoE) arm's mean beats the baseline's.
    pub fn roe_wins(&self) -> usize {
        self.rows.iter().filter(|r| r.roe_mean > r.baseline_mean).count()
    }
}

/// Evaluate two arena-trained checkpoints on every single-weapon variant
/// (100 episodes each by default) and report means, deviations, and Welch
/// t-statistics.
pub fn adaptation_study(
    roe_checkpoint: &Checkpoint,
    baseline_checkpoint: &Checkpoint,
    episodes: usize,
    seed: u64,
) -> Result<AdaptationReport> {
    for (label, ckpt) in [("first", roe_checkpoint), ("second", baseline_checkpoint)] {
        if ckpt.run_config.scenario != Scenario::Deathmatch
            || ckpt.run_config.variant.is_some()
            || ckpt.run_config.scenario_file.is_some()
        {
            return Err(Error::config(format!(
                "{label} checkpoint was not trained on the base deathmatch scenario"
            )));
        }
    }
    let mut rows = Vec::new();
    for variant in WeaponVariant::ALL {
        let roe = evaluate(roe_checkpoint, Scenario::Deathmatch, Some(variant), episodes, seed)?;
        let base = evaluate(
            baseline_checkpoint,
            Scenario::Deathmatch,
            Some(variant),
            episodes,
            seed.wrapping_add(1),
        )?;
        let (t, p) = welch_t_test(&roe.episode_scores, &base.episode_scores);
        rows.push(VariantComparison {
            variant,
            roe_mean: roe.mean,
            roe_std: roe.std,
            baseline_mean: base.mean,
            baseline_std: base.std,
            t_statistic: t,
            p_value: p,
        });
    }
    Ok(AdaptationReport {
        episodes_per_variant: episodes,
        seed,
        rows,
    })
}
