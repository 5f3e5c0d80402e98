//! Checkpoint container: everything needed to resume a run exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::a2c::Worker;
use crate::error::{Error, Result};
use crate::neural::PolicyValueNet;
use crate::reward::EventBuffer;

use super::RunConfig;

pub const CHECKPOINT_FORMAT: &str = "roe-rl-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Best-so-far sliding-window mean extrinsic episode reward and the
/// training step it was recorded at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestStat {
    pub mean: f64,
    pub step: u64,
}

/// Self-describing run snapshot: configuration, network parameters and
/// optimizer state, worker environments and RNG streams mid-episode, the
/// event buffer, and progress counters. JSON round-trips are exact, so a
/// resumed run is bit-identical to an uninterrupted one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub run_config: RunConfig,
    pub net: PolicyValueNet,
    pub workers: Vec<Worker>,
    pub event_buffer: EventBuffer,
    pub update_index: u64,
    pub steps_collected: u64,
    pub best: Option<BestStat>,
    pub new_episodes_since_check: bool,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::config(format!(
                "not a checkpoint file: format tag `{}`",
                ckpt.format
            )));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::config(format!(
                "unsupported checkpoint version {} (expected {})",
                ckpt.version, CHECKPOINT_VERSION
            )));
        }
        Ok(ckpt)
    }
}
