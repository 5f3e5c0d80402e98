//! Rarity-of-Events reinforcement learning laboratory.
//!
//! Events (item pickups, kills, movement, ...) are counted per step and
//! rewarded by the inverse of their episodic mean occurrence over a sliding
//! window of recent episodes, so frequent events pay little and rare events
//! pay a lot. The crate bundles everything needed to study the effect at desk
//! scale: the event taxonomy and reward ([`events`], [`reward`]), a seeded
//! deterministic gridworld scenario suite ([`env`]), a policy/value network
//! with hand-derived gradients ([`neural`]), a synchronous advantage
//! actor-critic trainer ([`a2c`]), and an experiment harness with
//! checkpointing, evaluation, heat maps, and the weapon-variant adaptation
//! study ([`harness`]).

pub mod a2c;
pub mod env;
pub mod error;
pub mod events;
pub mod harness;
pub mod neural;
pub mod reward;
pub mod rng;

pub use error::{Error, Result};
pub use events::{EventTaxonomy, EventVector};
pub use reward::{EventBuffer, RoeConfig};
