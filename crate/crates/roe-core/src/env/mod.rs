//! Deterministic, seeded gridworld scenarios with per-step event detection.
//!
//! Episodes are exact functions of `(config, seed, action sequence)`. A step
//! applies one combined action for `action_repeat` ticks; each tick runs
//! agent turn, agent attack, agent move (with pickups), enemy actions,
//! respawns, and floor hazards, in that order. Events are detected by
//! diffing consecutive states at tick granularity and accumulated over the
//! step.

pub mod scenario;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use scenario::{
    build_def, scenario_taxonomy, weapon_stats, AcidRules, EnemyKind, EnemyPlacement, ItemKind,
    ItemPlacement, KillRewardRescale, RandomEnemyRules, Scenario, ScenarioDef, WeaponVariant,
    AMMO_CAP, AMMO_PICKUP_AMOUNT, ARMOR_BONUS, HEALTH_CAP, TOTAL_HEALTH_CAP, WEAPON_PICKUP_AMMO,
};

use crate::error::{Error, Result};
use crate::events::{EventTaxonomy, EventVector, WEAPON_SLOTS};

/// Observation channel count; see [`EnvState::observation`] for the layout.
pub const OBS_CHANNELS: usize = 11;

/// Environment configuration; `None` fields fall back to scenario defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridEnvConfig {
    pub scenario: Scenario,
    pub variant: Option<WeaponVariant>,
    pub width: Option<usize>,
    pub height: Option<usize>,
    /// Episode cap in ticks (not decisions).
    pub max_ticks: Option<u32>,
    /// Ticks each chosen combined action is repeated for.
    pub action_repeat: u32,
}

impl Default for GridEnvConfig {
    fn default() -> Self {
        GridEnvConfig {
            scenario: Scenario::HealthGathering,
            variant: None,
            width: None,
            height: None,
            max_ticks: None,
            action_repeat: 4,
        }
    }
}

impl GridEnvConfig {
    pub fn new(scenario: Scenario) -> Self {
        GridEnvConfig {
            scenario,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.action_repeat < 1 {
            return Err(Error::config("action_repeat must be >= 1"));
        }
        if let Some(t) = self.max_ticks {
            if t < 1 {
                return Err(Error::config("max_ticks must be >= 1"));
            }
        }
        self.def().map(|_| ())
    }

    /// Resolve the full scenario definition for this configuration.
    pub fn def(&self) -> Result<ScenarioDef> {
        build_def(
            self.scenario,
            self.width,
            self.height,
            self.max_ticks,
            self.variant,
        )
    }

    /// Restrict a deathmatch configuration to a single weapon.
    pub fn make_variant(&self, variant: WeaponVariant) -> Result<GridEnvConfig> {
        if self.scenario != Scenario::Deathmatch {
            return Err(Error::config(
                "weapon variants only apply to the deathmatch scenario",
            ));
        }
        if self.variant.is_some() {
            return Err(Error::config("cannot derive a variant of a variant"));
        }
        let mut out = self.clone();
        out.variant = Some(variant);
        Ok(out)
    }

    pub fn taxonomy(&self) -> EventTaxonomy {
        scenario_taxonomy(self.scenario)
    }

    pub fn action_count(&self) -> Result<usize> {
        Ok(self.def()?.action_count())
    }

    /// Observation shape as (channels, height, width).
    pub fn obs_shape(&self) -> Result<(usize, usize, usize)> {
        let def = self.def()?;
        Ok((OBS_CHANNELS, def.height(), def.width()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Facing {
    North,
    East,
    South,
    West,
}

impl Facing {
    pub const ALL: [Facing; 4] = [Facing::North, Facing::East, Facing::South, Facing::West];

    pub fn index(&self) -> usize {
        match self {
            Facing::North => 0,
            Facing::East => 1,
            Facing::South => 2,
            Facing::West => 3,
        }
    }

    pub fn turn_left(&self) -> Facing {
        match self {
            Facing::North => Facing::West,
            Facing::West => Facing::South,
            Facing::South => Facing::East,
            Facing::East => Facing::North,
        }
    }

    pub fn turn_right(&self) -> Facing {
        match self {
            Facing::North => Facing::East,
            Facing::East => Facing::South,
            Facing::South => Facing::West,
            Facing::West => Facing::North,
        }
    }

    /// Unit step (dx, dy); y grows downward.
    pub fn delta(&self) -> (isize, isize) {
        match self {
            Facing::North => (0, -1),
            Facing::East => (1, 0),
            Facing::South => (0, 1),
            Facing::West => (-1, 0),
        }
    }
}

/// A combined action: any on/off assignment to the atomic actions.
/// Bit 0 = move forward, bit 1 = turn left, bit 2 = turn right,
/// bit 3 = attack (only when the scenario enables it).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CombinedAction {
    pub forward: bool,
    pub turn_left: bool,
    pub turn_right: bool,
    pub attack: bool,
}

impl CombinedAction {
    pub fn from_index(index: usize, attack_enabled: bool) -> Result<CombinedAction> {
        let count = if attack_enabled { 16 } else { 8 };
        if index >= count {
            return Err(Error::contract(format!(
                "action index {index} out of range for {count} combined actions"
            )));
        }
        Ok(CombinedAction {
            forward: index & 1 != 0,
            turn_left: index & 2 != 0,
            turn_right: index & 4 != 0,
            attack: index & 8 != 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub x: usize,
    pub y: usize,
    pub facing: Facing,
    pub health: f64,
    pub ammo: Vec<u32>,
    pub owned: Vec<bool>,
    pub active_slot: u8,
    /// Position of the last movement event (spawn position before the first
    /// one); a movement event fires when the agent is one unit away from it.
    pub move_anchor: (f64, f64),
    /// Monotone per-slot counters of ammo-consuming shots fired.
    pub shots_fired: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Enemy {
    pub id: u32,
    pub kind: EnemyKind,
    pub x: usize,
    pub y: usize,
    pub hp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacedItem {
    pub kind: ItemKind,
    pub x: usize,
    pub y: usize,
}

/// Observation: dense `channels x height x width` array in `[0, 1]`.
///
/// Channels: 0 walls, 1 acid floor, 2 agent, 3 facing plane, 4 medkits,
/// 5 armor, 6 ammo pickups (value encodes slot), 7 weapon pickups (value
/// encodes slot), 8 enemies (value encodes kind), 9 normalized health plane,
/// 10 normalized active-weapon ammo plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Observation {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Result of one environment step (one combined action, `action_repeat`
/// ticks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Observation,
    /// Raw extrinsic reward accumulated over the step, pre-normalization.
    pub extrinsic_reward: f64,
    pub events: EventVector,
    pub done: bool,
    /// Agent cell after the step, for visitation heat maps.
    pub position: (usize, usize),
    /// Agent cell after every tick of the step (time-weighted visitation).
    pub tick_positions: Vec<(usize, usize)>,
}

/// Full environment state; one instance per worker, stepped synchronously.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "EnvStateDump", into = "EnvStateDump")]
pub struct EnvState {
    def: ScenarioDef,
    action_repeat: u32,
    // Derived from the layout; rebuilt on deserialization.
    width: usize,
    height: usize,
    walls: Vec<bool>,
    acid: Vec<bool>,
    // Dynamic state.
    agent: AgentState,
    items: Vec<PlacedItem>,
    enemies: Vec<Enemy>,
    next_enemy_id: u32,
    /// Ticks at which replacement enemies are due.
    respawn_queue: Vec<u32>,
    tick: u32,
    done: bool,
    rng: ChaCha8Rng,
}

#[derive(Serialize, Deserialize)]
struct EnvStateDump {
    def: ScenarioDef,
    action_repeat: u32,
    agent: AgentState,
    items: Vec<PlacedItem>,
    enemies: Vec<Enemy>,
    next_enemy_id: u32,
    respawn_queue: Vec<u32>,
    tick: u32,
    done: bool,
    rng: ChaCha8Rng,
}

impl TryFrom<EnvStateDump> for EnvState {
    type Error = Error;
    fn try_from(d: EnvStateDump) -> Result<EnvState> {
        d.def.validate()?;
        let (width, height, walls, acid, _) = parse_layout(&d.def);
        Ok(EnvState {
            def: d.def,
            action_repeat: d.action_repeat,
            width,
            height,
            walls,
            acid,
            agent: d.agent,
            items: d.items,
            enemies: d.enemies,
            next_enemy_id: d.next_enemy_id,
            respawn_queue: d.respawn_queue,
            tick: d.tick,
            done: d.done,
            rng: d.rng,
        })
    }
}

impl From<EnvState> for EnvStateDump {
    fn from(s: EnvState) -> EnvStateDump {
        EnvStateDump {
            def: s.def,
            action_repeat: s.action_repeat,
            agent: s.agent,
            items: s.items,
            enemies: s.enemies,
            next_enemy_id: s.next_enemy_id,
            respawn_queue: s.respawn_queue,
            tick: s.tick,
            done: s.done,
            rng: s.rng,
        }
    }
}

fn parse_layout(def: &ScenarioDef) -> (usize, usize, Vec<bool>, Vec<bool>, Vec<(usize, usize)>) {
    let width = def.width();
    let height = def.height();
    let mut walls = vec![false; width * height];
    let mut acid = vec![false; width * height];
    let mut spawns = Vec::new();
    for (y, row) in def.layout.iter().enumerate() {
        for (x, c) in row.chars().enumerate() {
            match c {
                scenario::GLYPH_WALL => walls[y * width + x] = true,
                scenario::GLYPH_ACID => acid[y * width + x] = true,
                scenario::GLYPH_SPAWN => spawns.push((x, y)),
                scenario::GLYPH_SPAWN_ACID => {
                    acid[y * width + x] = true;
                    spawns.push((x, y));
                }
                _ => {}
            }
        }
    }
    (width, height, walls, acid, spawns)
}

/// Start a fresh episode. Identical `(config, seed)` produce identical
/// states.
pub fn reset(config: &GridEnvConfig, seed: u64) -> Result<(EnvState, Observation)> {
    if config.action_repeat < 1 {
        return Err(Error::config("action_repeat must be >= 1"));
    }
    let def = config.def()?;
    reset_def(def, config.action_repeat, seed)
}

/// Start a fresh episode from an explicit scenario definition (used for
/// JSON-loaded custom scenarios).
pub fn reset_def(
    def: ScenarioDef,
    action_repeat: u32,
    seed: u64,
) -> Result<(EnvState, Observation)> {
    def.validate()?;
    let (width, height, walls, acid, spawn_points) = parse_layout(&def);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sx, sy) = spawn_points[rng.gen_range(0..spawn_points.len())];
    let facing = if def.random_spawn_facing {
        Facing::ALL[rng.gen_range(0..4)]
    } else {
        Facing::East
    };
    let mut ammo = vec![0u32; WEAPON_SLOTS];
    let mut owned = vec![false; WEAPON_SLOTS];
    let mut active_slot = 0u8;
    if let Some((slot, rounds)) = def.start_weapon {
        owned[slot as usize] = true;
        ammo[slot as usize] = rounds;
        active_slot = slot;
    }
    let agent = AgentState {
        x: sx,
        y: sy,
        facing,
        health: 100.0,
        ammo,
        owned,
        active_slot,
        move_anchor: (sx as f64, sy as f64),
        shots_fired: vec![0; WEAPON_SLOTS],
    };
    let mut state = EnvState {
        items: def.items.iter().map(|p| PlacedItem { kind: p.kind, x: p.x, y: p.y }).collect(),
        enemies: def
            .enemies
            .iter()
            .enumerate()
            .map(|(i, p)| Enemy {
                id: i as u32,
                kind: p.kind,
                x: p.x,
                y: p.y,
                hp: p.kind.hit_points(),
            })
            .collect(),
        next_enemy_id: def.enemies.len() as u32,
        respawn_queue: Vec::new(),
        tick: 0,
        done: false,
        rng,
        def,
        action_repeat,
        width,
        height,
        walls,
        acid,
        agent,
    };
    for _ in 0..state.def.random_medkits {
        state.spawn_random_medkit();
    }
    if let Some(rules) = state.def.random_enemies.clone() {
        for _ in 0..rules.count {
            state.spawn_random_enemy(&rules);
        }
    }
    let obs = state.observation();
    Ok((state, obs))
}

impl EnvState {
    pub fn def(&self) -> &ScenarioDef {
        &self.def
    }

    pub fn taxonomy(&self) -> &EventTaxonomy {
        &self.def.taxonomy
    }

    pub fn action_count(&self) -> usize {
        self.def.action_count()
    }

    pub fn action_repeat(&self) -> u32 {
        self.action_repeat
    }

    pub fn agent(&self) -> &AgentState {
        &self.agent
    }

    pub fn items(&self) -> &[PlacedItem] {
        &self.items
    }

    pub fn enemies(&self) -> &[Enemy] {
        &self.enemies
    }

    pub fn tick(&self) -> u32 {
        self.tick
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn is_wall(&self, x: usize, y: usize) -> bool {
        self.walls[y * self.width + x]
    }

    pub fn is_acid(&self, x: usize, y: usize) -> bool {
        self.acid[y * self.width + x]
    }

    pub fn obs_shape(&self) -> (usize, usize, usize) {
        (OBS_CHANNELS, self.height, self.width)
    }

    fn enemy_at(&self, x: usize, y: usize) -> Option<usize> {
        self.enemies.iter().position(|e| e.x == x && e.y == y)
    }

    fn item_at(&self, x: usize, y: usize) -> Option<usize> {
        self.items.iter().position(|i| i.x == x && i.y == y)
    }

    /// Free floor cells in row-major order, excluding walls, items, enemies,
    /// and the agent.
    fn free_cells(&self) -> Vec<(usize, usize)> {
        let mut cells = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.is_wall(x, y)
                    || (x, y) == (self.agent.x, self.agent.y)
                    || self.item_at(x, y).is_some()
                    || self.enemy_at(x, y).is_some()
                {
                    continue;
                }
                cells.push((x, y));
            }
        }
        cells
    }

    fn spawn_random_medkit(&mut self) {
        let cells = match &self.def.medkit_spawn_cells {
            Some(pads) => pads
                .iter()
                .copied()
                .filter(|&(x, y)| {
                    !self.is_wall(x, y)
                        && (x, y) != (self.agent.x, self.agent.y)
                        && self.item_at(x, y).is_none()
                        && self.enemy_at(x, y).is_none()
                })
                .collect(),
            None => self.free_cells(),
        };
        if cells.is_empty() {
            return;
        }
        let (x, y) = cells[self.rng.gen_range(0..cells.len())];
        self.items.push(PlacedItem {
            kind: ItemKind::Medkit,
            x,
            y,
        });
    }

    fn spawn_random_enemy(&mut self, rules: &RandomEnemyRules) {
        let min_d = rules.min_spawn_distance as usize;
        let cells: Vec<(usize, usize)> = self
            .free_cells()
            .into_iter()
            .filter(|&(x, y)| {
                x.abs_diff(self.agent.x) + y.abs_diff(self.agent.y) >= min_d
            })
            .collect();
        if cells.is_empty() {
            return;
        }
        let (x, y) = cells[self.rng.gen_range(0..cells.len())];
        let kind = rules.kinds[self.rng.gen_range(0..rules.kinds.len())];
        self.enemies.push(Enemy {
            id: self.next_enemy_id,
            kind,
            x,
            y,
            hp: kind.hit_points(),
        });
        self.next_enemy_id += 1;
    }

    /// Straight line of sight between two cells: same row or column with no
    /// wall in between.
    fn clear_line(&self, ax: usize, ay: usize, bx: usize, by: usize) -> bool {
        if ax == bx {
            let (lo, hi) = (ay.min(by), ay.max(by));
            (lo + 1..hi).all(|y| !self.is_wall(ax, y))
        } else if ay == by {
            let (lo, hi) = (ax.min(bx), ax.max(bx));
            (lo + 1..hi).all(|x| !self.is_wall(x, ay))
        } else {
            false
        }
    }

    /// Switch to the heaviest owned weapon that can still fire.
    fn auto_switch_weapon(&mut self) {
        let mut best: Option<(f64, u8)> = None;
        for slot in 0..WEAPON_SLOTS as u8 {
            if !self.agent.owned[slot as usize] {
                continue;
            }
            if let Some(stats) = weapon_stats(slot) {
                if stats.uses_ammo && self.agent.ammo[slot as usize] == 0 {
                    continue;
                }
                if best.map_or(true, |(d, _)| stats.damage > d) {
                    best = Some((stats.damage, slot));
                }
            }
        }
        if let Some((_, slot)) = best {
            self.agent.active_slot = slot;
        }
    }

    fn damage_enemy(&mut self, index: usize, amount: f64, extr: &mut f64) {
        self.enemies[index].hp -= amount;
        if self.enemies[index].hp <= 0.0 {
            if self.def.kill_rewards_enabled {
                *extr += self.enemies[index].kind.kill_reward();
            }
            self.enemies.remove(index);
            if let Some(rules) = &self.def.random_enemies {
                if let Some(delay) = rules.respawn_delay_ticks {
                    self.respawn_queue.push(self.tick + 1 + delay);
                }
            }
        }
    }

    fn resolve_attack(&mut self, extr: &mut f64) {
        let slot = self.agent.active_slot;
        let stats = match weapon_stats(slot) {
            Some(s) => s,
            None => return,
        };
        if stats.uses_ammo {
            if self.agent.ammo[slot as usize] == 0 {
                // Dry trigger: switching weapons takes the tick.
                self.auto_switch_weapon();
                return;
            }
            self.agent.ammo[slot as usize] -= 1;
            self.agent.shots_fired[slot as usize] += 1;
        }
        let (dx, dy) = self.agent.facing.delta();
        let (mut cx, mut cy) = (self.agent.x as isize, self.agent.y as isize);
        let mut impact: Option<(usize, usize)> = None;
        for _ in 0..stats.range {
            cx += dx;
            cy += dy;
            if cx < 0 || cy < 0 || cx >= self.width as isize || cy >= self.height as isize {
                break;
            }
            let (ux, uy) = (cx as usize, cy as usize);
            if self.is_wall(ux, uy) {
                break;
            }
            if let Some(idx) = self.enemy_at(ux, uy) {
                self.damage_enemy(idx, stats.damage, extr);
                impact = Some((ux, uy));
                break;
            }
        }
        if let (Some((ix, iy)), Some(splash)) = (impact, stats.splash) {
            for (ddx, ddy) in [(0isize, -1isize), (1, 0), (0, 1), (-1, 0)] {
                let (sx, sy) = (ix as isize + ddx, iy as isize + ddy);
                if sx < 0 || sy < 0 || sx >= self.width as isize || sy >= self.height as isize {
                    continue;
                }
                if let Some(idx) = self.enemy_at(sx as usize, sy as usize) {
                    self.damage_enemy(idx, splash, extr);
                }
            }
        }
        if stats.uses_ammo && self.agent.ammo[slot as usize] == 0 {
            self.auto_switch_weapon();
        }
    }

    fn pickup_item(&mut self, index: usize, extr: &mut f64) {
        let item = self.items.remove(index);
        match item.kind {
            ItemKind::Medkit => {
                if self.agent.health < HEALTH_CAP {
                    self.agent.health = (self.agent.health + self.def.medkit_heal).min(HEALTH_CAP);
                }
                if self.def.medkit_respawn {
                    self.spawn_random_medkit();
                }
            }
            ItemKind::Armor => {
                if self.def.armor_ends_episode {
                    *extr += self.def.armor_reward;
                    self.done = true;
                } else {
                    self.agent.health = (self.agent.health + ARMOR_BONUS).min(TOTAL_HEALTH_CAP);
                }
            }
            ItemKind::Ammo { slot } => {
                let a = &mut self.agent.ammo[slot as usize];
                *a = (*a + AMMO_PICKUP_AMOUNT).min(AMMO_CAP);
            }
            ItemKind::Weapon { slot } => {
                self.agent.owned[slot as usize] = true;
                let a = &mut self.agent.ammo[slot as usize];
                *a = (*a + WEAPON_PICKUP_AMMO).min(AMMO_CAP);
                self.agent.active_slot = slot;
            }
        }
    }

    fn enemy_phase(&mut self) {
        let tick_no = self.tick + 1;
        let mut damage_to_agent = 0.0;
        for i in 0..self.enemies.len() {
            let e = self.enemies[i];
            let dist = e.x.abs_diff(self.agent.x) + e.y.abs_diff(self.agent.y);
            let in_sight = dist <= e.kind.attack_range() as usize
                && self.clear_line(e.x, e.y, self.agent.x, self.agent.y);
            if in_sight {
                if self.rng.gen::<f64>() < e.kind.hit_probability() {
                    damage_to_agent += e.kind.attack_damage();
                }
            } else if self.def.enemies_chase && tick_no % e.kind.move_period() == 0 {
                self.chase_move(i);
            }
        }
        self.agent.health -= damage_to_agent;
    }

    fn chase_move(&mut self, index: usize) {
        let e = self.enemies[index];
        let dx = self.agent.x as isize - e.x as isize;
        let dy = self.agent.y as isize - e.y as isize;
        let step_x = (dx.signum(), 0);
        let step_y = (0, dy.signum());
        let order = if dx.abs() >= dy.abs() {
            [step_x, step_y]
        } else {
            [step_y, step_x]
        };
        for (mx, my) in order {
            if mx == 0 && my == 0 {
                continue;
            }
            let nx = (e.x as isize + mx) as usize;
            let ny = (e.y as isize + my) as usize;
            if nx >= self.width || ny >= self.height || self.is_wall(nx, ny) {
                continue;
            }
            if (nx, ny) == (self.agent.x, self.agent.y) || self.enemy_at(nx, ny).is_some() {
                continue;
            }
            self.enemies[index].x = nx;
            self.enemies[index].y = ny;
            return;
        }
    }

    fn respawn_phase(&mut self) {
        let Some(rules) = self.def.random_enemies.clone() else {
            return;
        };
        let tick_no = self.tick + 1;
        let mut i = 0;
        while i < self.respawn_queue.len() {
            if self.respawn_queue[i] <= tick_no {
                self.respawn_queue.remove(i);
                self.spawn_random_enemy(&rules);
            } else {
                i += 1;
            }
        }
    }

    /// Advance a single tick under `action`; returns the tick's raw
    /// extrinsic reward. Turning applies only on the first tick of a
    /// decision (`turn` false afterwards): repeating a 90-degree turn for
    /// every repeated tick would quantize turns to full circles.
    fn tick_once(&mut self, action: CombinedAction, turn: bool) -> f64 {
        let mut extr = 0.0;

        // 1. Turning; opposing turn bits cancel.
        if turn {
            if action.turn_left && !action.turn_right {
                self.agent.facing = self.agent.facing.turn_left();
            } else if action.turn_right && !action.turn_left {
                self.agent.facing = self.agent.facing.turn_right();
            }
        }

        // 2. Attack from the current cell.
        if action.attack && self.def.attack_enabled {
            self.resolve_attack(&mut extr);
        }

        // 3. Movement and pickups.
        if action.forward && !self.done {
            let (dx, dy) = self.agent.facing.delta();
            let nx = self.agent.x as isize + dx;
            let ny = self.agent.y as isize + dy;
            if nx >= 0
                && ny >= 0
                && (nx as usize) < self.width
                && (ny as usize) < self.height
                && !self.is_wall(nx as usize, ny as usize)
                && self.enemy_at(nx as usize, ny as usize).is_none()
            {
                self.agent.x = nx as usize;
                self.agent.y = ny as usize;
                let (ax, ay) = self.agent.move_anchor;
                let fx = self.agent.x as f64 - ax;
                let fy = self.agent.y as f64 - ay;
                if (fx * fx + fy * fy).sqrt() >= 1.0 - 1e-9 {
                    self.agent.move_anchor = (self.agent.x as f64, self.agent.y as f64);
                }
                if let Some(idx) = self.item_at(self.agent.x, self.agent.y) {
                    self.pickup_item(idx, &mut extr);
                }
            }
        }

        // 4. Enemies attack or chase.
        if !self.done {
            self.enemy_phase();
        }

        // 5. Scheduled respawns.
        if !self.done {
            self.respawn_phase();
        }

        // 6. Floor hazards.
        if let Some(acid) = self.def.acid {
            if !self.done
                && self.is_acid(self.agent.x, self.agent.y)
                && (self.tick + 1) % acid.period_ticks == 0
            {
                self.agent.health -= acid.damage;
            }
        }

        // 7. Bookkeeping and terminal conditions.
        self.tick += 1;
        if self.agent.health <= 0.0 {
            extr += self.def.death_penalty;
            self.done = true;
        } else if !self.done {
            extr += self.def.alive_reward_per_tick;
        }
        if self.tick >= self.def.max_ticks {
            self.done = true;
        }
        extr
    }

    /// Apply one combined action for `action_repeat` ticks (fewer if the
    /// episode terminates mid-way).
    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.done {
            return Err(Error::contract(
                "step called on a finished episode; reset first",
            ));
        }
        let combined = CombinedAction::from_index(action, self.def.attack_enabled)?;
        let mut events = self.def.taxonomy.zeros();
        let mut extrinsic = 0.0;
        let mut tick_positions = Vec::with_capacity(self.action_repeat as usize);
        for tick in 0..self.action_repeat {
            if self.done {
                break;
            }
            let prev = self.clone();
            extrinsic += self.tick_once(combined, tick == 0);
            events.add_assign(&detect_events(&prev, self))?;
            tick_positions.push((self.agent.x, self.agent.y));
        }
        Ok(StepResult {
            observation: self.observation(),
            extrinsic_reward: extrinsic,
            events,
            done: self.done,
            position: (self.agent.x, self.agent.y),
            tick_positions,
        })
    }

    /// Render the current state as a dense multi-channel observation.
    pub fn observation(&self) -> Observation {
        let (w, h) = (self.width, self.height);
        let plane = w * h;
        let mut data = vec![0.0f64; OBS_CHANNELS * plane];
        for y in 0..h {
            for x in 0..w {
                let at = y * w + x;
                if self.walls[at] {
                    data[at] = 1.0;
                }
                if self.acid[at] {
                    data[plane + at] = 1.0;
                }
            }
        }
        let at = self.agent.y * w + self.agent.x;
        data[2 * plane + at] = 1.0;
        let facing_value = (self.agent.facing.index() + 1) as f64 / 4.0;
        for v in data[3 * plane..4 * plane].iter_mut() {
            *v = facing_value;
        }
        for item in &self.items {
            let at = item.y * w + item.x;
            match item.kind {
                ItemKind::Medkit => data[4 * plane + at] = 1.0,
                ItemKind::Armor => data[5 * plane + at] = 1.0,
                ItemKind::Ammo { slot } => {
                    data[6 * plane + at] = (slot + 1) as f64 / WEAPON_SLOTS as f64
                }
                ItemKind::Weapon { slot } => {
                    data[7 * plane + at] = (slot + 1) as f64 / WEAPON_SLOTS as f64
                }
            }
        }
        for enemy in &self.enemies {
            let at = enemy.y * w + enemy.x;
            let kind_idx = EnemyKind::ALL.iter().position(|k| *k == enemy.kind).unwrap();
            data[8 * plane + at] = (kind_idx + 1) as f64 / EnemyKind::ALL.len() as f64;
        }
        let health_value = (self.agent.health / TOTAL_HEALTH_CAP).clamp(0.0, 1.0);
        for v in data[9 * plane..10 * plane].iter_mut() {
            *v = health_value;
        }
        let ammo_value =
            (self.agent.ammo[self.agent.active_slot as usize] as f64 / 100.0).clamp(0.0, 1.0);
        for v in data[10 * plane..11 * plane].iter_mut() {
            *v = ammo_value;
        }
        Observation {
            channels: OBS_CHANNELS,
            height: h,
            width: w,
            data,
        }
    }
}

/// Detect the events of one tick by diffing consecutive states.
///
/// Movement fires when the agent is at least one unit from the last movement
/// anchor; shots are per-slot monotone counter diffs (an ammo decrease);
/// pickups are items present before and gone after; kills are enemies gone
/// after, attributed to the weapon held when the tick started plus one
/// `kill_any` each.
pub fn detect_events(prev: &EnvState, next: &EnvState) -> EventVector {
    let tax = &next.def.taxonomy;
    let mut events = tax.zeros();
    let mut emit = |name: &str, count: u32| {
        if count > 0 {
            if let Some(idx) = tax.index(name) {
                events.increment(idx, count);
            }
        }
    };

    let (ax, ay) = prev.agent.move_anchor;
    let fx = next.agent.x as f64 - ax;
    let fy = next.agent.y as f64 - ay;
    if (fx * fx + fy * fy).sqrt() >= 1.0 - 1e-9 {
        emit("movement", 1);
    }

    for slot in 0..WEAPON_SLOTS {
        let shots = next.agent.shots_fired[slot] - prev.agent.shots_fired[slot];
        emit("shoot", shots);
    }

    for item in &prev.items {
        if !next.items.contains(item) {
            match item.kind {
                ItemKind::Medkit => emit("pickup_medkit", 1),
                ItemKind::Armor => emit("pickup_armor", 1),
                ItemKind::Ammo { .. } => emit("pickup_ammo", 1),
                ItemKind::Weapon { slot } => emit(&format!("pickup_weapon_{slot}"), 1),
            }
        }
    }

    let mut kills = 0u32;
    for enemy in &prev.enemies {
        if !next.enemies.iter().any(|e| e.id == enemy.id) {
            kills += 1;
        }
    }
    if kills > 0 {
        emit(&format!("kill_weapon_{}", prev.agent.active_slot), kills);
        emit("kill_any", kills);
    }
    events
}

#[cfg(test)]
mod tests;
