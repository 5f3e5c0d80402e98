//! Scenario definitions: grid layouts, item and enemy placements, reward
//! constants, and the five built-in scenarios plus deathmatch weapon
//! variants.
//!
//! A [`ScenarioDef`] is plain data and loads from JSON (layout as character
//! rows, placements as explicit lists); the built-in scenarios are generated
//! programmatically so their dimensions stay configurable. See
//! `docs/scenarios.md` for the schema.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventTaxonomy;

/// Layout glyphs: `#` wall, `.` floor, `~` acid floor, `S` spawn point on
/// plain floor, `s` spawn point on acid floor.
pub const GLYPH_WALL: char = '#';
pub const GLYPH_FLOOR: char = '.';
pub const GLYPH_ACID: char = '~';
pub const GLYPH_SPAWN: char = 'S';
pub const GLYPH_SPAWN_ACID: char = 's';

/// Ammo gained from an ammo pickup.
pub const AMMO_PICKUP_AMOUNT: u32 = 20;
/// Ammo bundled with a weapon pickup.
pub const WEAPON_PICKUP_AMMO: u32 = 30;
/// Per-slot ammo cap.
pub const AMMO_CAP: u32 = 200;
/// Health cap for medkit healing.
pub const HEALTH_CAP: f64 = 100.0;
/// Health cap including armor bonus.
pub const TOTAL_HEALTH_CAP: f64 = 200.0;
/// Health granted by a (non-goal) armor pickup.
pub const ARMOR_BONUS: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    HealthGathering,
    HealthGatheringSupreme,
    MyWayHome,
    DeadlyCorridor,
    Deathmatch,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::HealthGathering,
        Scenario::HealthGatheringSupreme,
        Scenario::MyWayHome,
        Scenario::DeadlyCorridor,
        Scenario::Deathmatch,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::HealthGathering => "health_gathering",
            Scenario::HealthGatheringSupreme => "health_gathering_supreme",
            Scenario::MyWayHome => "my_way_home",
            Scenario::DeadlyCorridor => "deadly_corridor",
            Scenario::Deathmatch => "deathmatch",
        }
    }

    pub fn parse(name: &str) -> Result<Scenario> {
        Scenario::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::config(format!("unknown scenario `{name}`")))
    }

    /// Default grid dimensions (width, height).
    pub fn default_dims(&self) -> (usize, usize) {
        match self {
            Scenario::HealthGathering => (9, 9),
            Scenario::HealthGatheringSupreme => (13, 13),
            Scenario::MyWayHome => (13, 13),
            Scenario::DeadlyCorridor => (17, 5),
            Scenario::Deathmatch => (13, 13),
        }
    }

    /// Default episode cap in environment ticks.
    pub fn default_max_ticks(&self) -> u32 {
        match self {
            Scenario::Deathmatch => 4200,
            _ => 2100,
        }
    }
}

/// Single-weapon restriction of the deathmatch arena: all other weapons and
/// their ammunition are removed from the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeaponVariant {
    Chainsaw,
    Shotgun,
    Chaingun,
    Plasma,
    Rocket,
}

impl WeaponVariant {
    pub const ALL: [WeaponVariant; 5] = [
        WeaponVariant::Chainsaw,
        WeaponVariant::Shotgun,
        WeaponVariant::Chaingun,
        WeaponVariant::Plasma,
        WeaponVariant::Rocket,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            WeaponVariant::Chainsaw => "chainsaw",
            WeaponVariant::Shotgun => "shotgun",
            WeaponVariant::Chaingun => "chaingun",
            WeaponVariant::Plasma => "plasma",
            WeaponVariant::Rocket => "rocket",
        }
    }

    pub fn parse(name: &str) -> Result<WeaponVariant> {
        WeaponVariant::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::config(format!("unknown deathmatch variant `{name}`")))
    }

    /// Weapon slot kept on the map by this variant.
    pub fn slot(&self) -> u8 {
        match self {
            WeaponVariant::Chainsaw => 1,
            WeaponVariant::Shotgun => 3,
            WeaponVariant::Chaingun => 4,
            WeaponVariant::Rocket => 5,
            WeaponVariant::Plasma => 6,
        }
    }
}

/// Per-slot weapon behavior. Slot 0 is the sidearm the agent may start with;
/// slots map onto the pickup/kill event indices of the taxonomy.
#[derive(Debug, Clone, Copy)]
pub struct WeaponStats {
    pub name: &'static str,
    pub damage: f64,
    /// Attack reach in cells along the facing direction.
    pub range: u32,
    pub uses_ammo: bool,
    /// Splash damage dealt to enemies adjacent to the impact cell.
    pub splash: Option<f64>,
}

/// Stats for the weapon in `slot`, if the slot is populated.
pub fn weapon_stats(slot: u8) -> Option<WeaponStats> {
    match slot {
        0 => Some(WeaponStats {
            name: "pistol",
            damage: 40.0,
            range: 8,
            uses_ammo: true,
            splash: None,
        }),
        1 => Some(WeaponStats {
            name: "chainsaw",
            damage: 60.0,
            range: 1,
            uses_ammo: false,
            splash: None,
        }),
        3 => Some(WeaponStats {
            name: "shotgun",
            damage: 80.0,
            range: 6,
            uses_ammo: true,
            splash: None,
        }),
        4 => Some(WeaponStats {
            name: "chaingun",
            damage: 40.0,
            range: 7,
            uses_ammo: true,
            splash: None,
        }),
        5 => Some(WeaponStats {
            name: "rocket",
            damage: 70.0,
            range: 8,
            uses_ammo: true,
            splash: Some(35.0),
        }),
        6 => Some(WeaponStats {
            name: "plasma",
            damage: 60.0,
            range: 8,
            uses_ammo: true,
            splash: None,
        }),
        _ => None,
    }
}

/// Enemy bestiary, named after the arena's inhabitants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnemyKind {
    Zombieman,
    ShotgunGuy,
    MarineChainsawVzd,
    Demon,
    ChaingunGuy,
    HellKnight,
}

impl EnemyKind {
    pub const ALL: [EnemyKind; 6] = [
        EnemyKind::Zombieman,
        EnemyKind::ShotgunGuy,
        EnemyKind::MarineChainsawVzd,
        EnemyKind::Demon,
        EnemyKind::ChaingunGuy,
        EnemyKind::HellKnight,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EnemyKind::Zombieman => "Zombieman",
            EnemyKind::ShotgunGuy => "ShotgunGuy",
            EnemyKind::MarineChainsawVzd => "MarineChainsawVzd",
            EnemyKind::Demon => "Demon",
            EnemyKind::ChaingunGuy => "ChaingunGuy",
            EnemyKind::HellKnight => "HellKnight",
        }
    }

    pub fn parse(name: &str) -> Result<EnemyKind> {
        EnemyKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::config(format!("unknown enemy type `{name}`")))
    }

    /// Extrinsic reward for killing this enemy in the arena.
    pub fn kill_reward(&self) -> f64 {
        match self {
            EnemyKind::Zombieman => 100.0,
            EnemyKind::ShotgunGuy => 300.0,
            EnemyKind::MarineChainsawVzd => 300.0,
            EnemyKind::Demon => 300.0,
            EnemyKind::ChaingunGuy => 400.0,
            EnemyKind::HellKnight => 1000.0,
        }
    }

    pub fn hit_points(&self) -> f64 {
        match self {
            EnemyKind::Zombieman => 30.0,
            EnemyKind::ShotgunGuy => 40.0,
            EnemyKind::MarineChainsawVzd => 60.0,
            EnemyKind::Demon => 80.0,
            EnemyKind::ChaingunGuy => 60.0,
            EnemyKind::HellKnight => 200.0,
        }
    }

    pub fn attack_damage(&self) -> f64 {
        match self {
            EnemyKind::Zombieman => 10.0,
            EnemyKind::ShotgunGuy => 20.0,
            EnemyKind::MarineChainsawVzd => 25.0,
            EnemyKind::Demon => 20.0,
            EnemyKind::ChaingunGuy => 10.0,
            EnemyKind::HellKnight => 25.0,
        }
    }

    /// Chance an attack attempt lands, rolled per tick while the agent is in
    /// line of sight and range.
    pub fn hit_probability(&self) -> f64 {
        match self {
            EnemyKind::Zombieman => 0.25,
            EnemyKind::ShotgunGuy => 0.35,
            EnemyKind::MarineChainsawVzd => 0.5,
            EnemyKind::Demon => 0.5,
            EnemyKind::ChaingunGuy => 0.45,
            EnemyKind::HellKnight => 0.35,
        }
    }

    /// Attack reach in cells (1 = melee).
    pub fn attack_range(&self) -> u32 {
        match self {
            EnemyKind::Zombieman => 6,
            EnemyKind::ShotgunGuy => 5,
            EnemyKind::MarineChainsawVzd => 1,
            EnemyKind::Demon => 1,
            EnemyKind::ChaingunGuy => 7,
            EnemyKind::HellKnight => 6,
        }
    }

    /// Moves one cell every `move_period` ticks when not attacking.
    pub fn move_period(&self) -> u32 {
        match self {
            EnemyKind::MarineChainsawVzd | EnemyKind::Demon => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Medkit,
    Armor,
    Ammo { slot: u8 },
    Weapon { slot: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemPlacement {
    pub kind: ItemKind,
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnemyPlacement {
    pub kind: EnemyKind,
    pub x: usize,
    pub y: usize,
}

/// Acid floor: periodic damage while the agent stands on an acid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcidRules {
    pub period_ticks: u32,
    pub damage: f64,
}

/// Randomly spawned enemies (arena scenarios).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomEnemyRules {
    pub count: u32,
    pub kinds: Vec<EnemyKind>,
    /// Ticks after a death before a replacement spawns; none disables
    /// respawning.
    pub respawn_delay_ticks: Option<u32>,
    /// Minimum Manhattan distance from the agent for spawn cells.
    pub min_spawn_distance: u32,
}

/// Rescaling applied to arena kill rewards before normalization: rewards
/// strictly above `threshold` are divided by `divisor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KillRewardRescale {
    pub threshold: f64,
    pub divisor: f64,
}

fn default_true() -> bool {
    true
}

fn rows_ref(layout: &[String], x: usize, y: usize) -> char {
    layout[y].chars().nth(x).unwrap_or(GLYPH_WALL)
}

/// Complete scenario definition. Everything an episode needs is here:
/// geometry, spawns, items, enemies, reward constants, and the event
/// taxonomy the scenario emits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDef {
    pub name: String,
    /// Character rows, all the same length: `#` wall, `.` floor, `~` acid,
    /// `S` spawn point (a floor cell).
    pub layout: Vec<String>,
    pub taxonomy: EventTaxonomy,
    pub max_ticks: u32,
    /// Whether the attack action is available (16 combined actions vs 8).
    pub attack_enabled: bool,
    pub random_spawn_facing: bool,
    pub alive_reward_per_tick: f64,
    /// Extrinsic reward added on the tick the agent dies.
    pub death_penalty: f64,
    /// Extrinsic reward for picking up the goal armor.
    pub armor_reward: f64,
    /// Whether armor pickup terminates the episode (goal armor) or grants
    /// bonus health (arena armor).
    pub armor_ends_episode: bool,
    /// Whether enemy kills pay the bestiary's extrinsic schedule.
    pub kill_rewards_enabled: bool,
    pub medkit_heal: f64,
    /// Respawn a medkit at a random free cell whenever one is picked up.
    pub medkit_respawn: bool,
    /// Medkits spawned at random free cells on reset.
    pub random_medkits: u32,
    /// When set, random medkits spawn only on these pad cells (drawn
    /// uniformly among unoccupied pads); otherwise any free cell qualifies.
    #[serde(default)]
    pub medkit_spawn_cells: Option<Vec<(usize, usize)>>,
    pub acid: Option<AcidRules>,
    pub items: Vec<ItemPlacement>,
    pub enemies: Vec<EnemyPlacement>,
    /// Whether placed enemies chase the agent or hold their posts
    /// (stationary guards still attack anything in line of sight).
    #[serde(default = "default_true")]
    pub enemies_chase: bool,
    pub random_enemies: Option<RandomEnemyRules>,
    /// Sidearm the agent starts with: (slot, ammo).
    pub start_weapon: Option<(u8, u32)>,
    /// Declared per-step raw extrinsic reward range; rewards outside it are
    /// contract violations.
    pub declared_reward_range: (f64, f64),
    pub kill_reward_rescale: Option<KillRewardRescale>,
}

impl ScenarioDef {
    pub fn width(&self) -> usize {
        self.layout.first().map_or(0, |row| row.chars().count())
    }

    pub fn height(&self) -> usize {
        self.layout.len()
    }

    pub fn action_count(&self) -> usize {
        if self.attack_enabled {
            16
        } else {
            8
        }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let def: ScenarioDef = serde_json::from_str(json)?;
        def.validate()?;
        Ok(def)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.width(), self.height());
        if w < 3 || h < 3 {
            return Err(Error::config(format!(
                "grid dimensions must be at least 3x3, got {w}x{h}"
            )));
        }
        if self.max_ticks < 1 {
            return Err(Error::config("max_ticks must be >= 1"));
        }
        let mut spawns = 0usize;
        for (y, row) in self.layout.iter().enumerate() {
            if row.chars().count() != w {
                return Err(Error::config(format!("layout row {y} has ragged width")));
            }
            for (x, c) in row.chars().enumerate() {
                match c {
                    GLYPH_WALL | GLYPH_FLOOR | GLYPH_ACID => {}
                    GLYPH_SPAWN | GLYPH_SPAWN_ACID => spawns += 1,
                    other => {
                        return Err(Error::config(format!(
                            "unknown layout glyph `{other}` at ({x},{y})"
                        )))
                    }
                }
            }
        }
        if spawns == 0 {
            return Err(Error::config("layout has no spawn point `S`"));
        }
        let wall_at = |x: usize, y: usize| {
            self.layout[y].chars().nth(x).map_or(true, |c| c == GLYPH_WALL)
        };
        for item in &self.items {
            if item.x >= w || item.y >= h || wall_at(item.x, item.y) {
                return Err(Error::config(format!(
                    "item placement at ({},{}) is outside the floor",
                    item.x, item.y
                )));
            }
            if let ItemKind::Ammo { slot } | ItemKind::Weapon { slot } = item.kind {
                if weapon_stats(slot).is_none() {
                    return Err(Error::config(format!("weapon slot {slot} is not populated")));
                }
            }
        }
        for enemy in &self.enemies {
            if enemy.x >= w || enemy.y >= h || wall_at(enemy.x, enemy.y) {
                return Err(Error::config(format!(
                    "enemy placement at ({},{}) is outside the floor",
                    enemy.x, enemy.y
                )));
            }
        }
        if let Some((slot, _)) = self.start_weapon {
            if weapon_stats(slot).is_none() {
                return Err(Error::config(format!("start weapon slot {slot} is not populated")));
            }
        }
        if let Some(re) = &self.random_enemies {
            if re.kinds.is_empty() {
                return Err(Error::config("random_enemies.kinds must be non-empty"));
            }
        }
        if let Some(pads) = &self.medkit_spawn_cells {
            if (pads.len() as u32) < self.random_medkits {
                return Err(Error::config(
                    "fewer medkit spawn pads than random medkits",
                ));
            }
            for &(x, y) in pads {
                if x >= w || y >= h || wall_at(x, y) {
                    return Err(Error::config(format!(
                        "medkit spawn pad at ({x},{y}) is outside the floor"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Remove every weapon and ammo pickup that does not belong to `slot`.
    /// The agent's start weapon is unaffected.
    pub fn restrict_to_weapon(&mut self, slot: u8) {
        self.items.retain(|item| match item.kind {
            ItemKind::Weapon { slot: s } | ItemKind::Ammo { slot: s } => s == slot,
            _ => true,
        });
    }
}

/// Event taxonomy for a scenario: only the events that can actually fire
/// there, in the canonical doom26 order.
pub fn scenario_taxonomy(scenario: Scenario) -> EventTaxonomy {
    let names: Vec<&str> = match scenario {
        Scenario::HealthGathering | Scenario::HealthGatheringSupreme => {
            vec!["movement", "pickup_medkit"]
        }
        Scenario::MyWayHome => vec!["movement", "pickup_armor"],
        Scenario::DeadlyCorridor => {
            vec!["movement", "shoot", "pickup_armor", "kill_weapon_0", "kill_any"]
        }
        Scenario::Deathmatch => return EventTaxonomy::doom26(),
    };
    EventTaxonomy::new(names.into_iter().map(String::from).collect())
        .expect("built-in taxonomy is valid")
}

fn blank_layout(width: usize, height: usize, floor: char) -> Vec<Vec<char>> {
    let mut rows = vec![vec![floor; width]; height];
    for x in 0..width {
        rows[0][x] = GLYPH_WALL;
        rows[height - 1][x] = GLYPH_WALL;
    }
    for row in rows.iter_mut() {
        row[0] = GLYPH_WALL;
        row[width - 1] = GLYPH_WALL;
    }
    rows
}

fn rows_to_strings(rows: Vec<Vec<char>>) -> Vec<String> {
    rows.into_iter().map(|r| r.into_iter().collect()).collect()
}

fn base_def(scenario: Scenario, layout: Vec<String>, max_ticks: u32) -> ScenarioDef {
    ScenarioDef {
        name: scenario.name().to_string(),
        layout,
        taxonomy: scenario_taxonomy(scenario),
        max_ticks,
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

fn health_gathering_def(scenario: Scenario, width: usize, height: usize, max_ticks: u32) -> ScenarioDef {
    let mut rows = blank_layout(width, height, GLYPH_ACID);
    if scenario == Scenario::HealthGatheringSupreme {
        // Interior wall slabs with two gaps each turn the room into a maze.
        let mut x = 3;
        while x + 1 < width - 1 {
            let gap_a = height / 4;
            let gap_b = (3 * height) / 4;
            for (y, row) in rows.iter_mut().enumerate().take(height - 1).skip(1) {
                if y != gap_a && y != gap_b {
                    row[x] = GLYPH_WALL;
                }
            }
            x += 4;
        }
    }
    rows[height / 2][width / 2] = GLYPH_SPAWN_ACID;
    let mut def = base_def(scenario, rows_to_strings(rows), max_ticks);
    def.random_spawn_facing = true;
    def.alive_reward_per_tick = 1.0;
    def.death_penalty = -100.0;
    def.medkit_heal = 40.0;
    def.medkit_respawn = true;
    def.random_medkits = if scenario == Scenario::HealthGathering { 4 } else { 5 };
    def.acid = Some(AcidRules {
        period_ticks: 8,
        damage: 8.0,
    });
    // A ring of spawn pads; medkits land on a random unoccupied pad, so
    // supply routes are learnable while placement stays stochastic.
    let xs = [2, width / 2, width - 3];
    let ys = [2, height / 2, height - 3];
    let mut pads = Vec::new();
    for &py in &ys {
        for &px in &xs {
            let on_wall = rows_ref(&def.layout, px, py) == GLYPH_WALL;
            let center = (px, py) == (width / 2, height / 2);
            if !on_wall && !center {
                pads.push((px, py));
            }
        }
    }
    def.medkit_spawn_cells = Some(pads);
    def
}

fn my_way_home_def(width: usize, height: usize, max_ticks: u32) -> ScenarioDef {
    let mut rows = blank_layout(width, height, GLYPH_FLOOR);
    // A 3x3 grid of rooms with door gaps between adjacent rooms.
    let wx = [width / 3, (2 * width) / 3];
    let wy = [height / 3, (2 * height) / 3];
    let centers_x = [width / 6, width / 2, width - 1 - width / 6];
    let centers_y = [height / 6, height / 2, height - 1 - height / 6];
    for &x in &wx {
        for (y, row) in rows.iter_mut().enumerate().take(height - 1).skip(1) {
            if !centers_y.contains(&y) {
                row[x] = GLYPH_WALL;
            }
        }
    }
    for &y in &wy {
        for x in 1..width - 1 {
            if !centers_x.contains(&x) {
                rows[y][x] = GLYPH_WALL;
            }
        }
    }
    // Spawn in every room except the armor room (south-east corner).
    for &cy in &centers_y {
        for &cx in &centers_x {
            if (cx, cy) != (centers_x[2], centers_y[2]) {
                rows[cy][cx] = GLYPH_SPAWN;
            }
        }
    }
    let mut def = base_def(Scenario::MyWayHome, rows_to_strings(rows), max_ticks);
    def.random_spawn_facing = true;
    def.alive_reward_per_tick = -0.1;
    def.armor_reward = 100.0;
    def.armor_ends_episode = true;
    def.items.push(ItemPlacement {
        kind: ItemKind::Armor,
        x: centers_x[2],
        y: centers_y[2],
    });
    def
}

fn deadly_corridor_def(width: usize, height: usize, max_ticks: u32) -> ScenarioDef {
    let mut rows = blank_layout(width, height, GLYPH_FLOOR);
    let mid = height / 2;
    rows[mid][1] = GLYPH_SPAWN;
    let mut def = base_def(Scenario::DeadlyCorridor, rows_to_strings(rows), max_ticks);
    def.attack_enabled = true;
    def.death_penalty = -100.0;
    def.armor_reward = 100.0;
    def.armor_ends_episode = true;
    def.start_weapon = Some((0, 60));
    def.enemies_chase = false;
    def.items.push(ItemPlacement {
        kind: ItemKind::Armor,
        x: width - 2,
        y: mid,
    });
    // Three pairs of guards flanking the walkway.
    let quarter = (width - 2) / 4;
    for i in 0..3 {
        let x = 1 + quarter * (i + 1);
        for &y in &[mid - 1, mid + 1] {
            def.enemies.push(EnemyPlacement {
                kind: EnemyKind::ShotgunGuy,
                x,
                y,
            });
        }
    }
    def
}

fn deathmatch_def(width: usize, height: usize, max_ticks: u32) -> ScenarioDef {
    let mut rows = blank_layout(width, height, GLYPH_FLOOR);
    // Open central square with one room in each cardinal direction; the
    // diagonal corners are solid blocks.
    let lo = (width.min(height) / 4).max(2);
    let hi_x = width - 1 - lo;
    let hi_y = height - 1 - lo;
    let door_x = width / 2;
    let door_y = height / 2;
    for (y, row) in rows.iter_mut().enumerate() {
        for (x, cell) in row.iter_mut().enumerate() {
            if (x < lo || x > hi_x) && (y < lo || y > hi_y) {
                *cell = GLYPH_WALL;
            }
        }
    }
    for (y, row) in rows.iter_mut().enumerate() {
        if (lo..=hi_y).contains(&y) && y != door_y {
            row[lo] = GLYPH_WALL;
            row[hi_x] = GLYPH_WALL;
        }
    }
    for x in lo..=hi_x {
        if x != door_x {
            rows[lo][x] = GLYPH_WALL;
            rows[hi_y][x] = GLYPH_WALL;
        }
    }
    // Agent spawns somewhere in the central square.
    for &(sx, sy) in &[
        (door_x, door_y),
        (lo + 1, lo + 1),
        (hi_x - 1, hi_y - 1),
        (lo + 1, hi_y - 1),
        (hi_x - 1, lo + 1),
    ] {
        rows[sy][sx] = GLYPH_SPAWN;
    }
    let mut def = base_def(Scenario::Deathmatch, rows_to_strings(rows), max_ticks);
    def.attack_enabled = true;
    def.death_penalty = -100.0;
    def.kill_rewards_enabled = true;
    def.start_weapon = Some((0, 40));
    def.declared_reward_range = (-100.0, 2400.0);
    def.kill_reward_rescale = Some(KillRewardRescale {
        threshold: 100.0,
        divisor: 10.0,
    });
    // North room: supplies. South room: chainsaw and shotgun. West room:
    // plasma and its cells. East room: chaingun and rockets.
    let n_y = (lo / 2).max(1);
    let s_y = height - 1 - n_y;
    let w_x = n_y;
    let e_x = width - 1 - n_y;
    def.items.extend([
        ItemPlacement { kind: ItemKind::Medkit, x: door_x - 2, y: n_y },
        ItemPlacement { kind: ItemKind::Medkit, x: door_x + 2, y: n_y },
        ItemPlacement { kind: ItemKind::Armor, x: door_x, y: n_y },
        ItemPlacement { kind: ItemKind::Weapon { slot: 1 }, x: door_x - 2, y: s_y },
        ItemPlacement { kind: ItemKind::Weapon { slot: 3 }, x: door_x + 2, y: s_y },
        ItemPlacement { kind: ItemKind::Ammo { slot: 3 }, x: door_x, y: s_y },
        ItemPlacement { kind: ItemKind::Weapon { slot: 6 }, x: w_x, y: door_y },
        ItemPlacement { kind: ItemKind::Ammo { slot: 6 }, x: w_x, y: door_y - 2 },
        ItemPlacement { kind: ItemKind::Ammo { slot: 6 }, x: w_x, y: door_y + 2 },
        ItemPlacement { kind: ItemKind::Weapon { slot: 4 }, x: e_x, y: door_y - 2 },
        ItemPlacement { kind: ItemKind::Ammo { slot: 4 }, x: e_x, y: door_y - 1 },
        ItemPlacement { kind: ItemKind::Weapon { slot: 5 }, x: e_x, y: door_y + 2 },
        ItemPlacement { kind: ItemKind::Ammo { slot: 5 }, x: e_x, y: door_y + 1 },
    ]);
    def.random_enemies = Some(RandomEnemyRules {
        count: 6,
        kinds: EnemyKind::ALL.to_vec(),
        respawn_delay_ticks: Some(60),
        min_spawn_distance: 4,
    });
    def
}

/// Build a scenario definition. `width`/`height`/`max_ticks` default to the
/// scenario's canonical values when `None`.
pub fn build_def(
    scenario: Scenario,
    width: Option<usize>,
    height: Option<usize>,
    max_ticks: Option<u32>,
    variant: Option<WeaponVariant>,
) -> Result<ScenarioDef> {
    let (dw, dh) = scenario.default_dims();
    let width = width.unwrap_or(dw);
    let height = height.unwrap_or(dh);
    let max_ticks = max_ticks.unwrap_or_else(|| scenario.default_max_ticks());
    if variant.is_some() && scenario != Scenario::Deathmatch {
        return Err(Error::config(
            "weapon variants only apply to the deathmatch scenario",
        ));
    }
    let min = match scenario {
        Scenario::DeadlyCorridor => (9, 5),
        Scenario::Deathmatch => (11, 11),
        Scenario::MyWayHome => (9, 9),
        _ => (5, 5),
    };
    if width < min.0 || height < min.1 {
        return Err(Error::config(format!(
            "{} needs at least {}x{}, got {width}x{height}",
            scenario.name(),
            min.0,
            min.1
        )));
    }
    let mut def = match scenario {
        Scenario::HealthGathering | Scenario::HealthGatheringSupreme => {
            health_gathering_def(scenario, width, height, max_ticks)
        }
        Scenario::MyWayHome => my_way_home_def(width, height, max_ticks),
        Scenario::DeadlyCorridor => deadly_corridor_def(width, height, max_ticks),
        Scenario::Deathmatch => deathmatch_def(width, height, max_ticks),
    };
    if let Some(v) = variant {
        def.name = format!("{}_{}", def.name, v.name());
        def.restrict_to_weapon(v.slot());
    }
    def.validate()?;
    Ok(def)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtin_defs_validate() {
        for scenario in Scenario::ALL {
            let def = build_def(scenario, None, None, None, None).unwrap();
            assert_eq!(def.width(), scenario.default_dims().0);
            assert_eq!(def.height(), scenario.default_dims().1);
        }
    }

    #[test]
    fn kill_reward_schedule() {
        assert_eq!(EnemyKind::Zombieman.kill_reward(), 100.0);
        assert_eq!(EnemyKind::ShotgunGuy.kill_reward(), 300.0);
        assert_eq!(EnemyKind::MarineChainsawVzd.kill_reward(), 300.0);
        assert_eq!(EnemyKind::Demon.kill_reward(), 300.0);
        assert_eq!(EnemyKind::ChaingunGuy.kill_reward(), 400.0);
        assert_eq!(EnemyKind::HellKnight.kill_reward(), 1000.0);
        let sum: f64 = EnemyKind::ALL.iter().map(|k| k.kill_reward()).sum();
        assert_eq!(sum, 2400.0);
    }

    #[test]
    fn unknown_enemy_name_is_config_error() {
        assert!(matches!(EnemyKind::parse("Imp"), Err(Error::Config(_))));
    }

    #[test]
    fn corridor_has_six_flanking_guards_and_goal_armor() {
        let def = build_def(Scenario::DeadlyCorridor, None, None, None, None).unwrap();
        assert_eq!(def.enemies.len(), 6);
        assert!(def.enemies.iter().all(|e| e.kind == EnemyKind::ShotgunGuy));
        assert_eq!(def.items.len(), 1);
        assert_eq!(def.items[0].kind, ItemKind::Armor);
        assert_eq!(def.items[0].x, def.width() - 2);
        assert!(def.armor_ends_episode);
        assert_eq!(def.armor_reward, 100.0);
    }

    #[test]
    fn variant_strips_other_weapons_and_ammo() {
        let def = build_def(
            Scenario::Deathmatch,
            None,
            None,
            None,
            Some(WeaponVariant::Chainsaw),
        )
        .unwrap();
        for item in &def.items {
            match item.kind {
                ItemKind::Weapon { slot } | ItemKind::Ammo { slot } => {
                    assert_eq!(slot, WeaponVariant::Chainsaw.slot())
                }
                _ => {}
            }
        }
        // Non-weapon supplies stay.
        assert!(def.items.iter().any(|i| i.kind == ItemKind::Medkit));
    }

    #[test]
    fn five_variants_enumerable() {
        assert_eq!(WeaponVariant::ALL.len(), 5);
        let slots: std::collections::HashSet<u8> =
            WeaponVariant::ALL.iter().map(|v| v.slot()).collect();
        assert_eq!(slots.len(), 5);
    }

    #[test]
    fn variant_on_non_deathmatch_is_config_error() {
        let err = build_def(
            Scenario::MyWayHome,
            None,
            None,
            None,
            Some(WeaponVariant::Rocket),
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn def_json_roundtrip() {
        let def = build_def(Scenario::Deathmatch, None, None, None, None).unwrap();
        let json = def.to_json_pretty().unwrap();
        let back = ScenarioDef::from_json(&json).unwrap();
        assert_eq!(back, def);
    }

    #[test]
    fn ragged_layout_rejected() {
        let def = build_def(Scenario::HealthGathering, None, None, None, None).unwrap();
        let mut bad = def;
        bad.layout[1].push('#');
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn scenario_taxonomies_use_canonical_names() {
        let doom = EventTaxonomy::doom26();
        for scenario in Scenario::ALL {
            let tax = scenario_taxonomy(scenario);
            for name in tax.names() {
                assert!(doom.index(name).is_some(), "{name} not canonical");
            }
        }
        assert_eq!(scenario_taxonomy(Scenario::Deathmatch).size(), 26);
    }
}
