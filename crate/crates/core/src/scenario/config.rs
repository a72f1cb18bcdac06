//! Scenario configuration: TOML schema, profiles, parsing and validation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::RngExt;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::cccp::CccpConfig;
use crate::channel::{dbm_to_watts, ChannelError, PropagationParams};
use crate::geometry::Position3D;
use crate::layout::{ArrayConfig, FlightBox, NetworkLayout};
use crate::pso::SwarmConfig;
use crate::rng::{stream_rng, Stream};
use crate::scalar::from_db;
use crate::scene::Scene;
use crate::sinr::PowerBudget;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// Deployment of the transmit UAVs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Wireless backhaul, positions optimized.
    #[default]
    Mobile,
    /// Wireless backhaul, positions pinned.
    Fixed,
    /// Wired backhaul and pooled power, positions pinned.
    Tethered,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Mobile, Mode::Fixed, Mode::Tethered];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Mobile => "mobile",
            Mode::Fixed => "fixed",
            Mode::Tethered => "tethered",
        }
    }

    pub fn has_backhaul(self) -> bool {
        self != Mode::Tethered
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "mobile" => Ok(Mode::Mobile),
            "fixed" => Ok(Mode::Fixed),
            "tethered" => Ok(Mode::Tethered),
            other => Err(format!("unknown mode `{other}` (expected mobile, fixed or tethered)")),
        }
    }
}

/// Base set of defaults that omitted fields fall back to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 16x16 access arrays, 256-element backhaul arrays, 20 UEs, 64 symbols.
    #[default]
    Table1,
    /// 4x4 access arrays, 16-element backhaul arrays, 4 UEs, 16 symbols.
    Desk,
}

fn parse_level(s: &str, unit: &str) -> Result<f64, String> {
    let t = s.trim();
    let t = t.strip_suffix(unit).unwrap_or(t).trim();
    t.parse::<f64>()
        .map_err(|_| format!("expected a number or \"<number> {unit}\", got \"{s}\""))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NumberOrText {
    Number(f64),
    Text(String),
}

macro_rules! level_type {
    ($name:ident, $unit:literal, $doc:literal) => {
        #[doc = $doc]
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name(pub f64);

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_f64(self.0)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                match NumberOrText::deserialize(d)? {
                    NumberOrText::Number(v) => Ok($name(v)),
                    NumberOrText::Text(t) => parse_level(&t, $unit).map($name).map_err(serde::de::Error::custom),
                }
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                parse_level(s, $unit).map($name)
            }
        }
    };
}

level_type!(Dbm, "dBm", "Power in dBm; written as `30` or `\"30 dBm\"`.");
level_type!(Db, "dB", "Ratio in dB; written as `0` or `\"0 dB\"`.");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub n_tx: usize,
    pub n_ue: usize,
    /// Symbols per block, `N`.
    pub block_len: usize,
    pub gamma_db: Db,
    /// Per-UAV budget `P_k`.
    pub uav_power: Dbm,
    /// BS budget `P_b`.
    pub bs_power: Dbm,
    pub arrays: ArrayConfig,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_tx: 3,
            n_ue: 20,
            block_len: 64,
            gamma_db: Db(0.0),
            uav_power: Dbm(30.0),
            bs_power: Dbm(30.0),
            arrays: ArrayConfig::default(),
        }
    }
}

/// Side lengths of the service square (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaConfig {
    pub dx: f64,
    pub dy: f64,
}

impl Default for AreaConfig {
    fn default() -> Self {
        Self { dx: 500.0, dy: 500.0 }
    }
}

/// Node placements. Omitted positions are derived from the area:
/// pinned UAVs at `(dx/2, dy/2)`, `(dx/2, dy/4)`, `(3dx/4, 3dy/4)` and
/// `(dx/4, 3dy/4)` at `uav_height`, the target at `(dx/2, 3dy/4, 0)` and the
/// receive UAV at `(dx/4, dy/2, uav_height)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlacementConfig {
    pub uav_height: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pinned: Option<Vec<[f64; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_uav: Option<[f64; 3]>,
    pub bs: [f64; 3],
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            uav_height: 125.0,
            pinned: None,
            target: None,
            rx_uav: None,
            bs: [0.0, 0.0, 25.0],
        }
    }
}

/// Vertical flight limits and minimum separation; the horizontal limits are the area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlightConfig {
    pub z_min: f64,
    pub z_max: f64,
    pub min_separation: f64,
}

impl Default for FlightConfig {
    fn default() -> Self {
        Self {
            z_min: 20.0,
            z_max: 200.0,
            min_separation: 5.0,
        }
    }
}

/// Alternation between position search and precoder design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcdConfig {
    pub max_rounds: usize,
    /// Stop when the relative sensing-SINR gain of a round is below this.
    pub tol: f64,
    pub optimize_positions: bool,
}

impl Default for BcdConfig {
    fn default() -> Self {
        Self {
            max_rounds: 5,
            tol: 1e-3,
            optimize_positions: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub base: u64,
    pub count: usize,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self { base: 0, count: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub profile: Profile,
    pub mode: Mode,
    pub network: NetworkConfig,
    pub area: AreaConfig,
    pub placement: PlacementConfig,
    pub flight: FlightConfig,
    pub propagation: PropagationParams<f64>,
    pub cccp: CccpConfig,
    pub swarm: SwarmConfig,
    pub bcd: BcdConfig,
    pub seeds: SeedConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::for_profile(Profile::Table1)
    }
}

impl ScenarioConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let mut network = NetworkConfig::default();
        if profile == Profile::Desk {
            network.n_ue = 4;
            network.block_len = 16;
            network.arrays = ArrayConfig {
                uav_x: 4,
                uav_y: 4,
                uav_backhaul: 16,
                bs: 16,
            };
        }
        Self {
            schema_version: SCHEMA_VERSION,
            profile,
            mode: Mode::Mobile,
            network,
            area: AreaConfig::default(),
            placement: PlacementConfig::default(),
            flight: FlightConfig::default(),
            propagation: PropagationParams::default(),
            cccp: CccpConfig::default(),
            swarm: SwarmConfig::default(),
            bcd: BcdConfig::default(),
            seeds: SeedConfig::default(),
        }
    }

    pub fn desk() -> Self {
        Self::for_profile(Profile::Desk)
    }

    /// Parses a TOML document: omitted fields take the defaults of the
    /// document's `profile`, unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        // Typed pass first: reports unknown keys and type errors with line numbers.
        let typed: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut merged = toml::Table::try_from(Self::for_profile(typed.profile))
            .map_err(|e| ConfigError::Parse(e.to_string()))?;
        merge(&mut merged, table);
        let cfg: ScenarioConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every violated invariant, or `Ok`.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut e = Vec::new();
        let n = &self.network;
        if self.schema_version != SCHEMA_VERSION {
            e.push(format!("schema_version must be {SCHEMA_VERSION}, got {}", self.schema_version));
        }
        if n.n_tx == 0 {
            e.push("network.n_tx must be at least 1".into());
        }
        if n.block_len < 2 {
            e.push("network.block_len must be at least 2".into());
        }
        if n.arrays.uav_x == 0 || n.arrays.uav_y == 0 {
            e.push("network.arrays.uav_x and uav_y must be positive".into());
        }
        if self.mode.has_backhaul() && (n.arrays.uav_backhaul == 0 || n.arrays.bs == 0) {
            e.push("mobile and fixed modes need positive network.arrays.uav_backhaul and bs".into());
        }
        for (name, v) in [("gamma_db", n.gamma_db.0), ("uav_power", n.uav_power.0), ("bs_power", n.bs_power.0)] {
            if !v.is_finite() {
                e.push(format!("network.{name} must be finite"));
            }
        }
        if !(self.area.dx > 0.0 && self.area.dy > 0.0) {
            e.push("area.dx and area.dy must be positive".into());
        }
        let f = &self.flight;
        if !(f.z_min < f.z_max) {
            e.push(format!("flight.z_min ({}) must be below flight.z_max ({})", f.z_min, f.z_max));
        }
        if f.z_min < 0.0 {
            e.push("flight.z_min must be non-negative".into());
        }
        if f.min_separation < 0.0 {
            e.push("flight.min_separation must be non-negative".into());
        }
        match &self.placement.pinned {
            Some(p) if p.len() != n.n_tx => e.push(format!(
                "placement.pinned lists {} positions but network.n_tx is {}",
                p.len(),
                n.n_tx
            )),
            None if n.n_tx > 4 => {
                e.push("placement.pinned must be given when network.n_tx exceeds 4".into())
            }
            _ => {}
        }
        if e.is_empty() && self.mode == Mode::Mobile && !self.flight_box().admits(&self.pinned_positions()) {
            e.push("pinned positions (the mobile starting point) violate the flight box or separation".into());
        }
        let p = &self.propagation;
        if !(p.access_wavelength > 0.0 && p.access_bandwidth_hz > 0.0 && p.backhaul_bandwidth_hz > 0.0) {
            e.push("propagation wavelength and bandwidths must be positive".into());
        }
        let s = &self.swarm;
        if s.swarm_size < 2 {
            e.push("swarm.swarm_size must be at least 2".into());
        }
        if !(s.inertia > 0.0 && s.cognitive > 0.0 && s.social > 0.0 && s.vmax_fraction > 0.0) {
            e.push("swarm coefficients and vmax_fraction must be positive".into());
        }
        if !(0.0..=1.0).contains(&s.sensing_fraction) {
            e.push("swarm.sensing_fraction must lie in [0, 1]".into());
        }
        let c = &self.cccp;
        if !(c.inner_tol > 0.0 && c.outer_tol > 0.0) || c.max_inner == 0 || c.max_outer == 0 {
            e.push("cccp tolerances and iteration limits must be positive".into());
        }
        if !(self.bcd.tol > 0.0) {
            e.push("bcd.tol must be positive".into());
        }
        if self.seeds.count == 0 {
            e.push("seeds.count must be at least 1".into());
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(e))
        }
    }

    pub fn uav_power_w(&self) -> f64 {
        dbm_to_watts(self.network.uav_power.0)
    }

    pub fn bs_power_w(&self) -> f64 {
        dbm_to_watts(self.network.bs_power.0)
    }

    /// `P = P_b + N_Tx P_k`, the pooled budget of the tethered mode.
    pub fn total_power_w(&self) -> f64 {
        self.bs_power_w() + self.network.n_tx as f64 * self.uav_power_w()
    }

    pub fn budget(&self, mode: Mode) -> PowerBudget<f64> {
        match mode {
            Mode::Tethered => PowerBudget::Pooled {
                total: self.total_power_w(),
            },
            _ => PowerBudget::PerUav {
                uav: self.uav_power_w(),
                bs: self.bs_power_w(),
            },
        }
    }

    /// Positions of the pinned (fixed and tethered) UAVs, also the mobile start.
    pub fn pinned_positions(&self) -> Vec<Position3D<f64>> {
        if let Some(p) = &self.placement.pinned {
            return p.iter().map(|a| Position3D::from_slice(a)).collect();
        }
        let (dx, dy, h) = (self.area.dx, self.area.dy, self.placement.uav_height);
        [(0.5, 0.5), (0.5, 0.25), (0.75, 0.75), (0.25, 0.75)]
            .iter()
            .take(self.network.n_tx)
            .map(|&(fx, fy)| Position3D::new(fx * dx, fy * dy, h))
            .collect()
    }

    pub fn target(&self) -> Position3D<f64> {
        self.placement
            .target
            .map(|a| Position3D::from_slice(&a))
            .unwrap_or_else(|| Position3D::new(0.5 * self.area.dx, 0.75 * self.area.dy, 0.0))
    }

    pub fn rx_uav(&self) -> Position3D<f64> {
        self.placement
            .rx_uav
            .map(|a| Position3D::from_slice(&a))
            .unwrap_or_else(|| Position3D::new(0.25 * self.area.dx, 0.5 * self.area.dy, self.placement.uav_height))
    }

    pub fn flight_box(&self) -> FlightBox<f64> {
        FlightBox {
            lower: Position3D::new(0.0, 0.0, self.flight.z_min),
            upper: Position3D::new(self.area.dx, self.area.dy, self.flight.z_max),
            min_separation: self.flight.min_separation,
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds.count as u64).map(|i| self.seeds.base + i).collect()
    }

    /// UEs uniform over the area (redrawn per seed), UAVs at the pinned positions.
    pub fn layout(&self, seed: u64) -> NetworkLayout<f64> {
        let mut rng = stream_rng(seed, Stream::UePlacement);
        let ues = (0..self.network.n_ue)
            .map(|_| {
                let x = self.area.dx * rng.random::<f64>();
                let y = self.area.dy * rng.random::<f64>();
                Position3D::new(x, y, 0.0)
            })
            .collect();
        NetworkLayout {
            bs: Position3D::from_slice(&self.placement.bs),
            tx_uavs: self.pinned_positions(),
            rx_uav: self.rx_uav(),
            ues,
            target: self.target(),
            flight_box: self.flight_box(),
        }
    }

    /// The drop of `seed` with the budget of `mode`.
    pub fn scene(&self, mode: Mode, seed: u64) -> Result<Scene<f64>, ChannelError> {
        Scene::new(
            self.layout(seed),
            self.network.arrays,
            self.propagation.clone(),
            seed,
            self.network.block_len,
            from_db(self.network.gamma_db.0),
            self.budget(mode),
        )
    }
}

/// Reads and parses a config file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioConfig::parse(&text)
}

/// Recursively overlays `top` onto `base`.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
