use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{BumpParams, FollowerParams};
use crate::error::{Error, Result};
use crate::frontier::CostParams;
use crate::sim::SlamParams;
use crate::sim::SensorParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Enhancements {
    pub bump_detector: bool,
    /// Max-pool downsampling plus obstacle inflation before planning.
    pub obstacle_expanding: bool,
    /// Path-length cost with the turn-angle term.
    pub orientation_coef: bool,
}

impl Enhancements {
    pub fn all() -> Self {
        Self {
            bump_detector: true,
            obstacle_expanding: true,
            orientation_coef: true,
        }
    }
}

/// Distance term used when the orientation term is off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// Straight-line distance to the frontier centroid.
    #[default]
    Euclidean,
    /// Length of the grid path to the frontier.
    PathLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthMode {
    #[default]
    IdealDepth,
    CorruptedDepth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Label used in reports.
    pub name: String,
    /// Scene `.pgm` file, when the config names one.
    pub scene: Option<PathBuf>,
    /// Episode length, s.
    pub duration: f64,
    /// Simulation ticks per second.
    pub tick_rate: f64,
    /// Exploration replanning rate, Hz.
    pub plan_rate: f64,
    pub enhancements: Enhancements,
    pub cost: CostParams,
    pub cost_mode: CostMode,
    pub depth: DepthMode,
    pub seeds: Vec<u64>,
    /// Coverage sampling times, s.
    pub checkpoint_times: Vec<f64>,
    pub min_frontier_size: usize,
    /// A goal without progress for this long is blacklisted, s.
    pub goal_timeout: f64,
    /// Minimum decrease of the goal distance that counts as progress, m.
    pub progress_epsilon: f64,
    /// Goals closer than this to a blacklisted goal are skipped, m.
    pub blacklist_radius: f64,
    /// A new goal farther than this from the previous one is a goal switch, m.
    pub goal_switch_distance: f64,
    /// Relative coverage above which the scene counts as finished.
    pub finish_threshold: f64,
    pub pool_factor: i64,
    pub inflate_radius: i64,
    pub sensor: SensorParams,
    pub slam: SlamParams,
    pub follower: FollowerParams,
    pub bump: BumpParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            scene: None,
            duration: 240.0,
            tick_rate: 10.0,
            plan_rate: 5.0,
            enhancements: Enhancements::default(),
            cost: CostParams::default(),
            cost_mode: CostMode::Euclidean,
            depth: DepthMode::IdealDepth,
            seeds: (0..5).collect(),
            checkpoint_times: (1..=16).map(|k| 15.0 * k as f64).collect(),
            min_frontier_size: 3,
            goal_timeout: 30.0,
            progress_epsilon: 0.1,
            blacklist_radius: 0.3,
            goal_switch_distance: 0.5,
            finish_threshold: 0.95,
            pool_factor: 2,
            inflate_radius: 1,
            sensor: SensorParams::default(),
            slam: SlamParams::default(),
            follower: FollowerParams::default(),
            bump: BumpParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return bad(format!("duration must be finite and >= 0, got {}", self.duration));
        }
        if !(self.tick_rate > 0.0) || !(self.plan_rate > 0.0) {
            return bad("tick and planning rates must be > 0".into());
        }
        if self.checkpoint_times.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("checkpoint times must be strictly increasing".into());
        }
        if self.checkpoint_times.first().is_some_and(|&t| !(t > 0.0)) {
            return bad("checkpoint times must be > 0".into());
        }
        if self.checkpoint_times.last().is_some_and(|&t| t > self.duration + 1e-9) {
            return bad(format!(
                "last checkpoint {} exceeds duration {}",
                self.checkpoint_times.last().unwrap(),
                self.duration
            ));
        }
        if self.pool_factor < 1 || self.inflate_radius < 0 {
            return bad("pool factor must be >= 1 and inflation radius >= 0".into());
        }
        if !(self.finish_threshold > 0.0 && self.finish_threshold <= 1.0) {
            return bad(format!("finish threshold must be in (0, 1], got {}", self.finish_threshold));
        }
        if !(self.sensor.max_range > 0.0) || self.sensor.n_rays == 0 {
            return bad("sensor needs a positive range and at least one ray".into());
        }
        self.cost.validate()
    }

    /// Sets the duration and drops checkpoints past it.
    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self.checkpoint_times.retain(|&t| t <= duration + 1e-9);
        self
    }

    pub fn with_enhancements(mut self, enhancements: Enhancements) -> Self {
        self.enhancements = enhancements;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Sensor parameters with the corruption switch set from `depth`.
    pub fn sensor_params(&self) -> SensorParams {
        SensorParams {
            corrupted: self.depth == DepthMode::CorruptedDepth,
            ..self.sensor
        }
    }

    /// Whether frontiers are scored by path length rather than straight
    /// distance.
    pub fn uses_path_cost(&self) -> bool {
        self.enhancements.orientation_coef || self.cost_mode == CostMode::PathLength
    }

    /// Cost weights in effect: `gamma` is zero unless the orientation term
    /// is enabled.
    pub fn effective_cost(&self) -> CostParams {
        CostParams {
            gamma: if self.enhancements.orientation_coef { self.cost.gamma } else { 0.0 },
            ..self.cost
        }
    }
}

/// FNV-1a hash of the configuration, ignoring its name, scene and seeds.
pub fn config_hash(config: &RunConfig) -> String {
    let mut c = config.clone();
    c.name.clear();
    c.scene = None;
    c.seeds.clear();
    let json = serde_json::to_string(&c).expect("config serializes");
    format!("{:016x}", fnv1a(json.as_bytes()))
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
