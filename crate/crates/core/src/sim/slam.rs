//! Visual SLAM surrogate: accumulated pose drift plus rotation-driven
//! tracking losses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::Action;
use crate::geom::{normalize_angle, Point2, Pose};
use crate::grid_map::OccupancyGrid;
use crate::sim::DepthScan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tracking {
    Ok,
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlamParams {
    /// Std-dev of translation drift added per forward step (m).
    pub drift_sigma_trans: f64,
    /// Std-dev of heading drift added per turn step (rad).
    pub drift_sigma_rot: f64,
    /// Loss probability per radian of commanded rotation in one tick.
    pub loss_prob_per_rad: f64,
    /// Fraction of scan endpoints that must land on known cells to relocalize.
    pub overlap_threshold: f64,
}

impl Default for SlamParams {
    fn default() -> Self {
        Self {
            drift_sigma_trans: 0.002,
            drift_sigma_rot: 0.001,
            loss_prob_per_rad: 0.01,
            overlap_threshold: 0.3,
        }
    }
}

/// What the surrogate reports after one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlamOutput {
    Estimate(Pose),
    /// Tracking was lost during this tick.
    LostNow,
    /// Still lost from an earlier tick; estimates stay frozen.
    StillLost,
}

#[derive(Debug, Clone)]
pub struct SlamSurrogateState {
    pub tracking: Tracking,
    pub params: SlamParams,
    pub loss_count: u32,
    pub rng_seed: u64,
    rng: ChaCha8Rng,
    anchor: Point2,
    drift_xy: Point2,
    drift_theta: f64,
}

impl SlamSurrogateState {
    /// Drift is expressed relative to `anchor`, the pose where mapping began.
    pub fn new(params: SlamParams, anchor: Point2, rng_seed: u64) -> Self {
        Self {
            tracking: Tracking::Ok,
            params,
            loss_count: 0,
            rng_seed,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
            anchor,
            drift_xy: Point2::default(),
            drift_theta: 0.0,
        }
    }

    /// Current estimate of `true_pose` under the accumulated drift.
    pub fn estimate(&self, true_pose: &Pose) -> Pose {
        let rel = true_pose.position - self.anchor;
        let (s, c) = self.drift_theta.sin_cos();
        let rotated = Point2::new(c * rel.x - s * rel.y, s * rel.x + c * rel.y);
        Pose {
            position: self.anchor + rotated + self.drift_xy,
            heading: normalize_angle(true_pose.heading + self.drift_theta),
        }
    }

    /// Maps a point from the estimated (map) frame back to the true frame.
    pub fn to_true_frame(&self, p: Point2) -> Point2 {
        let rel = p - self.drift_xy - self.anchor;
        let (s, c) = (-self.drift_theta).sin_cos();
        self.anchor + Point2::new(c * rel.x - s * rel.y, s * rel.x + c * rel.y)
    }

    /// One tick. `action` is the command just executed, `true_pose` the
    /// resulting ground-truth pose.
    pub fn update(&mut self, true_pose: &Pose, action: &Action, dt: f64) -> SlamOutput {
        debug_assert!(dt > 0.0);
        if self.tracking == Tracking::Lost {
            return SlamOutput::StillLost;
        }
        let rotation = action.rotation().abs();
        let p_loss = (self.params.loss_prob_per_rad * rotation).clamp(0.0, 1.0);
        if p_loss > 0.0 && self.rng.random::<f64>() < p_loss {
            self.tracking = Tracking::Lost;
            self.loss_count += 1;
            return SlamOutput::LostNow;
        }
        match action {
            Action::Forward(_) if self.params.drift_sigma_trans > 0.0 => {
                let n = Normal::new(0.0, self.params.drift_sigma_trans).expect("finite sigma");
                self.drift_xy = self.drift_xy + Point2::new(n.sample(&mut self.rng), n.sample(&mut self.rng));
            }
            Action::TurnLeft(_) | Action::TurnRight(_) if self.params.drift_sigma_rot > 0.0 => {
                let n = Normal::new(0.0, self.params.drift_sigma_rot).expect("finite sigma");
                self.drift_theta += n.sample(&mut self.rng);
            }
            _ => {}
        }
        SlamOutput::Estimate(self.estimate(true_pose))
    }

    /// Attempts relocalization after a recovery maneuver; succeeds when the
    /// view overlap reaches the configured threshold.
    pub fn relocalize(&mut self, overlap: f64) -> bool {
        if self.tracking == Tracking::Lost && overlap >= self.params.overlap_threshold {
            self.tracking = Tracking::Ok;
        }
        self.tracking == Tracking::Ok
    }
}

/// Value-style wrapper around [`SlamSurrogateState::update`].
pub fn slam_update(
    mut state: SlamSurrogateState,
    true_pose: &Pose,
    action: &Action,
    dt: f64,
) -> (SlamOutput, SlamSurrogateState) {
    let out = state.update(true_pose, action, dt);
    (out, state)
}

/// Fraction of scan endpoints (seen from `pose` in the map frame) that fall
/// on cells already known in `map`.
pub fn scan_overlap(map: &OccupancyGrid, pose: &Pose, scan: &DepthScan) -> f64 {
    if scan.rays.is_empty() {
        return 0.0;
    }
    // Hits end on the obstacle boundary; nudge them inside the hit cell.
    let nudge = map.resolution() * 0.5;
    let known = scan
        .rays
        .iter()
        .filter(|r| {
            let reach = if r.hit { r.range + nudge } else { r.range };
            let p = pose.position + Point2::from_angle(pose.heading + r.bearing) * reach;
            map.get(map.world_to_cell(p)).is_known()
        })
        .count();
    known as f64 / scan.rays.len() as f64
}
