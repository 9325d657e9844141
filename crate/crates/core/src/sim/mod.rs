//! Ground-truth world: scenes, kinematics over the four discrete actions,
//! ray-cast depth sensing and the SLAM surrogate.

mod scene;
mod scene_gen;
mod scene_io;
mod slam;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::Action;
use crate::geom::{Point2, Pose};
use crate::grid_map::raycast::{supercover, RayWalk};
use crate::grid_map::CellState;

pub use scene::{OpeningWidths, Scene};
pub use scene_gen::{generate_scene, Layout, SceneGenSpec, MAX_SCENE_AREA, MIN_SCENE_AREA};
pub use scene_io::{read_scene, write_scene};
pub use slam::{scan_overlap, slam_update, SlamOutput, SlamParams, SlamSurrogateState, Tracking};

/// One depth ray: bearing relative to the robot heading, measured range and
/// whether the ray ended on an obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub bearing: f64,
    pub range: f64,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthScan {
    pub rays: Vec<Ray>,
    pub fov: f64,
    pub max_range: f64,
}

impl DepthScan {
    pub fn empty(fov: f64, max_range: f64) -> Self {
        Self {
            rays: Vec::new(),
            fov,
            max_range,
        }
    }
}

/// Depth corruption standing in for learned monocular depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionParams {
    /// Standard deviation of the multiplicative range noise.
    pub range_noise_sigma: f64,
    /// Openings narrower than this (meters, measured across the ray) may be
    /// reported as a wall.
    pub gap_threshold: f64,
    /// Probability that a ray entering a narrow opening reports a hit there.
    pub p_close: f64,
    /// Openings closer than this to the camera are always seen correctly.
    pub min_distance: f64,
}

impl Default for CorruptionParams {
    fn default() -> Self {
        Self {
            range_noise_sigma: 0.03,
            gap_threshold: 0.7,
            p_close: 0.5,
            min_distance: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorParams {
    pub fov: f64,
    pub max_range: f64,
    pub n_rays: usize,
    pub corrupted: bool,
    pub corruption: CorruptionParams,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            fov: 90f64.to_radians(),
            max_range: 5.0,
            n_rays: 180,
            corrupted: false,
            corruption: CorruptionParams::default(),
        }
    }
}

impl SensorParams {
    pub fn bearings(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n_rays;
        (0..n).map(move |i| {
            if n == 1 {
                0.0
            } else {
                -self.fov / 2.0 + self.fov * i as f64 / (n - 1) as f64
            }
        })
    }
}

/// Casts the scan from `true_pose`. Invisible obstacles are not seen.
pub fn sense<R: Rng + ?Sized>(
    scene: &Scene,
    true_pose: &Pose,
    params: &SensorParams,
    rng: &mut R,
) -> DepthScan {
    let gt = scene.ground_truth();
    let res = gt.resolution();
    let origin = gt.to_grid_units(true_pose.position);
    let limit = params.max_range / res;
    let noise = Normal::new(0.0, params.corruption.range_noise_sigma.max(0.0)).ok();
    let mut rays = Vec::with_capacity(params.n_rays);
    for bearing in params.bearings() {
        let theta = true_pose.heading + bearing;
        let dir = Point2::from_angle(theta);
        let mut hit_at = None;
        let mut in_opening = false;
        for (cell, t) in RayWalk::new(origin, (dir.x, dir.y), limit) {
            if gt.get(cell) != CellState::Free {
                hit_at = Some(t * res);
                break;
            }
            if params.corrupted && t * res >= params.corruption.min_distance {
                let narrow = scene
                    .openings()
                    .width_across(cell, theta)
                    .is_some_and(|w| w < params.corruption.gap_threshold);
                if narrow && !in_opening && rng.random::<f64>() < params.corruption.p_close {
                    hit_at = Some(t * res);
                    break;
                }
                in_opening = narrow;
            }
        }
        let ray = match hit_at {
            Some(r) if r <= params.max_range => {
                let mut range = r;
                if params.corrupted {
                    if let Some(n) = &noise {
                        range = (r * (1.0 + n.sample(rng))).clamp(0.0, params.max_range);
                    }
                }
                Ray {
                    bearing,
                    range,
                    hit: range < params.max_range,
                }
            }
            _ => Ray {
                bearing,
                range: params.max_range,
                hit: false,
            },
        };
        rays.push(ray);
    }
    DepthScan {
        rays,
        fov: params.fov,
        max_range: params.max_range,
    }
}

/// Applies one action to the true pose. Forward motion is cancelled when
/// the swept segment touches anything but traversable free space.
pub fn step_kinematics(scene: &Scene, true_pose: &Pose, action: &Action) -> Pose {
    match *action {
        Action::Stay => *true_pose,
        Action::TurnLeft(d) => true_pose.rotated(d),
        Action::TurnRight(d) => true_pose.rotated(-d),
        Action::Forward(dx) => {
            let target = true_pose.position + true_pose.orientation() * dx;
            let gt = scene.ground_truth();
            let clear = supercover(
                gt.to_grid_units(true_pose.position),
                gt.to_grid_units(target),
                |c| scene.is_traversable(c),
            );
            if clear {
                Pose {
                    position: target,
                    heading: true_pose.heading,
                }
            } else {
                *true_pose
            }
        }
    }
}
