//! Path following with four discrete actions, the scripted look-around and
//! tracking-loss recovery programs, and the bump detector.
//!
//! Angles are counterclockwise-positive: a target to the left of the heading
//! gives a positive error and a `TurnLeft` command.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::geom::{normalize_angle, Point2, Pose};
use crate::planning::Path;

/// Remaining angles or distances at or below this count as exhausted.
const PROGRAM_EPS: f64 = 1e-9;

/// The robot's command alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Forward(f64),
    TurnLeft(f64),
    TurnRight(f64),
    Stay,
}

impl Action {
    /// Signed commanded rotation (left positive).
    pub fn rotation(&self) -> f64 {
        match *self {
            Action::TurnLeft(d) => d,
            Action::TurnRight(d) => -d,
            _ => 0.0,
        }
    }

    pub fn is_forward(&self) -> bool {
        matches!(self, Action::Forward(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FollowerParams {
    /// Forward is allowed while |angular error| is strictly below this.
    pub angle_threshold: f64,
    /// Rotation per turn action, rad.
    pub turn_step: f64,
    /// Translation per forward action, m.
    pub forward_step: f64,
    pub waypoint_radius: f64,
    pub goal_radius: f64,
    /// Forward distance of the recovery program, m.
    pub forward_nudge: f64,
}

impl Default for FollowerParams {
    fn default() -> Self {
        Self {
            angle_threshold: 5f64.to_radians(),
            turn_step: 10f64.to_radians(),
            forward_step: 0.1,
            waypoint_radius: 0.15,
            goal_radius: 0.2,
            forward_nudge: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RecoveryStage {
    Turn1(f64),
    Forward(f64),
    Turn2(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FollowerMode {
    /// Remaining rotation of the initial look-around.
    LookAround(f64),
    FollowPath,
    Recovery(RecoveryStage),
    Idle,
}

/// Output of [`FollowerState::follow_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowStep {
    pub action: Action,
    /// Angular error to the tracked waypoint, when one exists.
    pub angular_error: Option<f64>,
    /// Set when called with an empty path.
    pub empty_path: bool,
}

/// Output of [`FollowerState::recovery_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryStep {
    pub action: Action,
    /// The program finished with this action; the follower is back in
    /// `FollowPath` and the caller should replan.
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowerState {
    pub mode: FollowerMode,
    pub params: FollowerParams,
    /// Index of the waypoint currently tracked.
    pub next_waypoint: usize,
}

impl FollowerState {
    /// A follower that starts with the full 2π look-around.
    pub fn new(params: FollowerParams) -> Self {
        Self {
            mode: FollowerMode::LookAround(TAU),
            params,
            next_waypoint: 1,
        }
    }

    pub fn with_mode(params: FollowerParams, mode: FollowerMode) -> Self {
        Self {
            mode,
            params,
            next_waypoint: 1,
        }
    }

    /// Starts tracking a fresh path from its first waypoint after the start.
    pub fn reset_path(&mut self) {
        self.next_waypoint = 1;
        if self.mode == FollowerMode::Idle {
            self.mode = FollowerMode::FollowPath;
        }
    }

    /// Enters (or restarts) the recovery program.
    pub fn enter_recovery(&mut self) {
        self.mode = FollowerMode::Recovery(RecoveryStage::Turn1(PI));
    }

    pub fn in_recovery(&self) -> bool {
        matches!(self.mode, FollowerMode::Recovery(_))
    }

    /// Skips the rest of the recovery forward stage (used when it bumps).
    pub fn abort_recovery_forward(&mut self) {
        if let FollowerMode::Recovery(RecoveryStage::Forward(_)) = self.mode {
            self.mode = FollowerMode::Recovery(RecoveryStage::Turn2(PI));
        }
    }

    /// Steers toward the next waypoint of `path` from `pose`.
    pub fn follow_step(&mut self, pose: &Pose, path: &Path) -> FollowStep {
        let pts = path.points();
        let Some(&goal) = pts.last() else {
            return FollowStep {
                action: Action::Stay,
                angular_error: None,
                empty_path: true,
            };
        };
        if pose.position.distance(goal) <= self.params.goal_radius {
            self.mode = FollowerMode::Idle;
            return FollowStep {
                action: Action::Stay,
                angular_error: None,
                empty_path: false,
            };
        }
        self.mode = FollowerMode::FollowPath;
        let last = pts.len() - 1;
        let mut idx = self.next_waypoint.clamp(1.min(last), last);
        while idx < last && pose.position.distance(pts[idx]) <= self.params.waypoint_radius {
            idx += 1;
        }
        self.next_waypoint = idx;
        let err = heading_error(pose, pts[idx]);
        FollowStep {
            action: self.steer(err),
            angular_error: Some(err),
            empty_path: false,
        }
    }

    fn steer(&self, err: f64) -> Action {
        if err.abs() < self.params.angle_threshold {
            Action::Forward(self.params.forward_step)
        } else if err > 0.0 {
            Action::TurnLeft(self.params.turn_step)
        } else {
            Action::TurnRight(self.params.turn_step)
        }
    }

    /// One look-around tick. Returns `None` (and switches to `FollowPath`)
    /// when no rotation remains.
    pub fn look_around_step(&mut self) -> Option<Action> {
        let FollowerMode::LookAround(remaining) = self.mode else {
            return None;
        };
        if remaining <= PROGRAM_EPS {
            self.mode = FollowerMode::FollowPath;
            return None;
        }
        let delta = self.params.turn_step;
        let left = remaining - delta;
        self.mode = if left <= PROGRAM_EPS {
            FollowerMode::FollowPath
        } else {
            FollowerMode::LookAround(left)
        };
        Some(Action::TurnLeft(delta))
    }

    /// One tick of the recovery program: turn π left, nudge forward, turn π
    /// left again. Returns `None` outside recovery.
    pub fn recovery_step(&mut self) -> Option<RecoveryStep> {
        let FollowerMode::Recovery(stage) = self.mode else {
            return None;
        };
        let p = self.params;
        let (action, next) = match stage {
            RecoveryStage::Turn1(rem) => {
                let left = rem - p.turn_step;
                let next = if left > PROGRAM_EPS {
                    RecoveryStage::Turn1(left)
                } else if p.forward_nudge > PROGRAM_EPS {
                    RecoveryStage::Forward(p.forward_nudge)
                } else {
                    RecoveryStage::Turn2(PI)
                };
                (Action::TurnLeft(p.turn_step), Some(next))
            }
            RecoveryStage::Forward(rem) => {
                let left = rem - p.forward_step;
                let next = if left > PROGRAM_EPS {
                    RecoveryStage::Forward(left)
                } else {
                    RecoveryStage::Turn2(PI)
                };
                (Action::Forward(p.forward_step), Some(next))
            }
            RecoveryStage::Turn2(rem) => {
                let left = rem - p.turn_step;
                let next = (left > PROGRAM_EPS).then_some(RecoveryStage::Turn2(left));
                (Action::TurnLeft(p.turn_step), next)
            }
        };
        self.mode = match next {
            Some(s) => FollowerMode::Recovery(s),
            None => FollowerMode::FollowPath,
        };
        Some(RecoveryStep {
            action,
            finished: next.is_none(),
        })
    }
}

/// Signed angle from the heading of `pose` to the direction of `target`.
pub fn heading_error(pose: &Pose, target: Point2) -> f64 {
    normalize_angle((target - pose.position).angle() - pose.heading)
}

/// Value-style wrappers mirroring the state-machine methods.
pub fn follow_step(mut state: FollowerState, pose: &Pose, path: &Path) -> (FollowStep, FollowerState) {
    let out = state.follow_step(pose, path);
    (out, state)
}

pub fn look_around_step(mut state: FollowerState) -> (Option<Action>, FollowerState) {
    let out = state.look_around_step();
    (out, state)
}

pub fn recovery_step(mut state: FollowerState) -> (Option<RecoveryStep>, FollowerState) {
    let out = state.recovery_step();
    (out, state)
}

/// Fired when commanded forward motion produced no observed displacement
/// for a whole window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpEvent {
    pub pose: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BumpParams {
    pub window: f64,
    pub motion_epsilon: f64,
}

impl Default for BumpParams {
    fn default() -> Self {
        Self {
            window: 1.0,
            motion_epsilon: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BumpDetectorState {
    pub params: BumpParams,
    /// Stalled forward time accumulated in the current window.
    pub commanded_forward_since: Option<f64>,
    pub last_observed_position: Option<Point2>,
    anchor: Option<Point2>,
}

impl BumpDetectorState {
    pub fn new(params: BumpParams) -> Self {
        Self {
            params,
            commanded_forward_since: None,
            last_observed_position: None,
            anchor: None,
        }
    }

    pub fn reset(&mut self) {
        self.commanded_forward_since = None;
        self.anchor = None;
    }

    /// Feeds the command executed this tick and the pose observed after it.
    pub fn update(&mut self, commanded: &Action, observed: &Pose, dt: f64) -> Option<BumpEvent> {
        debug_assert!(dt > 0.0);
        let prev = self.last_observed_position.replace(observed.position);
        if !commanded.is_forward() {
            self.reset();
            return None;
        }
        let anchor = *self.anchor.get_or_insert(prev.unwrap_or(observed.position));
        if observed.position.distance(anchor) >= self.params.motion_epsilon {
            self.anchor = Some(observed.position);
            self.commanded_forward_since = None;
            return None;
        }
        let stalled = self.commanded_forward_since.unwrap_or(0.0) + dt;
        if stalled >= self.params.window - PROGRAM_EPS {
            self.commanded_forward_since = None;
            self.anchor = Some(observed.position);
            return Some(BumpEvent { pose: *observed });
        }
        self.commanded_forward_since = Some(stalled);
        None
    }
}

pub fn bump_update(
    mut state: BumpDetectorState,
    commanded: &Action,
    observed: &Pose,
    dt: f64,
) -> (Option<BumpEvent>, BumpDetectorState) {
    let ev = state.update(commanded, observed, dt);
    (ev, state)
}

#[cfg(test)]
mod tests;
