use std::borrow::Cow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{config_hash, fnv1a, RunConfig};
use crate::control::{Action, BumpDetectorState, FollowerMode, FollowerState};
use crate::error::Result;
use crate::frontier::{
    cost_baseline, cost_enhanced_terms, detect_frontiers, path_from_field, select_goal, Frontier,
    FrontierRecord, ROBOT_SNAP_RADIUS,
};
use crate::geom::{Cell, Point2, Pose};
use crate::grid_map::{CoverageSample, MarkOutcome, OccupancyGrid};
use crate::planning::{line_of_sight, replan_due, snap_to_free, DistanceField, Path, Planner, GOAL_SNAP_RADIUS};
use crate::sim::{scan_overlap, SlamOutput, SlamSurrogateState, Tracking};
use crate::sim::{sense, step_kinematics, Scene, SensorParams};

const INITIAL_MAP_CELLS: i64 = 64;
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    /// Ran for the full duration.
    Duration,
    /// No selectable frontier was left.
    Exhausted,
    /// A module error aborted the run.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: String,
    pub config_hash: String,
    pub scene: String,
    pub scene_area: f64,
    pub seed: u64,
    /// Coverage at t = 0 followed by one sample per checkpoint.
    pub samples: Vec<CoverageSample>,
    pub finished: bool,
    pub finish_time: Option<f64>,
    pub tracking_losses: u32,
    pub goal_switches: u32,
    pub bumps: u32,
    pub replans: u32,
    pub distance: f64,
    pub rotation: f64,
    /// Simulated time when the run stopped, s.
    pub end_time: f64,
    pub end_reason: EndReason,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        self.end_reason == EndReason::Failed
    }

    /// Last coverage sample.
    pub fn final_sample(&self) -> Option<&CoverageSample> {
        self.samples.last()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Replan {
        t: f64,
        pose: Pose,
        frontiers: Vec<FrontierRecord>,
        goal: Option<Point2>,
        path_length: Option<f64>,
    },
    TrackingLost { t: f64, pose: Pose },
    Relocalization { t: f64, overlap: f64, ok: bool },
    Bump { t: f64, pose: Pose },
    GoalBlacklisted { t: f64, goal: Point2 },
    Checkpoint { t: f64, sample: CoverageSample },
    Finished { t: f64 },
    End { t: f64, reason: EndReason },
}

/// Everything a run leaves behind.
#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub record: RunRecord,
    pub trace: Vec<TraceEvent>,
    /// Final map in the estimated frame.
    pub map: OccupancyGrid,
    pub pose: Pose,
    pub path: Option<Path>,
}

/// Runs one episode and returns its record. Module errors inside the loop
/// end the run early with a failed record; an invalid config is an error.
pub fn run_episode(scene: &Scene, config: &RunConfig, seed: u64) -> Result<RunRecord> {
    simulate(scene, config, seed, false).map(|o| o.record)
}

/// Runs one episode, optionally collecting a trace.
pub fn simulate(scene: &Scene, config: &RunConfig, seed: u64, trace: bool) -> Result<EpisodeOutcome> {
    config.validate()?;
    let mut ep = Episode::new(scene, config, seed, trace)?;
    let result = ep.run();
    let t = ep.clock;
    let (reason, error) = match result {
        Ok(r) => (r, None),
        Err(e) => {
            log::warn!("run {} / {} / seed {seed} failed at t={t:.1}: {e}", config.name, scene.name());
            (EndReason::Failed, Some(e.to_string()))
        }
    };
    if reason != EndReason::Failed {
        ep.fill_checkpoints();
    }
    ep.emit(TraceEvent::End { t, reason });
    let record = RunRecord {
        config: config.name.clone(),
        config_hash: config_hash(config),
        scene: scene.name().to_string(),
        scene_area: scene.area(),
        seed,
        samples: ep.samples,
        finished: ep.finish_time.is_some(),
        finish_time: ep.finish_time,
        tracking_losses: ep.slam.loss_count,
        goal_switches: ep.goal_switches,
        bumps: ep.bumps,
        replans: ep.replans,
        distance: ep.distance,
        rotation: ep.rotation,
        end_time: t,
        end_reason: reason,
        error,
    };
    Ok(EpisodeOutcome {
        record,
        trace: ep.trace.unwrap_or_default(),
        map: ep.map,
        pose: ep.est,
        path: ep.path,
    })
}

/// Independent random streams for the sensor and the SLAM surrogate,
/// shared by every configuration run on the same scene and seed.
fn stream_seeds(scene: &str, seed: u64) -> (u64, u64) {
    let base = fnv1a(scene.as_bytes()) ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    (splitmix(base ^ 1), splitmix(base ^ 2))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
struct Goal {
    point: Point2,
    best_distance: f64,
    progress_at: f64,
}

enum Replan {
    Planned,
    Exhausted,
    NoStart,
}

struct Episode<'a> {
    scene: &'a Scene,
    cfg: &'a RunConfig,
    sensor: SensorParams,
    dt: f64,
    clock: f64,
    sense_rng: ChaCha8Rng,
    true_pose: Pose,
    est: Pose,
    slam: SlamSurrogateState,
    map: OccupancyGrid,
    follower: FollowerState,
    bump: Option<BumpDetectorState>,
    planner: Planner,
    goal: Option<Goal>,
    path: Option<Path>,
    blacklist: Vec<Point2>,
    last_plan: Option<f64>,
    force_replan: bool,
    recovery_done: bool,
    gt_known: usize,
    known: usize,
    aligned: usize,
    samples: Vec<CoverageSample>,
    next_checkpoint: usize,
    finish_time: Option<f64>,
    goal_switches: u32,
    bumps: u32,
    replans: u32,
    distance: f64,
    rotation: f64,
    trace: Option<Vec<TraceEvent>>,
}

impl<'a> Episode<'a> {
    fn new(scene: &'a Scene, cfg: &'a RunConfig, seed: u64, trace: bool) -> Result<Self> {
        let gt = scene.ground_truth();
        let spawn = scene.spawn();
        let (sense_seed, slam_seed) = stream_seeds(scene.name(), seed);
        // Map cells line up with ground-truth cells while there is no drift.
        let sc = gt.world_to_cell(spawn.position);
        let half = INITIAL_MAP_CELLS / 2;
        let origin = gt.cell_center(Cell::new(sc.x - half, sc.y - half))
            - Point2::new(gt.resolution() / 2.0, gt.resolution() / 2.0);
        let map = OccupancyGrid::new(
            INITIAL_MAP_CELLS as usize,
            INITIAL_MAP_CELLS as usize,
            gt.resolution(),
            origin,
        )?;
        Ok(Self {
            scene,
            cfg,
            sensor: cfg.sensor_params(),
            dt: 1.0 / cfg.tick_rate,
            clock: 0.0,
            sense_rng: ChaCha8Rng::seed_from_u64(sense_seed),
            true_pose: spawn,
            est: spawn,
            slam: SlamSurrogateState::new(cfg.slam, spawn.position, slam_seed),
            map,
            follower: FollowerState::new(cfg.follower),
            bump: cfg
                .enhancements
                .bump_detector
                .then(|| BumpDetectorState::new(cfg.bump)),
            planner: Planner::new(),
            goal: None,
            path: None,
            blacklist: Vec::new(),
            last_plan: None,
            force_replan: true,
            recovery_done: false,
            gt_known: gt.count_known(),
            known: 0,
            aligned: 0,
            samples: Vec::new(),
            next_checkpoint: 0,
            finish_time: None,
            goal_switches: 0,
            bumps: 0,
            replans: 0,
            distance: 0.0,
            rotation: 0.0,
            trace: trace.then(Vec::new),
        })
    }

    fn emit(&mut self, ev: TraceEvent) {
        if let Some(t) = self.trace.as_mut() {
            t.push(ev);
        }
    }

    fn run(&mut self) -> Result<EndReason> {
        self.observe()?;
        let s0 = self.sample(0.0);
        self.samples.push(s0);
        self.check_finish(0.0);
        let n_ticks = (self.cfg.duration * self.cfg.tick_rate + TIME_EPS).floor() as u64;
        for k in 0..n_ticks {
            let t0 = k as f64 * self.dt;
            self.clock = t0;
            let Some(action) = self.decide(t0)? else {
                return Ok(EndReason::Exhausted);
            };
            let t1 = (k + 1) as f64 * self.dt;
            self.clock = t1;
            self.act(&action, t1)?;
            self.check_finish(t1);
            self.take_checkpoints(t1);
        }
        Ok(EndReason::Duration)
    }

    /// Senses from the true pose and integrates into the map at the estimate.
    fn observe(&mut self) -> Result<()> {
        let scan = sense(self.scene, &self.true_pose, &self.sensor, &mut self.sense_rng);
        let c = self.map.world_to_cell(self.est.position);
        self.map.ensure_contains(c.offset(-2, -2), c.offset(2, 2));
        let newly = self.map.integrate_scan_mut(&self.est, &scan)?;
        self.account(&newly);
        Ok(())
    }

    fn account(&mut self, newly_known: &[Cell]) {
        let gt = self.scene.ground_truth();
        self.known += newly_known.len();
        self.aligned += newly_known
            .iter()
            .filter(|&&c| gt.get(gt.world_to_cell(self.map.cell_center(c))).is_known())
            .count();
    }

    fn sample(&self, t: f64) -> CoverageSample {
        let res = self.map.resolution();
        CoverageSample {
            t,
            abs_cells: self.known,
            abs_area: self.known as f64 * res * res,
            rel: (self.aligned as f64 / self.gt_known as f64).clamp(0.0, 1.0),
        }
    }

    fn check_finish(&mut self, t: f64) {
        if self.finish_time.is_none() && self.sample(t).rel > self.cfg.finish_threshold {
            self.finish_time = Some(t);
            self.emit(TraceEvent::Finished { t });
        }
    }

    fn take_checkpoints(&mut self, t: f64) {
        while let Some(&cp) = self.cfg.checkpoint_times.get(self.next_checkpoint) {
            if cp > t + TIME_EPS {
                break;
            }
            let s = self.sample(cp);
            self.samples.push(s);
            self.next_checkpoint += 1;
            self.emit(TraceEvent::Checkpoint { t: cp, sample: s });
        }
    }

    /// Samples the remaining checkpoints with the final coverage.
    fn fill_checkpoints(&mut self) {
        let horizon = self.cfg.duration;
        while let Some(&cp) = self.cfg.checkpoint_times.get(self.next_checkpoint) {
            if cp > horizon + TIME_EPS {
                break;
            }
            let s = self.sample(cp);
            self.samples.push(s);
            self.next_checkpoint += 1;
        }
    }

    /// Chooses the action for the tick starting at `t`; `None` ends the run.
    fn decide(&mut self, t: f64) -> Result<Option<Action>> {
        if self.slam.tracking == Tracking::Lost {
            let step = match self.follower.recovery_step() {
                Some(s) => s,
                None => {
                    self.follower.enter_recovery();
                    self.follower.recovery_step().expect("recovery just entered")
                }
            };
            self.recovery_done = step.finished;
            return Ok(Some(step.action));
        }
        if let FollowerMode::LookAround(_) = self.follower.mode {
            if let Some(a) = self.follower.look_around_step() {
                return Ok(Some(a));
            }
        }
        for _ in 0..2 {
            let due = match self.last_plan {
                None => true,
                Some(last) => replan_due(last, t, self.cfg.plan_rate)?,
            };
            if self.force_replan || self.path.is_none() || due {
                match self.replan(t)? {
                    Replan::Exhausted => return Ok(None),
                    Replan::NoStart => return Ok(Some(Action::Stay)),
                    Replan::Planned => {}
                }
            }
            let Some(path) = self.path.as_ref() else {
                return Ok(Some(Action::Stay));
            };
            let step = self.follower.follow_step(&self.est, path);
            if self.follower.mode != FollowerMode::Idle {
                return Ok(Some(step.action));
            }
            // Goal reached: pick the next one right away.
            self.path = None;
            self.force_replan = true;
        }
        Ok(Some(Action::Stay))
    }

    fn act(&mut self, action: &Action, t: f64) -> Result<()> {
        let before = self.true_pose;
        self.true_pose = step_kinematics(self.scene, &before, action);
        self.distance += before.position.distance(self.true_pose.position);
        self.rotation += action.rotation().abs();
        let was_tracking = self.slam.tracking == Tracking::Ok;
        match self.slam.update(&self.true_pose, action, self.dt) {
            SlamOutput::Estimate(e) => {
                self.est = e;
                self.observe()?;
            }
            SlamOutput::LostNow => {
                self.follower.enter_recovery();
                self.recovery_done = false;
                if let Some(b) = self.bump.as_mut() {
                    b.reset();
                }
                let pose = self.est;
                self.emit(TraceEvent::TrackingLost { t, pose });
            }
            SlamOutput::StillLost => {
                if self.recovery_done {
                    self.recovery_done = false;
                    self.try_relocalize(t)?;
                }
            }
        }
        if was_tracking && self.slam.tracking == Tracking::Ok {
            self.detect_bump(action, t);
        }
        Ok(())
    }

    fn try_relocalize(&mut self, t: f64) -> Result<()> {
        let scan = sense(self.scene, &self.true_pose, &self.sensor, &mut self.sense_rng);
        let candidate = self.slam.estimate(&self.true_pose);
        let overlap = scan_overlap(&self.map, &candidate, &scan);
        let ok = self.slam.relocalize(overlap);
        self.emit(TraceEvent::Relocalization { t, overlap, ok });
        if ok {
            self.est = candidate;
            let c = self.map.world_to_cell(self.est.position);
            self.map.ensure_contains(c.offset(-2, -2), c.offset(2, 2));
            let newly = self.map.integrate_scan_mut(&self.est, &scan)?;
            self.account(&newly);
            self.follower.mode = FollowerMode::FollowPath;
            self.path = None;
            self.force_replan = true;
        } else {
            self.follower.enter_recovery();
        }
        Ok(())
    }

    fn detect_bump(&mut self, action: &Action, t: f64) {
        let Some(det) = self.bump.as_mut() else {
            return;
        };
        let Some(ev) = det.update(action, &self.est, self.dt) else {
            return;
        };
        self.bumps += 1;
        // The blocked step spans up to two cells ahead of the robot.
        let step = ev.pose.orientation() * self.map.resolution();
        let mut newly = Vec::new();
        for pose in [ev.pose, Pose { position: ev.pose.position + step, ..ev.pose }] {
            if let MarkOutcome::Marked { cell, newly_known: true } = self.map.mark_cell_ahead(&pose) {
                newly.push(cell);
            }
        }
        self.account(&newly);
        self.path = None;
        self.force_replan = true;
        self.emit(TraceEvent::Bump { t, pose: ev.pose });
    }

    fn planning_grid(&self) -> Result<Cow<'_, OccupancyGrid>> {
        if !self.cfg.enhancements.obstacle_expanding {
            return Ok(Cow::Borrowed(&self.map));
        }
        let pooled = self.map.downsample_maxpool(self.cfg.pool_factor)?;
        Ok(Cow::Owned(pooled.inflate_obstacles(self.cfg.inflate_radius)?))
    }

    fn is_blacklisted(&self, p: Point2) -> bool {
        self.blacklist.iter().any(|b| b.distance(p) <= self.cfg.blacklist_radius)
    }

    fn blacklist_goal(&mut self, p: Point2, t: f64) {
        self.blacklist.push(p);
        self.emit(TraceEvent::GoalBlacklisted { t, goal: p });
    }

    fn replan(&mut self, t: f64) -> Result<Replan> {
        self.last_plan = Some(t);
        self.force_replan = false;
        self.replans += 1;
        let est = self.est;
        let grid = self.planning_grid()?;
        let (grid, robot_cell) = match snap_to_free(&grid, est.position, ROBOT_SNAP_RADIUS) {
            Some(c) => (grid, c),
            None => match snap_to_free(&self.map, est.position, ROBOT_SNAP_RADIUS) {
                Some(c) => (Cow::Borrowed(&self.map), c),
                None => return Ok(Replan::NoStart),
            },
        };
        let grid = grid.into_owned();
        let start = if grid.is_free(grid.world_to_cell(est.position)) {
            est.position
        } else {
            grid.cell_center(robot_cell)
        };
        let frontiers = detect_frontiers(&grid, robot_cell)?;
        let reach = self.cfg.follower.goal_radius;
        let mut targets: Vec<Vec<Point2>> = frontiers.iter().map(|f| goal_candidates(&grid, f)).collect();
        for ts in targets.iter_mut() {
            let reached: Vec<Point2> = ts.iter().copied().filter(|p| p.distance(est.position) <= reach).collect();
            ts.retain(|p| p.distance(est.position) > reach && !self.is_blacklisted(*p));
            if ts.is_empty() {
                // Standing on the goal while the frontier persists.
                for p in reached {
                    self.blacklist_goal(p, t);
                }
            }
        }
        let params = self.cfg.effective_cost();
        let mut records = Vec::new();
        let mut costs = vec![f64::INFINITY; frontiers.len()];
        let mut field = if self.cfg.uses_path_cost() {
            Some(DistanceField::compute(&grid, robot_cell)?)
        } else {
            None
        };
        for (i, f) in frontiers.iter().enumerate() {
            if targets[i].is_empty() && field.is_none() {
                continue;
            }
            let (distance, turn, cost) = match &field {
                None => {
                    let pose = Pose { position: start, ..est };
                    (f.centroid.distance(start), 0.0, cost_baseline(f, &pose, &params))
                }
                Some(field) => {
                    let mut path = targets[i]
                        .iter()
                        .find_map(|&p| path_from_field(&grid, field, start, grid.world_to_cell(p)));
                    if path.is_none() {
                        if let Some(p) = self.nearest_reachable_member(&grid, field, f, est.position) {
                            path = path_from_field(&grid, field, start, grid.world_to_cell(p));
                            targets[i] = vec![p];
                        }
                    }
                    match path.map(|p| cost_enhanced_terms(f, &est, &p, &params)) {
                        Some(Ok(terms)) => (terms.path_length, terms.turn_angle, terms.cost),
                        _ => (f64::INFINITY, 0.0, f64::INFINITY),
                    }
                }
            };
            costs[i] = cost;
            if self.trace.is_some() {
                records.push(FrontierRecord {
                    id: i,
                    size: f.size(),
                    centroid: f.centroid,
                    distance,
                    turn_angle: turn,
                    cost,
                });
            }
        }
        loop {
            let Some((i, _)) = select_goal(&frontiers, &costs, self.cfg.min_frontier_size) else {
                self.emit(TraceEvent::Replan {
                    t,
                    pose: est,
                    frontiers: records,
                    goal: None,
                    path_length: None,
                });
                return Ok(Replan::Exhausted);
            };
            let mut found = None;
            for &target in &targets[i] {
                if let Some(p) = self.plan_to(&grid, start, target)? {
                    found = Some((target, p));
                    break;
                }
            }
            if found.is_none() && !self.cfg.uses_path_cost() {
                if field.is_none() {
                    field = Some(DistanceField::compute(&grid, robot_cell)?);
                }
                let fb = field
                    .as_ref()
                    .and_then(|fd| self.nearest_reachable_member(&grid, fd, &frontiers[i], est.position));
                if let Some(target) = fb {
                    found = self.plan_to(&grid, start, target)?.map(|p| (target, p));
                }
            }
            let Some((target, path)) = found else {
                costs[i] = f64::INFINITY;
                continue;
            };
            self.set_goal(target, est, t);
            if self.goal.is_none() {
                // Timed out: try the next frontier.
                costs[i] = f64::INFINITY;
                continue;
            }
            self.emit(TraceEvent::Replan {
                t,
                pose: est,
                frontiers: records,
                goal: Some(target),
                path_length: Some(path.length()),
            });
            self.path = Some(path);
            return Ok(Replan::Planned);
        }
    }

    /// Frontier cell with the shortest grid path from the robot, skipping
    /// blacklisted cells and cells the robot already stands on.
    fn nearest_reachable_member(
        &self,
        grid: &OccupancyGrid,
        field: &DistanceField,
        f: &Frontier,
        robot: Point2,
    ) -> Option<Point2> {
        f.points
            .iter()
            .map(|&c| (field.distance(grid, c), grid.cell_center(c)))
            .filter(|&(d, p)| {
                d.is_finite() && p.distance(robot) > self.cfg.follower.goal_radius && !self.is_blacklisted(p)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, p)| p)
    }

    /// Reuses the current path when it still leads to `target` over free
    /// space, otherwise runs Theta*.
    fn plan_to(&mut self, grid: &OccupancyGrid, start: Point2, target: Point2) -> Result<Option<Path>> {
        if let (Some(goal), Some(path)) = (&self.goal, &self.path) {
            if goal.point.distance(target) <= 1.5 * grid.resolution() {
                let pts = path.points();
                let from = self.follower.next_waypoint.clamp(1, pts.len().max(2) - 1);
                if pts.len() >= 2 && path_still_clear(grid, start, &pts[from..]) {
                    let mut kept = vec![start];
                    kept.extend_from_slice(&pts[from..]);
                    self.follower.reset_path();
                    return Ok(Some(Path::new(kept)));
                }
            }
        }
        let path = self.planner.theta_star(grid, start, target)?;
        if path.is_some() {
            self.follower.reset_path();
        }
        Ok(path)
    }

    /// Tracks goal switches and progress; drops the goal when it has made no
    /// progress for the configured timeout.
    fn set_goal(&mut self, target: Point2, est: Pose, t: f64) {
        let d = est.position.distance(target);
        match self.goal {
            Some(g) if g.point.distance(target) <= self.cfg.goal_switch_distance => {
                let mut g = Goal { point: target, ..g };
                if d < g.best_distance - self.cfg.progress_epsilon {
                    g.best_distance = d;
                    g.progress_at = t;
                } else if t - g.progress_at > self.cfg.goal_timeout {
                    self.blacklist_goal(target, t);
                    self.goal = None;
                    self.path = None;
                    return;
                }
                self.goal = Some(g);
            }
            prev => {
                if prev.is_some() {
                    self.goal_switches += 1;
                }
                self.goal = Some(Goal {
                    point: target,
                    best_distance: d,
                    progress_at: t,
                });
            }
        }
    }
}

/// Navigation targets for a frontier: its centroid snapped to free space,
/// then the member cell nearest the centroid.
fn goal_candidates(grid: &OccupancyGrid, f: &Frontier) -> Vec<Point2> {
    let mut out = Vec::with_capacity(2);
    if let Some(c) = snap_to_free(grid, f.centroid, GOAL_SNAP_RADIUS) {
        out.push(if c == grid.world_to_cell(f.centroid) {
            f.centroid
        } else {
            grid.cell_center(c)
        });
    }
    let nearest = f
        .points
        .iter()
        .map(|&c| grid.cell_center(c))
        .min_by(|a, b| a.distance(f.centroid).total_cmp(&b.distance(f.centroid)));
    if let Some(p) = nearest {
        if out.first().is_none_or(|&q| grid.world_to_cell(q) != grid.world_to_cell(p)) {
            out.push(p);
        }
    }
    out
}

fn path_still_clear(grid: &OccupancyGrid, start: Point2, rest: &[Point2]) -> bool {
    let Some(&first) = rest.first() else {
        return false;
    };
    line_of_sight(grid, start, first) && rest.windows(2).all(|w| line_of_sight(grid, w[0], w[1]))
}
