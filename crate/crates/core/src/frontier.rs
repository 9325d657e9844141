//! Frontier detection and frontier goal selection.
//!
//! A frontier cell is a Free cell with at least one Unknown 8-neighbour
//! (cells outside the grid count as Unknown). Frontiers are the
//! 8-connected components of frontier cells reachable from the robot.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{normalize_angle, Cell, Point2, Pose, NEIGHBORS_8};
use crate::grid_map::{CellState, OccupancyGrid};
use crate::planning::{line_of_sight, snap_to_free, DistanceField, Path};

/// Radius (cells) within which the robot is snapped onto free space.
pub const ROBOT_SNAP_RADIUS: i64 = 5;

/// How far along a grid path (cells) the first any-angle waypoint is searched.
const FIRST_WAYPOINT_LOOKAHEAD: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub points: Vec<Cell>,
    pub centroid: Point2,
}

impl Frontier {
    pub fn size(&self) -> usize {
        self.points.len()
    }
}

/// Weights of the frontier cost: `alpha` per meter of distance, `beta` per
/// frontier cell, `gamma` per radian of initial turn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.33,
            gamma: 0.5,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.beta >= 0.0) || !(self.gamma >= 0.0) {
            return Err(Error::Parameter(format!(
                "cost weights need alpha > 0, beta >= 0, gamma >= 0; got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            alpha: self.alpha * k,
            beta: self.beta * k,
            gamma: self.gamma * k,
        }
    }
}

pub fn is_frontier_cell(grid: &OccupancyGrid, c: Cell) -> bool {
    grid.get(c) == CellState::Free
        && NEIGHBORS_8
            .iter()
            .any(|&(dx, dy)| grid.get(c.offset(dx, dy)) == CellState::Unknown)
}

/// Frontiers reachable from `robot_cell` through Free cells (8-connected).
///
/// Frontiers are listed in the order the search first reaches them; member
/// cells in breadth-first order from that first cell.
pub fn detect_frontiers(grid: &OccupancyGrid, robot_cell: Cell) -> Result<Vec<Frontier>> {
    let start = snap_to_free(grid, grid.cell_center(robot_cell), ROBOT_SNAP_RADIUS).ok_or(
        Error::NoFreeCell {
            radius: ROBOT_SNAP_RADIUS as usize,
        },
    )?;
    let n = grid.cells().len();
    let mut reached = vec![false; n];
    let mut assigned = vec![false; n];
    let mut queue = VecDeque::new();
    let mut frontiers = Vec::new();
    let si = grid.index(start).expect("snapped cell is in bounds");
    reached[si] = true;
    queue.push_back(start);
    while let Some(c) = queue.pop_front() {
        let ci = grid.index(c).expect("queued cells are in bounds");
        if !assigned[ci] && is_frontier_cell(grid, c) {
            frontiers.push(grow_frontier(grid, c, &mut assigned));
        }
        for &(dx, dy) in &NEIGHBORS_8 {
            let m = c.offset(dx, dy);
            if let Some(mi) = grid.index(m) {
                if !reached[mi] && grid.cells()[mi] == CellState::Free {
                    reached[mi] = true;
                    queue.push_back(m);
                }
            }
        }
    }
    Ok(frontiers)
}

fn grow_frontier(grid: &OccupancyGrid, seed: Cell, assigned: &mut [bool]) -> Frontier {
    let mut points = Vec::new();
    let mut queue = VecDeque::from([seed]);
    assigned[grid.index(seed).expect("in bounds")] = true;
    let mut sum = Point2::default();
    while let Some(c) = queue.pop_front() {
        points.push(c);
        sum = sum + grid.cell_center(c);
        for &(dx, dy) in &NEIGHBORS_8 {
            let m = c.offset(dx, dy);
            if let Some(mi) = grid.index(m) {
                if !assigned[mi] && is_frontier_cell(grid, m) {
                    assigned[mi] = true;
                    queue.push_back(m);
                }
            }
        }
    }
    let centroid = sum * (1.0 / points.len() as f64);
    Frontier { points, centroid }
}

/// `alpha * |centroid - p| - beta * size`.
pub fn cost_baseline(f: &Frontier, robot: &Pose, params: &CostParams) -> f64 {
    params.alpha * f.centroid.distance(robot.position) - params.beta * f.size() as f64
}

/// Cost terms of the path-based cost, kept apart for tracing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTerms {
    pub path_length: f64,
    pub size: usize,
    pub turn_angle: f64,
    pub cost: f64,
}

/// `alpha * path length - beta * size + gamma * |angle(heading, p1 - p0)|`,
/// with the angle in `[0, π]`.
pub fn cost_enhanced_terms(f: &Frontier, robot: &Pose, path: &Path, params: &CostParams) -> Result<CostTerms> {
    let pts = path.points();
    if pts.len() < 2 || !path.length().is_finite() {
        return Err(Error::UnreachableFrontier);
    }
    let first = pts[1] - pts[0];
    let turn_angle = if first.norm() == 0.0 {
        0.0
    } else {
        normalize_angle(first.angle() - robot.heading).abs()
    };
    let cost = params.alpha * path.length() - params.beta * f.size() as f64 + params.gamma * turn_angle;
    Ok(CostTerms {
        path_length: path.length(),
        size: f.size(),
        turn_angle,
        cost,
    })
}

pub fn cost_enhanced(f: &Frontier, robot: &Pose, path: &Path, params: &CostParams) -> Result<f64> {
    cost_enhanced_terms(f, robot, path, params).map(|t| t.cost)
}

/// Index and centroid of the cheapest frontier of size at least `min_size`.
///
/// Non-finite costs mark unreachable frontiers and are skipped. Ties go to
/// the larger frontier, then to the lower index.
pub fn select_goal(frontiers: &[Frontier], costs: &[f64], min_size: usize) -> Option<(usize, Point2)> {
    debug_assert_eq!(frontiers.len(), costs.len());
    let mut best: Option<usize> = None;
    for (i, (f, &c)) in frontiers.iter().zip(costs).enumerate() {
        if f.size() < min_size || !c.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => c < costs[b] || (c == costs[b] && f.size() > frontiers[b].size()),
        };
        if better {
            best = Some(i);
        }
    }
    best.map(|i| (i, frontiers[i].centroid))
}

/// Robot-to-target path built from a distance field: the grid path with its
/// first segment replaced by the farthest directly visible cell ahead, so
/// that the initial heading is any-angle.
pub fn path_from_field(
    grid: &OccupancyGrid,
    field: &DistanceField,
    robot: Point2,
    target: Cell,
) -> Option<Path> {
    let cells = field.cells_to(grid, target)?;
    let mut first = cells.len().min(2) - 1;
    let limit = cells.len().min(FIRST_WAYPOINT_LOOKAHEAD + 1);
    for (j, &c) in cells.iter().enumerate().take(limit).skip(1) {
        if !line_of_sight(grid, robot, grid.cell_center(c)) {
            break;
        }
        first = j;
    }
    let mut pts = Vec::with_capacity(cells.len() - first + 1);
    pts.push(robot);
    pts.extend(cells[first..].iter().map(|&c| grid.cell_center(c)));
    Some(Path::new(pts))
}

/// One row of the frontier debug dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRecord {
    pub id: usize,
    pub size: usize,
    pub centroid: Point2,
    pub distance: f64,
    pub turn_angle: f64,
    pub cost: f64,
}
