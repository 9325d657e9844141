//! Line of sight, Theta* any-angle planning and the 8-connected A* baseline.
//!
//! Both planners search the same graph: cell centers joined to their eight
//! neighbours, where a diagonal step also needs both orthogonal cells free
//! (a diagonal segment through a corner touches them under supercover).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Cell, Point2, NEIGHBORS_8};
use crate::grid_map::raycast::supercover;
use crate::grid_map::OccupancyGrid;

/// Default radius (cells) for snapping goals onto free space.
pub const GOAL_SNAP_RADIUS: i64 = 5;

/// Waypoints in world coordinates with their total polyline length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    points: Vec<Point2>,
    length: f64,
}

impl Path {
    pub fn new(points: Vec<Point2>) -> Self {
        let length = points.windows(2).map(|w| w[0].distance(w[1])).sum();
        Self { points, length }
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> Option<Point2> {
        self.points.first().copied()
    }

    pub fn goal(&self) -> Option<Point2> {
        self.points.last().copied()
    }
}

/// Search statistics of the last plan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStats {
    pub expansions: usize,
}

/// True iff every cell touched by segment `a`–`b` is Free.
pub fn line_of_sight(grid: &OccupancyGrid, a: Point2, b: Point2) -> bool {
    supercover(grid.to_grid_units(a), grid.to_grid_units(b), |c| grid.is_free(c))
}

/// True when moving between neighbouring cells `from` and `to` is allowed.
fn step_allowed(grid: &OccupancyGrid, from: Cell, dx: i64, dy: i64) -> bool {
    let to = from.offset(dx, dy);
    if !grid.is_free(to) {
        return false;
    }
    dx == 0 || dy == 0 || (grid.is_free(from.offset(dx, 0)) && grid.is_free(from.offset(0, dy)))
}

/// Nearest Free cell to `p` within Chebyshev radius `radius`, by Euclidean
/// distance from `p` to the cell center (ties: lower row, then column).
pub fn snap_to_free(grid: &OccupancyGrid, p: Point2, radius: i64) -> Option<Cell> {
    let c = grid.world_to_cell(p);
    if grid.is_free(c) {
        return Some(c);
    }
    let mut best: Option<(f64, Cell)> = None;
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let n = c.offset(dx, dy);
            if grid.is_free(n) {
                let d = grid.cell_center(n).distance(p);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, n));
                }
            }
        }
    }
    best.map(|(_, n)| n)
}

#[derive(Debug, Clone, Copy)]
struct Open {
    f: f64,
    idx: u32,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    // Min-heap on f, then on index for determinism.
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Reusable search buffers. Stamps avoid clearing the arrays per query.
#[derive(Debug, Default)]
pub struct Planner {
    g: Vec<f64>,
    parent: Vec<u32>,
    stamp: Vec<u32>,
    closed: Vec<u32>,
    generation: u32,
    heap: BinaryHeap<Open>,
    pub stats: PlanStats,
}

impl Planner {
    pub fn new() -> Self {
        Self::default()
    }

    fn begin(&mut self, n: usize) {
        if self.g.len() < n {
            self.g.resize(n, f64::INFINITY);
            self.parent.resize(n, 0);
            self.stamp.resize(n, 0);
            self.closed.resize(n, 0);
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.closed.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        self.heap.clear();
        self.stats = PlanStats::default();
    }

    fn g(&self, i: usize) -> f64 {
        if self.stamp[i] == self.generation {
            self.g[i]
        } else {
            f64::INFINITY
        }
    }

    fn relax(&mut self, i: usize, g: f64, parent: usize, h: f64) {
        if g < self.g(i) {
            self.g[i] = g;
            self.stamp[i] = self.generation;
            self.parent[i] = parent as u32;
            self.heap.push(Open { f: g + h, idx: i as u32 });
        }
    }

    fn is_closed(&self, i: usize) -> bool {
        self.closed[i] == self.generation
    }

    fn chain(&self, start: usize, goal: usize) -> Vec<usize> {
        let mut out = vec![goal];
        let mut cur = goal;
        while cur != start {
            cur = self.parent[cur] as usize;
            out.push(cur);
        }
        out.reverse();
        out
    }

    /// Theta* from `start` to `goal` (snapped to free space within
    /// [`GOAL_SNAP_RADIUS`]). Returns `Ok(None)` when no path exists.
    pub fn theta_star(&mut self, grid: &OccupancyGrid, start: Point2, goal: Point2) -> Result<Option<Path>> {
        let s_cell = grid.world_to_cell(start);
        if !grid.is_free(s_cell) {
            return Err(Error::Planning(format!(
                "start ({:.3}, {:.3}) is not in a free cell",
                start.x, start.y
            )));
        }
        let Some(g_cell) = snap_to_free(grid, goal, GOAL_SNAP_RADIUS) else {
            return Ok(None);
        };
        let goal = if g_cell == grid.world_to_cell(goal) {
            goal
        } else {
            grid.cell_center(g_cell)
        };
        if s_cell == g_cell {
            let pts = if start == goal { vec![start] } else { vec![start, goal] };
            return Ok(Some(Path::new(pts)));
        }
        let si = grid.index(s_cell).expect("free cell is in bounds");
        let gi = grid.index(g_cell).expect("free cell is in bounds");
        let pos = |i: usize| {
            if i == si {
                start
            } else if i == gi {
                goal
            } else {
                grid.cell_center(grid.cell_at(i))
            }
        };
        self.begin(grid.cells().len());
        self.relax(si, 0.0, si, start.distance(goal));
        while let Some(Open { idx, .. }) = self.heap.pop() {
            let s = idx as usize;
            if self.is_closed(s) {
                continue;
            }
            self.closed[s] = self.generation;
            self.stats.expansions += 1;
            if s == gi {
                let pts = self.chain(si, gi).into_iter().map(pos).collect();
                return Ok(Some(Path::new(pts)));
            }
            let sc = grid.cell_at(s);
            let ps = pos(s);
            let par = self.parent[s] as usize;
            let pp = pos(par);
            let gs = self.g[s];
            let gp = self.g(par);
            for &(dx, dy) in &NEIGHBORS_8 {
                if !step_allowed(grid, sc, dx, dy) {
                    continue;
                }
                let n = grid.index(sc.offset(dx, dy)).expect("free cell is in bounds");
                if self.is_closed(n) {
                    continue;
                }
                let pn = pos(n);
                let h = pn.distance(goal);
                if par != s && line_of_sight(grid, pp, pn) {
                    self.relax(n, gp + pp.distance(pn), par, h);
                } else {
                    self.relax(n, gs + ps.distance(pn), s, h);
                }
            }
        }
        Ok(None)
    }

    /// Optimal 8-connected path between cell centers (octile heuristic).
    pub fn astar(&mut self, grid: &OccupancyGrid, start: Cell, goal: Cell) -> Result<Option<Path>> {
        if !grid.is_free(start) {
            return Err(Error::Planning(format!("start cell {start:?} is not free")));
        }
        if !grid.is_free(goal) {
            return Ok(None);
        }
        let si = grid.index(start).expect("free cell is in bounds");
        let gi = grid.index(goal).expect("free cell is in bounds");
        let res = grid.resolution();
        let octile = |c: Cell| {
            let dx = (c.x - goal.x).abs() as f64;
            let dy = (c.y - goal.y).abs() as f64;
            (dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy)) * res
        };
        self.begin(grid.cells().len());
        self.relax(si, 0.0, si, octile(start));
        while let Some(Open { idx, .. }) = self.heap.pop() {
            let s = idx as usize;
            if self.is_closed(s) {
                continue;
            }
            self.closed[s] = self.generation;
            self.stats.expansions += 1;
            if s == gi {
                let pts = self
                    .chain(si, gi)
                    .into_iter()
                    .map(|i| grid.cell_center(grid.cell_at(i)))
                    .collect();
                return Ok(Some(Path::new(pts)));
            }
            let sc = grid.cell_at(s);
            let gs = self.g[s];
            for &(dx, dy) in &NEIGHBORS_8 {
                if !step_allowed(grid, sc, dx, dy) {
                    continue;
                }
                let nc = sc.offset(dx, dy);
                let n = grid.index(nc).expect("free cell is in bounds");
                if self.is_closed(n) {
                    continue;
                }
                let step = if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
                self.relax(n, gs + step * res, s, octile(nc));
            }
        }
        Ok(None)
    }
}

pub fn plan_theta_star(grid: &OccupancyGrid, start: Point2, goal: Point2) -> Result<Option<Path>> {
    Planner::new().theta_star(grid, start, goal)
}

pub fn plan_astar(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Result<Option<Path>> {
    Planner::new().astar(grid, start, goal)
}

/// Single-source shortest grid distances (meters) over the planner graph.
#[derive(Debug, Clone)]
pub struct DistanceField {
    source: usize,
    dist: Vec<f64>,
    parent: Vec<u32>,
}

impl DistanceField {
    pub fn compute(grid: &OccupancyGrid, source: Cell) -> Result<Self> {
        let si = grid
            .index(source)
            .filter(|_| grid.is_free(source))
            .ok_or_else(|| Error::Planning(format!("source cell {source:?} is not free")))?;
        let n = grid.cells().len();
        let res = grid.resolution();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![u32::MAX; n];
        let mut heap = BinaryHeap::new();
        dist[si] = 0.0;
        parent[si] = si as u32;
        heap.push(Open { f: 0.0, idx: si as u32 });
        while let Some(Open { f, idx }) = heap.pop() {
            let s = idx as usize;
            if f > dist[s] {
                continue;
            }
            let sc = grid.cell_at(s);
            for &(dx, dy) in &NEIGHBORS_8 {
                if !step_allowed(grid, sc, dx, dy) {
                    continue;
                }
                let m = grid.index(sc.offset(dx, dy)).expect("free cell is in bounds");
                let step = if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
                let nd = f + step * res;
                if nd < dist[m] {
                    dist[m] = nd;
                    parent[m] = s as u32;
                    heap.push(Open { f: nd, idx: m as u32 });
                }
            }
        }
        Ok(Self {
            source: si,
            dist,
            parent,
        })
    }

    pub fn distance(&self, grid: &OccupancyGrid, c: Cell) -> f64 {
        grid.index(c).map_or(f64::INFINITY, |i| self.dist[i])
    }

    /// Cells from the source to `target`, or `None` if unreachable.
    pub fn cells_to(&self, grid: &OccupancyGrid, target: Cell) -> Option<Vec<Cell>> {
        let mut i = grid.index(target)?;
        if !self.dist[i].is_finite() {
            return None;
        }
        let mut out = vec![grid.cell_at(i)];
        while i != self.source {
            i = self.parent[i] as usize;
            out.push(grid.cell_at(i));
        }
        out.reverse();
        Some(out)
    }
}

/// True when at least `1 / rate_hz` seconds have passed since the last plan.
pub fn replan_due(last_plan_time: f64, now: f64, rate_hz: f64) -> Result<bool> {
    if !(rate_hz > 0.0) {
        return Err(Error::Parameter(format!("replanning rate must be > 0, got {rate_hz}")));
    }
    // Tolerates the rounding of simulated clocks built from fixed ticks.
    Ok(now - last_plan_time >= 1.0 / rate_hz - 1e-9)
}

#[cfg(test)]
mod tests;
