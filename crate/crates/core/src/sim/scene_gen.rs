//! Procedural indoor floor plans: a rectangular footprint split into rooms
//! by binary space partitioning, one doorway per partition wall, furniture
//! blocks and small invisible obstacles.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Scene;
use crate::error::{Error, Result};
use crate::geom::{Cell, Point2, Pose, NEIGHBORS_8};
use crate::grid_map::{CellState, OccupancyGrid};

pub const MIN_SCENE_AREA: f64 = 28.0;
pub const MAX_SCENE_AREA: f64 = 251.0;

const MAX_ATTEMPTS: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layout {
    /// One empty rectangular room of the given interior size (meters).
    SingleRoom { width: f64, height: f64 },
    /// A footprint of `area` m² partitioned into rooms.
    Rooms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneGenSpec {
    /// Interior footprint area, m².
    pub area: f64,
    pub layout: Layout,
    pub resolution: f64,
    pub wall_cells: usize,
    pub max_aspect: f64,
    /// Minimum room side, m.
    pub min_room: f64,
    /// Rooms larger than this are always split further when possible, m².
    pub max_room_area: f64,
    pub door_width: f64,
    /// Furniture blocks per room are drawn uniformly from `0..=max_furniture`.
    pub max_furniture: usize,
    pub invisible_per_100m2: f64,
}

impl Default for SceneGenSpec {
    fn default() -> Self {
        Self {
            area: 60.0,
            layout: Layout::Rooms,
            resolution: 0.05,
            wall_cells: 2,
            max_aspect: 1.6,
            min_room: 2.6,
            max_room_area: 18.0,
            door_width: 0.9,
            max_furniture: 2,
            invisible_per_100m2: 2.0,
        }
    }
}

impl SceneGenSpec {
    pub fn rooms(area: f64) -> Self {
        Self {
            area,
            ..Self::default()
        }
    }

    pub fn single_room(width: f64, height: f64) -> Self {
        Self {
            area: width * height,
            layout: Layout::SingleRoom { width, height },
            max_furniture: 0,
            invisible_per_100m2: 0.0,
            ..Self::default()
        }
    }

    /// Many small rooms joined by narrow doorways.
    pub fn doorway_rich(area: f64) -> Self {
        Self {
            area,
            min_room: 2.2,
            max_room_area: 9.0,
            door_width: 0.6,
            max_furniture: 1,
            invisible_per_100m2: 0.0,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::SceneGeneration(m));
        if !(MIN_SCENE_AREA..=MAX_SCENE_AREA).contains(&self.area) {
            return fail(format!(
                "area {} m² outside [{MIN_SCENE_AREA}, {MAX_SCENE_AREA}]",
                self.area
            ));
        }
        if !(self.resolution > 0.0) || self.wall_cells == 0 {
            return fail("resolution and wall thickness must be positive".into());
        }
        if self.door_width < 2.0 * self.resolution {
            return fail("door narrower than two cells".into());
        }
        if self.min_room < self.door_width + 0.6 {
            return fail("min_room must leave room for a doorway".into());
        }
        if self.max_aspect < 1.0 {
            return fail("max_aspect must be >= 1".into());
        }
        if let Layout::SingleRoom { width, height } = self.layout {
            if width <= 0.0 || height <= 0.0 {
                return fail("room dimensions must be positive".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: i64,
    y0: i64,
    w: i64,
    h: i64,
}

#[derive(Debug, Clone, Copy)]
struct Door {
    /// Door in a wall running along y (the wall occupies columns `line..line+t`).
    vertical: bool,
    line: i64,
    span: (i64, i64),
}

impl Door {
    fn center(&self, t: i64) -> (i64, i64) {
        let mid = (self.span.0 + self.span.1) / 2;
        if self.vertical {
            (self.line + t / 2, mid)
        } else {
            (mid, self.line + t / 2)
        }
    }
}

struct Plan {
    w: usize,
    h: usize,
    cells: Vec<CellState>,
    blocked: Vec<bool>,
}

impl Plan {
    fn idx(&self, x: i64, y: i64) -> usize {
        y as usize * self.w + x as usize
    }

    fn fill(&mut self, x0: i64, y0: i64, w: i64, h: i64, s: CellState) {
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                let i = self.idx(x, y);
                self.cells[i] = s;
            }
        }
    }

    fn traversable(&self, i: usize) -> bool {
        self.cells[i] == CellState::Free && !self.blocked[i]
    }

    /// True when all traversable cells form one 4-connected component.
    fn connected(&self) -> bool {
        let total = (0..self.cells.len()).filter(|&i| self.traversable(i)).count();
        let Some(start) = (0..self.cells.len()).find(|&i| self.traversable(i)) else {
            return false;
        };
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut n = 0;
        while let Some(i) = queue.pop_front() {
            n += 1;
            let (x, y) = ((i % self.w) as i64, (i / self.w) as i64);
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= self.w as i64 || ny >= self.h as i64 {
                    continue;
                }
                let j = self.idx(nx, ny);
                if !seen[j] && self.traversable(j) {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        n == total
    }

    /// Cells within Chebyshev distance `r` of `(x, y)` are all traversable.
    fn clear_around(&self, x: i64, y: i64, r: i64) -> bool {
        (y - r..=y + r).all(|yy| {
            (x - r..=x + r).all(|xx| {
                xx >= 0
                    && yy >= 0
                    && (xx as usize) < self.w
                    && (yy as usize) < self.h
                    && self.traversable(self.idx(xx, yy))
            })
        })
    }
}

struct Gen<'a> {
    spec: &'a SceneGenSpec,
    rng: ChaCha8Rng,
    t: i64,
}

impl Gen<'_> {
    fn cells(&self, meters: f64) -> i64 {
        (meters / self.spec.resolution).round() as i64
    }

    fn split(&mut self, plan: &mut Plan, rect: Rect, doors: &mut Vec<Door>, rooms: &mut Vec<Rect>) {
        let t = self.t;
        let min_c = self.cells(self.spec.min_room);
        let can_v = rect.w >= 2 * min_c + t;
        let can_h = rect.h >= 2 * min_c + t;
        let area = (rect.w * rect.h) as f64 * self.spec.resolution.powi(2);
        let stop = area <= self.spec.max_room_area && self.rng.random::<f64>() < 0.35;
        if (!can_v && !can_h) || stop {
            rooms.push(rect);
            return;
        }
        let vertical = match (can_v, can_h) {
            (true, true) => {
                if rect.w == rect.h {
                    self.rng.random()
                } else {
                    rect.w > rect.h
                }
            }
            (v, _) => v,
        };
        let (start, len, across) = if vertical {
            (rect.x0, rect.w, (rect.y0, rect.h))
        } else {
            (rect.y0, rect.h, (rect.x0, rect.w))
        };
        // Doors on the walls this new wall would abut.
        let margin = self.cells(0.3);
        let forbidden: Vec<(i64, i64)> = doors
            .iter()
            .filter(|d| d.vertical != vertical && (d.line == across.0 + across.1 || d.line + t == across.0))
            .map(|d| (d.span.0 - t - margin, d.span.1 + margin))
            .collect();
        let mut pos = None;
        for _ in 0..30 {
            let s = start + self.rng.random_range(min_c..=len - min_c - t);
            if forbidden.iter().all(|&(a, b)| s < a || s >= b) {
                pos = Some(s);
                break;
            }
        }
        let Some(s) = pos else {
            rooms.push(rect);
            return;
        };
        let dw = self.cells(self.spec.door_width);
        let edge = self.cells(0.3);
        let d0 = across.0 + self.rng.random_range(edge..=across.1 - edge - dw);
        let door = Door {
            vertical,
            line: s,
            span: (d0, d0 + dw),
        };
        let (a, b) = if vertical {
            plan.fill(s, rect.y0, t, rect.h, CellState::Occupied);
            plan.fill(s, d0, t, dw, CellState::Free);
            (
                Rect { w: s - rect.x0, ..rect },
                Rect {
                    x0: s + t,
                    w: rect.x0 + rect.w - s - t,
                    ..rect
                },
            )
        } else {
            plan.fill(rect.x0, s, rect.w, t, CellState::Occupied);
            plan.fill(d0, s, dw, t, CellState::Free);
            (
                Rect { h: s - rect.y0, ..rect },
                Rect {
                    y0: s + t,
                    h: rect.y0 + rect.h - s - t,
                    ..rect
                },
            )
        };
        doors.push(door);
        self.split(plan, a, doors, rooms);
        self.split(plan, b, doors, rooms);
    }

    fn near_door(&self, doors: &[Door], x: i64, y: i64, r: i64) -> bool {
        doors.iter().any(|d| {
            let (cx, cy) = d.center(self.t);
            (cx - x).abs() <= r && (cy - y).abs() <= r
        })
    }

    fn furnish(&mut self, plan: &mut Plan, rooms: &[Rect], doors: &[Door]) {
        if self.spec.max_furniture == 0 {
            return;
        }
        let margin = self.cells(0.45);
        let door_clear = self.cells(1.0);
        for room in rooms {
            let n = self.rng.random_range(0..=self.spec.max_furniture);
            for _ in 0..n {
                let fw_m = self.rng.random_range(0.4..1.2);
                let fw = self.cells(fw_m);
                let fh_m = self.rng.random_range(0.4..1.2);
                let fh = self.cells(fh_m);
                if room.w < fw + 2 * margin || room.h < fh + 2 * margin {
                    continue;
                }
                let x = room.x0 + margin + self.rng.random_range(0..=room.w - fw - 2 * margin);
                let y = room.y0 + margin + self.rng.random_range(0..=room.h - fh - 2 * margin);
                let hits_door = doors.iter().any(|d| {
                    let (cx, cy) = d.center(self.t);
                    cx >= x - door_clear && cx < x + fw + door_clear && cy >= y - door_clear && cy < y + fh + door_clear
                });
                if hits_door {
                    continue;
                }
                let saved = plan.cells.clone();
                plan.fill(x, y, fw, fh, CellState::Occupied);
                if !plan.connected() {
                    plan.cells = saved;
                }
            }
        }
    }

    fn place_invisible(&mut self, plan: &mut Plan, doors: &[Door]) -> Vec<Cell> {
        let n = (self.spec.area * self.spec.invisible_per_100m2 / 100.0).round() as usize;
        let clearance = self.cells(0.35);
        let door_clear = self.cells(0.8);
        let mut placed = Vec::new();
        for _ in 0..n {
            for _ in 0..60 {
                let x = self.rng.random_range(1..plan.w as i64 - 1);
                let y = self.rng.random_range(1..plan.h as i64 - 1);
                if !plan.clear_around(x, y, clearance) || self.near_door(doors, x, y, door_clear) {
                    continue;
                }
                let cells: Vec<Cell> = (y - 1..=y + 1)
                    .flat_map(|yy| (x - 1..=x + 1).map(move |xx| Cell::new(xx, yy)))
                    .collect();
                for c in &cells {
                    let i = plan.idx(c.x, c.y);
                    plan.blocked[i] = true;
                }
                if plan.connected() {
                    placed.extend(cells);
                    break;
                }
                for c in &cells {
                    let i = plan.idx(c.x, c.y);
                    plan.blocked[i] = false;
                }
            }
        }
        placed
    }

    fn try_once(&mut self) -> Option<(Plan, Vec<Cell>, Pose)> {
        let spec = self.spec;
        let t = self.t;
        let (wc, hc) = match spec.layout {
            Layout::SingleRoom { width, height } => (self.cells(width), self.cells(height)),
            Layout::Rooms => {
                let aspect = self.rng.random_range(1.0..=spec.max_aspect);
                let w = (spec.area * aspect).sqrt();
                let h = spec.area / w;
                let (w, h) = if self.rng.random() { (w, h) } else { (h, w) };
                (self.cells(w), self.cells(h))
            }
        };
        let (w, h) = ((wc + 2 * t + 2) as usize, (hc + 2 * t + 2) as usize);
        let mut plan = Plan {
            w,
            h,
            cells: vec![CellState::Unknown; w * h],
            blocked: vec![false; w * h],
        };
        plan.fill(1, 1, wc + 2 * t, hc + 2 * t, CellState::Occupied);
        let interior = Rect {
            x0: 1 + t,
            y0: 1 + t,
            w: wc,
            h: hc,
        };
        plan.fill(interior.x0, interior.y0, wc, hc, CellState::Free);

        let mut doors = Vec::new();
        let mut rooms = Vec::new();
        if spec.layout == Layout::Rooms {
            self.split(&mut plan, interior, &mut doors, &mut rooms);
        } else {
            rooms.push(interior);
        }
        self.furnish(&mut plan, &rooms, &doors);
        let invisible = self.place_invisible(&mut plan, &doors);
        if !plan.connected() {
            return None;
        }

        let clearance = self.cells(0.4).min(wc / 2 - 1).min(hc / 2 - 1).max(0);
        let mut spawn = None;
        for _ in 0..500 {
            let x = self.rng.random_range(interior.x0..interior.x0 + wc);
            let y = self.rng.random_range(interior.y0..interior.y0 + hc);
            if plan.clear_around(x, y, clearance) {
                spawn = Some((x, y));
                break;
            }
        }
        let (sx, sy) = spawn?;
        let heading = self.rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let r = spec.resolution;
        let pose = Pose::new((sx as f64 + 0.5) * r, (sy as f64 + 0.5) * r, heading);
        Some((plan, invisible, pose))
    }
}

/// Generates a connected indoor scene. The same `(spec, seed)` always yields
/// the same scene.
pub fn generate_scene(spec: &SceneGenSpec, seed: u64) -> Result<Scene> {
    spec.validate()?;
    let mut gen = Gen {
        spec,
        rng: ChaCha8Rng::seed_from_u64(seed),
        t: spec.wall_cells as i64,
    };
    for _ in 0..MAX_ATTEMPTS {
        let Some((plan, invisible, spawn)) = gen.try_once() else {
            continue;
        };
        let grid = trim_hidden(plan.w, plan.h, plan.cells, spec.resolution)?;
        let name = format!("gen-{:.0}m2-{seed}", spec.area);
        return Scene::new(name, grid, spawn, invisible);
    }
    Err(Error::SceneGeneration(format!(
        "no valid layout after {MAX_ATTEMPTS} attempts"
    )))
}

/// Occupied cells without a free 8-neighbour can never be observed; they
/// become Unknown so that the ground truth holds only explorable cells.
fn trim_hidden(w: usize, h: usize, cells: Vec<CellState>, resolution: f64) -> Result<OccupancyGrid> {
    let grid = OccupancyGrid::from_cells(w, h, resolution, Point2::default(), cells)?;
    let mut out = grid.clone();
    for i in 0..w * h {
        if grid.cells()[i] != CellState::Occupied {
            continue;
        }
        let c = grid.cell_at(i);
        let visible = NEIGHBORS_8
            .iter()
            .any(|&(dx, dy)| grid.get(c.offset(dx, dy)) == CellState::Free);
        if !visible {
            out.set(c, CellState::Unknown);
        }
    }
    Ok(out)
}
