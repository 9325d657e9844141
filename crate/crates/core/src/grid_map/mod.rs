//! Occupancy grid map, scan integration, post-processing and coverage.

mod pgm;
pub mod raycast;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Cell, Point2, Pose};
use crate::sim::DepthScan;

pub use pgm::{read_map, read_pgm, write_map, write_pgm, MapMetadata};
use raycast::RayWalk;

/// Slack on ray lengths (in cells) so that a ray ending exactly on the
/// boundary of its hit cell still enters that cell.
const RAY_END_TOLERANCE: f64 = 1e-9;

/// The three cell labels. The derived ordering `Unknown < Free < Occupied`
/// is the one used by max pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(i8)]
pub enum CellState {
    Unknown = -1,
    Free = 0,
    Occupied = 1,
}

impl CellState {
    pub fn value(self) -> i8 {
        self as i8
    }

    /// Explored cells are the ones with a non-negative label.
    pub fn is_known(self) -> bool {
        self.value() >= 0
    }
}

/// One coverage measurement at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageSample {
    pub t: f64,
    pub abs_cells: usize,
    pub abs_area: f64,
    pub rel: f64,
}

/// Result of [`OccupancyGrid::mark_cell_ahead`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkOutcome {
    /// The cell was marked; `newly_known` is set when it used to be Unknown.
    Marked { cell: Cell, newly_known: bool },
    /// The cell ahead lies outside the grid; nothing changed.
    OutOfBounds,
}

/// Row-major grid of [`CellState`]. `origin` is the world position of the
/// outer corner of cell `(0, 0)`; rows grow with +y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Point2,
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    /// An all-Unknown grid.
    pub fn new(width: usize, height: usize, resolution: f64, origin: Point2) -> Result<Self> {
        Self::filled(width, height, resolution, origin, CellState::Unknown)
    }

    pub fn filled(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Point2,
        state: CellState,
    ) -> Result<Self> {
        Self::from_cells(width, height, resolution, origin, vec![state; width * height])
    }

    pub fn from_cells(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Point2,
        cells: Vec<CellState>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "grid dimensions must be positive, got {width}x{height}"
            )));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::Parameter(format!("resolution must be > 0, got {resolution}")));
        }
        if cells.len() != width * height {
            return Err(Error::Parameter(format!(
                "expected {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    pub fn index(&self, c: Cell) -> Option<usize> {
        self.in_bounds(c)
            .then(|| c.y as usize * self.width + c.x as usize)
    }

    pub fn cell_at(&self, idx: usize) -> Cell {
        Cell::new((idx % self.width) as i64, (idx / self.width) as i64)
    }

    /// Cell label; anything outside the grid reads as Unknown.
    pub fn get(&self, c: Cell) -> CellState {
        self.index(c).map_or(CellState::Unknown, |i| self.cells[i])
    }

    /// Returns `false` when `c` is out of bounds.
    pub fn set(&mut self, c: Cell, state: CellState) -> bool {
        match self.index(c) {
            Some(i) => {
                self.cells[i] = state;
                true
            }
            None => false,
        }
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.get(c) == CellState::Free
    }

    /// World point to grid units (cell sides, relative to the origin).
    pub fn to_grid_units(&self, p: Point2) -> (f64, f64) {
        (
            (p.x - self.origin.x) / self.resolution,
            (p.y - self.origin.y) / self.resolution,
        )
    }

    pub fn world_to_cell(&self, p: Point2) -> Cell {
        let (gx, gy) = self.to_grid_units(p);
        Cell::new(gx.floor() as i64, gy.floor() as i64)
    }

    pub fn cell_center(&self, c: Cell) -> Point2 {
        Point2::new(
            self.origin.x + (c.x as f64 + 0.5) * self.resolution,
            self.origin.y + (c.y as f64 + 0.5) * self.resolution,
        )
    }

    pub fn contains_point(&self, p: Point2) -> bool {
        self.in_bounds(self.world_to_cell(p))
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&s| s == state).count()
    }

    /// Number of explored (non-Unknown) cells.
    pub fn count_known(&self) -> usize {
        self.cells.iter().filter(|s| s.is_known()).count()
    }

    /// Grows the grid (at least doubling each axis that grows, Unknown fill)
    /// until the inclusive cell box `lo..=hi` is inside it. World
    /// coordinates of existing cells are preserved. Returns the offset that
    /// was added to every existing cell coordinate.
    pub fn ensure_contains(&mut self, lo: Cell, hi: Cell) -> (i64, i64) {
        let (left, right) = grow_axis(self.width, lo.x.min(hi.x), lo.x.max(hi.x));
        let (bottom, top) = grow_axis(self.height, lo.y.min(hi.y), lo.y.max(hi.y));
        if left + right + bottom + top == 0 {
            return (0, 0);
        }
        let new_w = self.width + left + right;
        let new_h = self.height + bottom + top;
        let mut cells = vec![CellState::Unknown; new_w * new_h];
        for y in 0..self.height {
            let src = &self.cells[y * self.width..(y + 1) * self.width];
            let start = (y + bottom) * new_w + left;
            cells[start..start + self.width].copy_from_slice(src);
        }
        self.origin = Point2::new(
            self.origin.x - left as f64 * self.resolution,
            self.origin.y - bottom as f64 * self.resolution,
        );
        self.width = new_w;
        self.height = new_h;
        self.cells = cells;
        (left as i64, bottom as i64)
    }

    /// Pure variant of [`Self::integrate_scan_mut`].
    pub fn integrate_scan(&self, pose: &Pose, scan: &DepthScan) -> Result<Self> {
        let mut out = self.clone();
        out.integrate_scan_mut(pose, scan)?;
        Ok(out)
    }

    /// Paints each ray of `scan` from `pose`: traversed cells become Free,
    /// the end cell becomes Occupied when the ray reports a hit. Occupied
    /// cells are never demoted. The grid grows when rays leave it.
    ///
    /// Returns the cells that changed from Unknown to known, in the
    /// coordinates of the (possibly grown) grid.
    pub fn integrate_scan_mut(&mut self, pose: &Pose, scan: &DepthScan) -> Result<Vec<Cell>> {
        if !self.contains_point(pose.position) {
            return Err(Error::OutOfBounds {
                x: pose.position.x,
                y: pose.position.y,
            });
        }
        if scan.rays.is_empty() {
            return Ok(Vec::new());
        }
        let start = self.world_to_cell(pose.position);
        let (mut lo, mut hi) = (start, start);
        for ray in &scan.rays {
            let end = pose.position + Point2::from_angle(pose.heading + ray.bearing) * ray.range;
            let c = self.world_to_cell(end);
            lo = Cell::new(lo.x.min(c.x - 1), lo.y.min(c.y - 1));
            hi = Cell::new(hi.x.max(c.x + 1), hi.y.max(c.y + 1));
        }
        self.ensure_contains(lo, hi);

        let origin = self.to_grid_units(pose.position);
        let mut newly_known = Vec::new();
        let mut path = Vec::new();
        for ray in &scan.rays {
            let dir = Point2::from_angle(pose.heading + ray.bearing);
            let limit = ray.range / self.resolution + RAY_END_TOLERANCE;
            path.clear();
            path.extend(RayWalk::new(origin, (dir.x, dir.y), limit).map(|(c, _)| c));
            let Some((&last, before)) = path.split_last() else {
                continue;
            };
            for &c in before {
                self.promote(c, CellState::Free, &mut newly_known);
            }
            let end_state = if ray.hit {
                CellState::Occupied
            } else {
                CellState::Free
            };
            self.promote(last, end_state, &mut newly_known);
        }
        Ok(newly_known)
    }

    /// Raises a cell to `state` unless it is already Occupied.
    fn promote(&mut self, c: Cell, state: CellState, newly_known: &mut Vec<Cell>) {
        if let Some(i) = self.index(c) {
            let cur = self.cells[i];
            if cur == CellState::Occupied || cur == state {
                return;
            }
            if cur == CellState::Unknown {
                newly_known.push(c);
            }
            self.cells[i] = state;
        }
    }

    /// Reduces resolution by `factor`: each `factor x factor` block takes the
    /// maximum label under `Unknown < Free < Occupied`. Partial blocks at the
    /// far edges are padded with Unknown. The origin is preserved.
    pub fn downsample_maxpool(&self, factor: i64) -> Result<Self> {
        if factor <= 0 {
            return Err(Error::Parameter(format!("pooling factor must be >= 1, got {factor}")));
        }
        let f = factor as usize;
        if f == 1 {
            return Ok(self.clone());
        }
        let w = self.width.div_ceil(f);
        let h = self.height.div_ceil(f);
        let mut cells = vec![CellState::Unknown; w * h];
        for y in 0..self.height {
            let row = &self.cells[y * self.width..(y + 1) * self.width];
            let out = &mut cells[(y / f) * w..(y / f + 1) * w];
            for (x, &s) in row.iter().enumerate() {
                let o = &mut out[x / f];
                if s > *o {
                    *o = s;
                }
            }
        }
        Self::from_cells(w, h, self.resolution * factor as f64, self.origin, cells)
    }

    /// Marks every cell within Chebyshev distance `radius_cells` of an
    /// Occupied cell as Occupied.
    pub fn inflate_obstacles(&self, radius_cells: i64) -> Result<Self> {
        if radius_cells < 0 {
            return Err(Error::Parameter(format!(
                "inflation radius must be >= 0, got {radius_cells}"
            )));
        }
        if radius_cells == 0 {
            return Ok(self.clone());
        }
        let r = radius_cells as usize;
        let (w, h) = (self.width, self.height);
        // Separable dilation: rows first, then columns.
        let mut rows = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                if self.cells[y * w + x] == CellState::Occupied {
                    let x0 = x.saturating_sub(r);
                    let x1 = (x + r).min(w - 1);
                    rows[y * w + x0..=y * w + x1].iter_mut().for_each(|v| *v = true);
                }
            }
        }
        let mut out = self.clone();
        for y in 0..h {
            for x in 0..w {
                if rows[y * w + x] {
                    let y0 = y.saturating_sub(r);
                    let y1 = (y + r).min(h - 1);
                    for yy in y0..=y1 {
                        out.cells[yy * w + x] = CellState::Occupied;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Marks the cell one cell length ahead of `pose` as Occupied.
    pub fn mark_cell_ahead(&mut self, pose: &Pose) -> MarkOutcome {
        let ahead = pose.position + pose.orientation() * self.resolution;
        let cell = self.world_to_cell(ahead);
        match self.index(cell) {
            Some(i) => {
                let newly_known = self.cells[i] == CellState::Unknown;
                self.cells[i] = CellState::Occupied;
                MarkOutcome::Marked { cell, newly_known }
            }
            None => MarkOutcome::OutOfBounds,
        }
    }

    /// Number of cells of `self` that are known here and fall on an
    /// explorable (known) cell of `gt` once mapped into `gt`'s frame.
    pub fn known_cells_in(&self, gt: &OccupancyGrid) -> usize {
        let mut n = 0;
        for (i, s) in self.cells.iter().enumerate() {
            if s.is_known() {
                let p = self.cell_center(self.cell_at(i));
                if gt.get(gt.world_to_cell(p)).is_known() {
                    n += 1;
                }
            }
        }
        n
    }
}

/// Padding `(low, high)` needed so that `lo..=hi` fits into `0..len`.
/// Growth is at least `len` (doubling) and the low padding is even so that
/// 2x pooling blocks stay aligned in world coordinates.
fn grow_axis(len: usize, lo: i64, hi: i64) -> (usize, usize) {
    let need_lo = (-lo).max(0) as usize;
    let need_hi = (hi - (len as i64 - 1)).max(0) as usize;
    if need_lo == 0 && need_hi == 0 {
        return (0, 0);
    }
    let slack = len.saturating_sub(need_lo + need_hi);
    let (mut low, high) = match (need_lo > 0, need_hi > 0) {
        (true, true) => (need_lo + slack / 2, need_hi + slack - slack / 2),
        (true, false) => (need_lo + slack, 0),
        _ => (0, need_hi + slack),
    };
    if low % 2 == 1 {
        low += 1;
    }
    (low, high)
}

/// Coverage of `grid` against the ground truth `gt` at time `t`.
///
/// `abs_cells` counts every explored cell of `grid`; `rel` counts explored
/// cells that land on explorable ground-truth cells, divided by the number
/// of explorable ground-truth cells, clamped to `[0, 1]`.
pub fn coverage(grid: &OccupancyGrid, gt: &OccupancyGrid, t: f64) -> Result<CoverageSample> {
    let gt_known = gt.count_known();
    if gt_known == 0 {
        return Err(Error::UndefinedRelative);
    }
    let abs_cells = grid.count_known();
    let aligned = grid.known_cells_in(gt);
    Ok(CoverageSample {
        t,
        abs_cells,
        abs_area: abs_cells as f64 * grid.resolution * grid.resolution,
        rel: (aligned as f64 / gt_known as f64).clamp(0.0, 1.0),
    })
}
