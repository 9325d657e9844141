//! Grid traversal primitives in grid units (one unit = one cell side).

use crate::geom::Cell;

/// Ties between the x and y boundary crossings closer than this are treated
/// as passing exactly through a cell corner.
const CORNER_EPS: f64 = 1e-12;

/// Amanatides–Woo walk along a ray, yielding each visited cell together with
/// the ray parameter at which the ray enters it.
///
/// The direction must be a unit vector so that the parameter is a distance
/// in cells. The walk stops after the last cell entered at `t <= limit`.
#[derive(Debug, Clone)]
pub struct RayWalk {
    cell: Cell,
    step_x: i64,
    step_y: i64,
    t_max_x: f64,
    t_max_y: f64,
    t_delta_x: f64,
    t_delta_y: f64,
    limit: f64,
    started: bool,
}

impl RayWalk {
    pub fn new(origin: (f64, f64), dir: (f64, f64), limit: f64) -> Self {
        let (x0, y0) = origin;
        let (dx, dy) = dir;
        let cell = Cell::new(x0.floor() as i64, y0.floor() as i64);
        let (step_x, t_max_x, t_delta_x) = axis_setup(x0, dx);
        let (step_y, t_max_y, t_delta_y) = axis_setup(y0, dy);
        Self {
            cell,
            step_x,
            step_y,
            t_max_x,
            t_max_y,
            t_delta_x,
            t_delta_y,
            limit,
            started: false,
        }
    }
}

fn axis_setup(p: f64, d: f64) -> (i64, f64, f64) {
    if d > 0.0 {
        (1, (p.floor() + 1.0 - p) / d, 1.0 / d)
    } else if d < 0.0 {
        (-1, (p - p.floor()) / -d, 1.0 / -d)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

impl Iterator for RayWalk {
    type Item = (Cell, f64);

    fn next(&mut self) -> Option<(Cell, f64)> {
        if !self.started {
            self.started = true;
            return Some((self.cell, 0.0));
        }
        let t = if self.t_max_x < self.t_max_y {
            let t = self.t_max_x;
            self.cell.x += self.step_x;
            self.t_max_x += self.t_delta_x;
            t
        } else {
            let t = self.t_max_y;
            self.cell.y += self.step_y;
            self.t_max_y += self.t_delta_y;
            t
        };
        if t > self.limit || !t.is_finite() {
            return None;
        }
        Some((self.cell, t))
    }
}

/// Visits every cell touched by the closed segment `a`–`b`, including both
/// cells beside a corner the segment passes through exactly.
///
/// `visit` may stop the traversal early by returning `false`; the function
/// then returns `false` as well.
pub fn supercover(a: (f64, f64), b: (f64, f64), mut visit: impl FnMut(Cell) -> bool) -> bool {
    let (x0, y0) = a;
    let dx = b.0 - x0;
    let dy = b.1 - y0;
    let mut cell = Cell::new(x0.floor() as i64, y0.floor() as i64);
    if !visit(cell) {
        return false;
    }
    // Parameterised over t in [0, 1] along the segment.
    let (sx, mut tmx, tdx) = axis_setup(x0, dx);
    let (sy, mut tmy, tdy) = axis_setup(y0, dy);
    loop {
        let t = tmx.min(tmy);
        if t > 1.0 || !t.is_finite() {
            return true;
        }
        if (tmx - tmy).abs() <= CORNER_EPS * t.max(1.0) {
            if !visit(cell.offset(sx, 0)) || !visit(cell.offset(0, sy)) {
                return false;
            }
            cell = cell.offset(sx, sy);
            tmx += tdx;
            tmy += tdy;
        } else if tmx < tmy {
            cell.x += sx;
            tmx += tdx;
        } else {
            cell.y += sy;
            tmy += tdy;
        }
        if !visit(cell) {
            return false;
        }
    }
}
