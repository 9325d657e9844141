use std::path::Path as FsPath;

use crate::error::{Error, Result};
use crate::geom::{Cell, Pose};
use crate::grid_map::{raycast::supercover, CellState, OccupancyGrid};
use crate::planning::Path;

const UNKNOWN_RGB: [u8; 3] = [205, 205, 205];
const FREE_RGB: [u8; 3] = [255, 255, 255];
const OCCUPIED_RGB: [u8; 3] = [0, 0, 0];
const PATH_RGB: [u8; 3] = [0, 90, 255];
const ROBOT_RGB: [u8; 3] = [230, 20, 20];

/// Binary PPM of `grid` with the path and robot drawn on top. The top image
/// row is the highest grid row.
pub fn render_ppm(grid: &OccupancyGrid, pose: Option<&Pose>, path: Option<&Path>) -> Vec<u8> {
    let (w, h) = (grid.width(), grid.height());
    let mut px: Vec<[u8; 3]> = grid
        .cells()
        .iter()
        .map(|s| match s {
            CellState::Unknown => UNKNOWN_RGB,
            CellState::Free => FREE_RGB,
            CellState::Occupied => OCCUPIED_RGB,
        })
        .collect();
    let mut paint = |c: Cell, rgb: [u8; 3]| {
        if let Some(i) = grid.index(c) {
            px[i] = rgb;
        }
    };
    if let Some(path) = path {
        for seg in path.points().windows(2) {
            supercover(grid.to_grid_units(seg[0]), grid.to_grid_units(seg[1]), |c| {
                paint(c, PATH_RGB);
                true
            });
        }
    }
    if let Some(pose) = pose {
        let c = grid.world_to_cell(pose.position);
        for (dx, dy) in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)] {
            paint(c.offset(dx, dy), ROBOT_RGB);
        }
    }
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(w * h * 3);
    for y in (0..h).rev() {
        for x in 0..w {
            out.extend_from_slice(&px[y * w + x]);
        }
    }
    out
}

/// Writes [`render_ppm`] output to `out`.
pub fn render_map(grid: &OccupancyGrid, pose: Option<&Pose>, path: Option<&Path>, out: &FsPath) -> Result<()> {
    std::fs::write(out, render_ppm(grid, pose, path)).map_err(|e| Error::io(out, e))
}
