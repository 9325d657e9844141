use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Cell, Pose};
use crate::grid_map::{CellState, OccupancyGrid};

/// Axis directions used to measure free-space run lengths: along x, along
/// the main diagonal, along y, along the anti-diagonal.
const RUN_DIRS: [(i64, i64); 4] = [(1, 0), (1, 1), (0, 1), (-1, 1)];

/// Length of the free run through each cell along four axes, used to decide
/// whether a ray is passing through a narrow opening.
#[derive(Debug, Clone, PartialEq)]
pub struct OpeningWidths {
    width: usize,
    resolution: f64,
    runs: [Vec<u16>; 4],
}

impl OpeningWidths {
    fn compute(gt: &OccupancyGrid) -> Self {
        let (w, h) = (gt.width(), gt.height());
        let free: Vec<bool> = gt.cells().iter().map(|&s| s == CellState::Free).collect();
        let runs = RUN_DIRS.map(|(dx, dy)| {
            let mut run = vec![0u16; w * h];
            let mut visited = vec![false; w * h];
            for start in 0..w * h {
                if !free[start] || visited[start] {
                    continue;
                }
                // Walk back to the start of the run, then forward over it.
                let mut c = gt.cell_at(start);
                while gt.index(c.offset(-dx, -dy)).is_some_and(|i| free[i]) {
                    c = c.offset(-dx, -dy);
                }
                let mut members = Vec::new();
                while let Some(i) = gt.index(c).filter(|&i| free[i]) {
                    members.push(i);
                    c = c.offset(dx, dy);
                }
                let len = members.len().min(u16::MAX as usize) as u16;
                for i in members {
                    run[i] = len;
                    visited[i] = true;
                }
            }
            run
        });
        Self {
            width: w,
            resolution: gt.resolution(),
            runs,
        }
    }

    /// Width (meters) of the free run through `cell` measured across a ray
    /// travelling at angle `theta`, or `None` outside free space.
    pub fn width_across(&self, cell: Cell, theta: f64) -> Option<f64> {
        if cell.x < 0 || cell.y < 0 || cell.x as usize >= self.width {
            return None;
        }
        let idx = cell.y as usize * self.width + cell.x as usize;
        let across = theta + std::f64::consts::FRAC_PI_2;
        let k = (across / std::f64::consts::FRAC_PI_4).round().rem_euclid(4.0) as usize;
        let run = *self.runs[k].get(idx)?;
        if run == 0 {
            return None;
        }
        let step = if k % 2 == 1 { std::f64::consts::SQRT_2 } else { 1.0 };
        Some(run as f64 * step * self.resolution)
    }
}

/// A ground-truth environment.
///
/// `ground_truth` holds Free and Occupied cells for the explorable region and
/// Unknown elsewhere. Invisible obstacles block motion but are not sensed.
#[derive(Debug, Clone)]
pub struct Scene {
    name: String,
    gt: OccupancyGrid,
    spawn: Pose,
    area: f64,
    invisible: Vec<Cell>,
    blocked: Vec<bool>,
    openings: OpeningWidths,
}

/// Serializable description of the non-raster parts of a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSidecar {
    pub name: String,
    pub spawn: Pose,
    pub invisible_obstacles: Vec<[i64; 2]>,
}

impl Scene {
    pub fn new(name: impl Into<String>, gt: OccupancyGrid, spawn: Pose, mut invisible: Vec<Cell>) -> Result<Self> {
        invisible.sort();
        invisible.dedup();
        let spawn_cell = gt.world_to_cell(spawn.position);
        if gt.get(spawn_cell) != CellState::Free {
            return Err(Error::Parameter("spawn must lie in a free cell".into()));
        }
        if invisible.binary_search(&spawn_cell).is_ok() {
            return Err(Error::Parameter("spawn is on an invisible obstacle".into()));
        }
        let mut blocked: Vec<bool> = gt.cells().iter().map(|&s| s != CellState::Free).collect();
        for c in &invisible {
            let i = gt
                .index(*c)
                .ok_or_else(|| Error::Parameter(format!("invisible obstacle {c:?} outside the map")))?;
            blocked[i] = true;
        }
        let res = gt.resolution();
        let area = gt.count_known() as f64 * res * res;
        let openings = OpeningWidths::compute(&gt);
        Ok(Self {
            name: name.into(),
            gt,
            spawn,
            area,
            invisible,
            blocked,
            openings,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ground_truth(&self) -> &OccupancyGrid {
        &self.gt
    }

    pub fn spawn(&self) -> Pose {
        self.spawn
    }

    /// Explorable area in m² (known ground-truth cells).
    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn invisible_obstacles(&self) -> &[Cell] {
        &self.invisible
    }

    pub fn openings(&self) -> &OpeningWidths {
        &self.openings
    }

    /// Free in the ground truth and not an invisible obstacle.
    pub fn is_traversable(&self, c: Cell) -> bool {
        self.gt.index(c).is_some_and(|i| !self.blocked[i])
    }

    pub fn sidecar(&self) -> SceneSidecar {
        SceneSidecar {
            name: self.name.clone(),
            spawn: self.spawn,
            invisible_obstacles: self.invisible.iter().map(|c| [c.x, c.y]).collect(),
        }
    }
}
