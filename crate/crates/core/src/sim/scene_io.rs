//! Scenes on disk: `<name>.pgm` + `<name>.yaml` for the ground-truth grid and
//! `<name>.json` for the spawn pose and invisible obstacles.

use std::fs;
use std::path::{Path, PathBuf};

use super::scene::SceneSidecar;
use super::Scene;
use crate::error::{Error, Result};
use crate::geom::Cell;
use crate::grid_map::{read_map, write_map};

/// Writes the scene into `dir` and returns the path of its PGM file.
pub fn write_scene(scene: &Scene, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let pgm = dir.join(format!("{}.pgm", scene.name()));
    write_map(scene.ground_truth(), &pgm)?;
    let json = pgm.with_extension("json");
    let text = serde_json::to_string_pretty(&scene.sidecar())?;
    fs::write(&json, text).map_err(|e| Error::io(json, e))?;
    Ok(pgm)
}

/// Reads a scene from its PGM path (the `.yaml` and `.json` siblings must exist).
pub fn read_scene(pgm: &Path) -> Result<Scene> {
    let grid = read_map(pgm)?;
    let json = pgm.with_extension("json");
    let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let side: SceneSidecar = serde_json::from_str(&text)?;
    let invisible = side.invisible_obstacles.iter().map(|&[x, y]| Cell::new(x, y)).collect();
    Scene::new(side.name, grid, side.spawn, invisible)
}
