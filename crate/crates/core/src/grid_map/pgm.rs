//! Binary PGM (P5) maps with a small text sidecar holding the metadata.
//!
//! Pixel mapping: 0 is Occupied, 254 and 255 are Free, 205 is Unknown; any
//! other value maps to the nearest of 0, 205 and 254. Image row 0 is the top
//! of the map (largest y).

use std::fs;
use std::path::{Path, PathBuf};

use super::{CellState, OccupancyGrid};
use crate::error::{Error, Result};
use crate::geom::Point2;

pub const PIXEL_OCCUPIED: u8 = 0;
pub const PIXEL_UNKNOWN: u8 = 205;
pub const PIXEL_FREE: u8 = 254;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapMetadata {
    pub resolution: f64,
    pub origin: Point2,
}

fn pixel_to_state(p: u8) -> CellState {
    match p {
        254 | 255 => CellState::Free,
        // Midpoints between 0, 205 and 254.
        0..=102 => CellState::Occupied,
        103..=229 => CellState::Unknown,
        _ => CellState::Free,
    }
}

fn state_to_pixel(s: CellState) -> u8 {
    match s {
        CellState::Occupied => PIXEL_OCCUPIED,
        CellState::Unknown => PIXEL_UNKNOWN,
        CellState::Free => PIXEL_FREE,
    }
}

/// Encodes a grid as P5 bytes.
pub fn write_pgm(grid: &OccupancyGrid) -> Vec<u8> {
    let (w, h) = (grid.width(), grid.height());
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.reserve(w * h);
    for row in (0..h).rev() {
        out.extend(grid.cells()[row * w..(row + 1) * w].iter().map(|&s| state_to_pixel(s)));
    }
    out
}

/// Decodes P5 bytes into a grid with the given metadata.
pub fn read_pgm(bytes: &[u8], meta: MapMetadata) -> Result<OccupancyGrid> {
    let bad = |detail: &str| Error::Format {
        what: "PGM",
        detail: detail.to_string(),
    };
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
    }
    if tokens[0] != "P5" {
        return Err(bad("expected magic P5"));
    }
    let parse = |t: &str| t.parse::<usize>().map_err(|_| bad("bad header number"));
    let (w, h, maxval) = (parse(tokens[1])?, parse(tokens[2])?, parse(tokens[3])?);
    if maxval != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let data = bytes.get(pos..pos + w * h).ok_or_else(|| bad("truncated raster"))?;
    let mut cells = vec![CellState::Unknown; w * h];
    for (img_row, chunk) in data.chunks_exact(w.max(1)).enumerate() {
        let row = h - 1 - img_row;
        for (x, &p) in chunk.iter().enumerate() {
            cells[row * w + x] = pixel_to_state(p);
        }
    }
    OccupancyGrid::from_cells(w, h, meta.resolution, meta.origin, cells)
}

fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("yaml")
}

/// Writes `<path>` (PGM) and `<path stem>.yaml` (metadata).
pub fn write_map(grid: &OccupancyGrid, path: &Path) -> Result<()> {
    fs::write(path, write_pgm(grid)).map_err(|e| Error::io(path, e))?;
    let image = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let meta = format!(
        "image: {image}\nresolution: {}\norigin: {} {}\n",
        grid.resolution(),
        grid.origin().x,
        grid.origin().y
    );
    let side = sidecar_path(path);
    fs::write(&side, meta).map_err(|e| Error::io(side, e))
}

/// Reads a map written by [`write_map`] (or any P5 map with a sidecar).
pub fn read_map(path: &Path) -> Result<OccupancyGrid> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta = parse_sidecar(&text)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_pgm(&bytes, meta)
}

fn parse_sidecar(text: &str) -> Result<MapMetadata> {
    let bad = |detail: String| Error::Format {
        what: "map metadata",
        detail,
    };
    let mut resolution = None;
    let mut origin = None;
    for line in text.lines() {
        let Some((key, value)) = line.split_once(':') else {
            continue;
        };
        let nums: Vec<f64> = value
            .split(|c: char| c.is_whitespace() || c == ',' || c == '[' || c == ']')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .unwrap_or_default();
        match key.trim() {
            "resolution" => resolution = nums.first().copied(),
            "origin" if nums.len() >= 2 => origin = Some(Point2::new(nums[0], nums[1])),
            _ => {}
        }
    }
    Ok(MapMetadata {
        resolution: resolution.ok_or_else(|| bad("missing resolution".into()))?,
        origin: origin.ok_or_else(|| bad("missing origin".into()))?,
    })
}
