//! Frontier-based exploration for robots mapping with a visual SLAM front end.
//!
//! The crate is organised along the exploration pipeline:
//!
//! - [`grid_map`]: occupancy grid, scan integration, max-pool downsampling,
//!   obstacle inflation and coverage metrics.
//! - [`frontier`]: BFS frontier detection and frontier goal selection.
//! - [`planning`]: supercover line of sight, Theta* and the A* baseline.
//! - [`control`]: discrete-action path follower, look-around and tracking-loss
//!   recovery programs, bump detector.
//! - [`sim`]: ground-truth scenes, kinematics, depth sensing and the SLAM
//!   surrogate that produces drift and tracking losses.
//! - [`bench`]: episode runner, ablation ladder, reports and map rendering.
//!
//! Batch execution goes through [`exec`], which uses rayon when the
//! `parallel` feature is enabled and a plain sequential loop otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod control;
pub mod error;
pub mod exec;
pub mod frontier;
pub mod geom;
pub mod grid_map;
pub mod planning;
pub mod sim;

pub use error::{Error, Result};
pub use geom::{normalize_angle, Cell, Point2, Pose};
