use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::grid_map::CellState;

fn grid_from(rows: &[&str]) -> OccupancyGrid {
    let h = rows.len();
    let w = rows[0].len();
    let mut cells = Vec::with_capacity(w * h);
    // Row 0 of the picture is the top (highest y).
    for row in rows.iter().rev() {
        for ch in row.chars() {
            cells.push(match ch {
                '#' => CellState::Occupied,
                '?' => CellState::Unknown,
                _ => CellState::Free,
            });
        }
    }
    OccupancyGrid::from_cells(w, h, 1.0, Point2::default(), cells).unwrap()
}

fn random_grid(rng: &mut ChaCha8Rng, w: usize, h: usize, p_blocked: f64) -> OccupancyGrid {
    let cells = (0..w * h)
        .map(|_| {
            if rng.random_bool(p_blocked) {
                if rng.random_bool(0.5) {
                    CellState::Occupied
                } else {
                    CellState::Unknown
                }
            } else {
                CellState::Free
            }
        })
        .collect();
    OccupancyGrid::from_cells(w, h, 0.1, Point2::new(0.3, -0.2), cells).unwrap()
}

fn free_cells(g: &OccupancyGrid) -> Vec<Cell> {
    (0..g.cells().len())
        .filter(|&i| g.cells()[i] == CellState::Free)
        .map(|i| g.cell_at(i))
        .collect()
}

#[test]
fn line_of_sight_examples() {
    let g = grid_from(&[
        ".....", //
        "..#..",
        ".....",
        "#....",
        ".#...",
    ]);
    let c = |x: f64, y: f64| Point2::new(x, y);
    assert!(line_of_sight(&g, c(0.5, 2.5), c(4.5, 2.5)));
    assert!(!line_of_sight(&g, c(0.5, 3.5), c(4.5, 3.5)));
    assert!(line_of_sight(&g, c(2.5, 0.5), c(4.5, 4.5)));
    // Diagonal through the shared corner of two blocked cells.
    assert!(!line_of_sight(&g, c(0.5, 0.5), c(1.5, 1.5)));
    assert!(!line_of_sight(&g, c(0.5, 1.5), c(0.5, 1.5)));
    assert!(line_of_sight(&g, c(4.5, 4.5), c(4.5, 4.5)));
    assert!(!line_of_sight(&g, c(4.5, 4.5), c(5.5, 4.5)), "outside the grid is not free");
}

fn segment_meets_box(a: (f64, f64), b: (f64, f64), lo: (f64, f64), hi: (f64, f64)) -> bool {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, d, l, h) in [(a.0, b.0 - a.0, lo.0, hi.0), (a.1, b.1 - a.1, lo.1, hi.1)] {
        if d == 0.0 {
            if p < l || p > h {
                return false;
            }
        } else {
            let (ta, tb) = ((l - p) / d, (h - p) / d);
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
    }
    t0 <= t1
}

/// Cells whose closed square meets the segment, in grid units.
fn closed_cover(a: (f64, f64), b: (f64, f64)) -> BTreeSet<Cell> {
    let mut out = BTreeSet::new();
    for y in a.1.min(b.1).floor() as i64 - 1..=a.1.max(b.1).floor() as i64 + 1 {
        for x in a.0.min(b.0).floor() as i64 - 1..=a.0.max(b.0).floor() as i64 + 1 {
            if segment_meets_box(a, b, (x as f64, y as f64), (x as f64 + 1.0, y as f64 + 1.0)) {
                out.insert(Cell::new(x, y));
            }
        }
    }
    out
}

/// Cells holding interior sample points of the segment. Points on cell
/// boundaries are skipped since their owner is a convention.
fn sampled_cover(a: (f64, f64), b: (f64, f64)) -> BTreeSet<Cell> {
    let n = 2000;
    (1..n)
        .map(|k| {
            let t = k as f64 / n as f64;
            (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t)
        })
        .filter(|p| p.0.fract() != 0.0 && p.1.fract() != 0.0)
        .map(|p| Cell::new(p.0.floor() as i64, p.1.floor() as i64))
        .collect()
}

#[test]
fn supercover_is_sandwiched_by_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..3000 {
        let snap = k % 3 == 0;
        let mut pt = || {
            let v: f64 = rng.random_range(-6.0..6.0);
            if snap { (v * 2.0).round() / 2.0 } else { v }
        };
        let a = (pt(), pt());
        let b = (pt(), pt());
        let mut visited = BTreeSet::new();
        assert!(supercover(a, b, |c| {
            visited.insert(c);
            true
        }));
        let lower = sampled_cover(a, b);
        let upper = closed_cover(a, b);
        assert!(lower.is_subset(&visited), "{a:?}-{b:?} missed cells");
        assert!(visited.is_subset(&upper), "{a:?}-{b:?} extra cells");
    }
}

#[test]
fn line_of_sight_matches_cover_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let g = random_grid(&mut rng, 15, 15, 0.15);
        for _ in 0..20 {
            let mut pt = || {
                Point2::new(
                    g.origin().x + rng.random_range(0.0..1.5),
                    g.origin().y + rng.random_range(0.0..1.5),
                )
            };
            let (a, b) = (pt(), pt());
            let (ga, gb) = (g.to_grid_units(a), g.to_grid_units(b));
            let los = line_of_sight(&g, a, b);
            if closed_cover(ga, gb).iter().all(|&c| g.is_free(c)) {
                assert!(los);
            }
            if sampled_cover(ga, gb).iter().any(|&c| !g.is_free(c)) {
                assert!(!los);
            }
            assert_eq!(los, line_of_sight(&g, b, a));
        }
    }
}

/// Plain Dijkstra over the same move rules, independent of the planner.
fn dijkstra(g: &OccupancyGrid, s: Cell, t: Cell) -> Option<f64> {
    let n = g.cells().len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[g.index(s)?] = 0.0;
    loop {
        let (mut best, mut bi) = (f64::INFINITY, usize::MAX);
        for i in 0..n {
            if !done[i] && dist[i] < best {
                best = dist[i];
                bi = i;
            }
        }
        if bi == usize::MAX {
            return None;
        }
        let c = g.cell_at(bi);
        if c == t {
            return Some(best);
        }
        done[bi] = true;
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let m = c.offset(dx, dy);
                let diag = dx != 0 && dy != 0;
                let ok = g.is_free(m) && (!diag || (g.is_free(c.offset(dx, 0)) && g.is_free(c.offset(0, dy))));
                if ok {
                    let i = g.index(m).unwrap();
                    let w = if diag { 2f64.sqrt() } else { 1.0 } * g.resolution();
                    if best + w < dist[i] {
                        dist[i] = best + w;
                    }
                }
            }
        }
    }
}

fn assert_valid_path(g: &OccupancyGrid, path: &Path) {
    for w in path.points().windows(2) {
        assert!(line_of_sight(g, w[0], w[1]), "segment {:?} blocked", w);
    }
}

#[test]
fn astar_matches_dijkstra_and_theta_star_is_no_longer() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut planner = Planner::new();
    let mut found = 0;
    for _ in 0..300 {
        let (w, h) = (rng.random_range(3..20), rng.random_range(3..20));
        let g = random_grid(&mut rng, w, h, 0.3);
        let free = free_cells(&g);
        if free.len() < 2 {
            continue;
        }
        let s = free[rng.random_range(0..free.len())];
        let t = free[rng.random_range(0..free.len())];
        let oracle = dijkstra(&g, s, t);
        let a = planner.astar(&g, s, t).unwrap();
        match (&a, oracle) {
            (Some(p), Some(d)) => {
                found += 1;
                assert!((p.length() - d).abs() < 1e-9, "astar {} vs {}", p.length(), d);
                assert_valid_path(&g, p);
                let field = DistanceField::compute(&g, s).unwrap();
                assert!((field.distance(&g, t) - d).abs() < 1e-9);
                let cells = field.cells_to(&g, t).unwrap();
                assert_eq!((cells[0], *cells.last().unwrap()), (s, t));
            }
            (None, None) => {
                let field = DistanceField::compute(&g, s).unwrap();
                assert!(field.distance(&g, t).is_infinite());
                assert!(field.cells_to(&g, t).is_none());
            }
            _ => panic!("astar {a:?} disagrees with oracle {oracle:?}"),
        }
        let theta = planner
            .theta_star(&g, g.cell_center(s), g.cell_center(t))
            .unwrap();
        assert_eq!(theta.is_some(), oracle.is_some());
        if let (Some(p), Some(d)) = (theta, oracle) {
            assert!(p.length() <= d + 1e-9, "theta {} > astar {}", p.length(), d);
            assert!(p.length() >= g.cell_center(s).distance(g.cell_center(t)) - 1e-9);
            assert_eq!(p.start(), Some(g.cell_center(s)));
            assert_eq!(p.goal(), Some(g.cell_center(t)));
            assert_valid_path(&g, &p);
        }
    }
    assert!(found > 100);
}

#[test]
fn theta_star_is_straight_without_obstacles() {
    let g = OccupancyGrid::filled(40, 30, 0.05, Point2::default(), CellState::Free).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..200 {
        let a = Point2::new(rng.random_range(0.0..2.0), rng.random_range(0.0..1.5));
        let b = Point2::new(rng.random_range(0.0..2.0), rng.random_range(0.0..1.5));
        let p = plan_theta_star(&g, a, b).unwrap().unwrap();
        assert!((p.length() - a.distance(b)).abs() < 1e-9);
        assert!(p.len() <= 2);
    }
}

#[test]
fn theta_star_goes_around_a_wall() {
    let g = grid_from(&[
        ".......",
        "...#...",
        "...#...",
        "...#...",
        ".......",
    ]);
    let p = plan_theta_star(&g, Point2::new(1.5, 2.5), Point2::new(5.5, 2.5))
        .unwrap()
        .unwrap();
    assert_valid_path(&g, &p);
    assert!(p.len() >= 3);
    assert!(p.length() > 4.0);
    let astar = plan_astar(&g, Cell::new(1, 2), Cell::new(5, 2)).unwrap().unwrap();
    assert!(p.length() < astar.length());
}

#[test]
fn planner_edge_cases() {
    let g = grid_from(&["..#..", "..#..", "..#.."]);
    assert!(plan_theta_star(&g, Point2::new(0.5, 0.5), Point2::new(4.5, 0.5))
        .unwrap()
        .is_none());
    assert!(plan_astar(&g, Cell::new(0, 0), Cell::new(4, 0)).unwrap().is_none());
    assert!(plan_theta_star(&g, Point2::new(2.5, 0.5), Point2::new(0.5, 0.5)).is_err());
    assert!(plan_astar(&g, Cell::new(2, 0), Cell::new(0, 0)).is_err());
    assert!(plan_astar(&g, Cell::new(0, 0), Cell::new(2, 1)).unwrap().is_none());
    let same = plan_theta_star(&g, Point2::new(0.2, 0.2), Point2::new(0.7, 0.6))
        .unwrap()
        .unwrap();
    assert_eq!(same.points(), &[Point2::new(0.2, 0.2), Point2::new(0.7, 0.6)]);
    // A blocked goal snaps onto the nearest free cell.
    let snapped = plan_theta_star(&g, Point2::new(0.5, 0.5), Point2::new(2.2, 2.5))
        .unwrap()
        .unwrap();
    assert_eq!(snapped.goal(), Some(Point2::new(1.5, 2.5)));
    assert!(DistanceField::compute(&g, Cell::new(2, 0)).is_err());
}

#[test]
fn snap_to_free_examples() {
    let g = grid_from(&["#####", "#####", "##.##", "#####", "....."]);
    assert_eq!(snap_to_free(&g, Point2::new(2.5, 2.5), 0), Some(Cell::new(2, 2)));
    assert_eq!(snap_to_free(&g, Point2::new(2.4, 3.4), 1), Some(Cell::new(2, 2)));
    assert_eq!(snap_to_free(&g, Point2::new(0.5, 4.5), 1), None);
    assert_eq!(snap_to_free(&g, Point2::new(0.5, 4.5), 2), Some(Cell::new(2, 2)));
    assert_eq!(snap_to_free(&g, Point2::new(3.9, 1.1), 1), Some(Cell::new(3, 0)));
}

#[test]
fn replan_due_examples() {
    assert!(replan_due(0.0, 0.2, 5.0).unwrap());
    assert!(!replan_due(0.0, 0.19, 5.0).unwrap());
    assert!(replan_due(1.0, 0.1 * 12.0, 5.0).unwrap());
    assert!(replan_due(0.0, 0.0, f64::INFINITY).unwrap());
    assert!(replan_due(0.0, 1.0, 0.0).is_err());
    assert!(replan_due(0.0, 1.0, -2.0).is_err());
    assert!(replan_due(0.0, 1.0, f64::NAN).is_err());
}

#[test]
fn path_accessors() {
    let p = Path::new(vec![Point2::new(0.0, 0.0), Point2::new(3.0, 4.0), Point2::new(3.0, 5.0)]);
    assert_eq!(p.length(), 6.0);
    assert_eq!(p.len(), 3);
    assert!(!p.is_empty());
    assert_eq!(p.start(), Some(Point2::new(0.0, 0.0)));
    assert_eq!(p.goal(), Some(Point2::new(3.0, 5.0)));
    let e = Path::new(vec![]);
    assert!(e.is_empty() && e.length() == 0.0 && e.goal().is_none());
}
