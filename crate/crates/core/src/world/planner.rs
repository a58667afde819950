use std::collections::VecDeque;

use super::geodesic::{compress_collinear, smooth_polyline};
use super::grid::{Cell, OccupancyGrid};
use super::{shortest_path_on, SceneWorld};
use crate::geometry::Point;

/// Any-angle planner over a copy of the grid with obstacles dilated by a clearance radius.
///
/// Plans are grid shortest paths on the dilated grid, shortcut by line of sight, so the
/// returned polylines keep `clearance` away from walls wherever the geometry allows.
#[derive(Debug, Clone)]
pub struct ClearancePlanner {
    raw: OccupancyGrid,
    inflated: OccupancyGrid,
    clearance: f64,
}

impl ClearancePlanner {
    pub fn new(world: &SceneWorld, clearance: f64) -> Self {
        Self {
            raw: world.grid().clone(),
            inflated: world.grid().inflated(clearance),
            clearance,
        }
    }

    pub fn clearance(&self) -> f64 {
        self.clearance
    }

    pub fn inflated(&self) -> &OccupancyGrid {
        &self.inflated
    }

    pub fn is_clear(&self, p: Point) -> bool {
        !self.inflated.is_point_blocked(p)
    }

    /// Nearest cell free in the dilated grid, reached through raw free space.
    fn snap(&self, from: Point) -> Option<Point> {
        let start = self.raw.cell_at(from)?;
        if self.raw.is_blocked(start) {
            return None;
        }
        let mut seen = vec![false; self.raw.len()];
        let mut queue = VecDeque::from([start]);
        seen[self.raw.index(start)] = true;
        while let Some(c) = queue.pop_front() {
            if !self.inflated.is_blocked(c) {
                return Some(self.raw.cell_center(c));
            }
            for (dc, dr) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
                let (col, row) = (c.col as isize + dc, c.row as isize + dr);
                if col < 0 || row < 0 {
                    continue;
                }
                let n = Cell::new(col as usize, row as usize);
                if n.col >= self.raw.cols() || n.row >= self.raw.rows() {
                    continue;
                }
                let i = self.raw.index(n);
                if !seen[i] && !self.raw.is_blocked(n) {
                    seen[i] = true;
                    queue.push_back(n);
                }
            }
        }
        None
    }

    /// Collision-free polyline `from` → `to`, or `None` when `to` is unreachable.
    pub fn plan(&self, from: Point, to: Point) -> Option<Vec<Point>> {
        if from == to {
            return Some(vec![from]);
        }
        if self.raw.segment_clear(from, to) && self.inflated.segment_clear(from, to) {
            return Some(vec![from, to]);
        }
        if !self.is_clear(to) {
            return self.plan_raw(from, to);
        }
        let (lead, entry) = if self.is_clear(from) {
            (Vec::new(), from)
        } else {
            let Some(entry) = self.snap(from) else {
                return self.plan_raw(from, to);
            };
            let lead = shortest_path_on(&self.raw, from, entry).ok()??;
            (lead, entry)
        };
        let body = shortest_path_on(&self.inflated, entry, to).ok()??;
        let body = smooth_polyline(&self.inflated, &body);
        let mut out = lead;
        if !out.is_empty() {
            out.pop();
        }
        out.extend(body);
        Some(compress_collinear(&out))
    }

    fn plan_raw(&self, from: Point, to: Point) -> Option<Vec<Point>> {
        let path = shortest_path_on(&self.raw, from, to).ok()??;
        Some(smooth_polyline(&self.raw, &path))
    }
}
