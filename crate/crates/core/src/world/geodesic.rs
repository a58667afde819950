//! Shortest paths on the 8-connected occupancy grid.
//!
//! Path costs are tracked as integer counts of straight and diagonal moves so that
//! the metric value `(straight + diagonal * sqrt 2) * resolution` is reproducible
//! bit-for-bit regardless of the order in which moves were summed. Diagonal moves
//! may not cut obstacle corners: both orthogonal neighbours must be free.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use super::grid::{Cell, OccupancyGrid};
use crate::geometry::Point;

/// Path cost in unit moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct OctileCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl OctileCost {
    pub fn cells(self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * SQRT_2
    }

    pub fn meters(self, resolution: f64) -> f64 {
        self.cells() * resolution
    }
}

#[derive(Clone, Copy)]
struct Frontier {
    key: f64,
    idx: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    // min-heap on key, ties broken on index for determinism
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

const NEIGHBOURS: [(isize, isize, bool); 8] = [
    (1, 0, false),
    (-1, 0, false),
    (0, 1, false),
    (0, -1, false),
    (1, 1, true),
    (1, -1, true),
    (-1, 1, true),
    (-1, -1, true),
];

/// Free neighbours of `cell` reachable in one move, with whether the move is diagonal.
pub fn neighbours(grid: &OccupancyGrid, cell: Cell) -> impl Iterator<Item = (Cell, bool)> + '_ {
    NEIGHBOURS.iter().filter_map(move |&(dx, dy, diag)| {
        let c = cell.col as isize + dx;
        let r = cell.row as isize + dy;
        if c < 0 || r < 0 || c as usize >= grid.cols() || r as usize >= grid.rows() {
            return None;
        }
        let next = Cell::new(c as usize, r as usize);
        if grid.is_blocked(next) {
            return None;
        }
        if diag
            && (grid.is_blocked(Cell::new(c as usize, cell.row))
                || grid.is_blocked(Cell::new(cell.col, r as usize)))
        {
            return None;
        }
        Some((next, diag))
    })
}

/// Single-source shortest-path tree over the free cells of a grid.
#[derive(Debug, Clone)]
pub struct DistanceField {
    source: Cell,
    cost: Vec<Option<OctileCost>>,
    parent: Vec<usize>,
    cols: usize,
    resolution: f64,
}

impl DistanceField {
    /// Full Dijkstra expansion from `source`.
    pub fn from_source(grid: &OccupancyGrid, source: Cell) -> DistanceField {
        Self::search(grid, source, None)
    }

    /// Dijkstra that stops once `target` is settled. Only the target's cost and path are final.
    pub(crate) fn search(grid: &OccupancyGrid, source: Cell, target: Option<Cell>) -> DistanceField {
        let n = grid.len();
        let mut cost: Vec<Option<OctileCost>> = vec![None; n];
        let mut parent = vec![usize::MAX; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        let src = grid.index(source);
        let target = target.map(|t| grid.index(t));
        if !grid.is_blocked(source) {
            cost[src] = Some(OctileCost::default());
            heap.push(Frontier { key: 0.0, idx: src });
        }
        while let Some(Frontier { idx, .. }) = heap.pop() {
            if settled[idx] {
                continue;
            }
            settled[idx] = true;
            if Some(idx) == target {
                break;
            }
            let here = cost[idx].expect("settled cells carry a cost");
            for (next, diag) in neighbours(grid, grid.cell_of_index(idx)) {
                let ni = grid.index(next);
                if settled[ni] {
                    continue;
                }
                let mut cand = here;
                if diag {
                    cand.diagonal += 1;
                } else {
                    cand.straight += 1;
                }
                if cost[ni].is_none_or(|c| cand.cells() < c.cells()) {
                    cost[ni] = Some(cand);
                    parent[ni] = idx;
                    heap.push(Frontier {
                        key: cand.cells(),
                        idx: ni,
                    });
                }
            }
        }
        DistanceField {
            source,
            cost,
            parent,
            cols: grid.cols(),
            resolution: grid.resolution(),
        }
    }

    pub fn source(&self) -> Cell {
        self.source
    }

    pub fn cost_to(&self, cell: Cell) -> Option<OctileCost> {
        self.cost[cell.row * self.cols + cell.col]
    }

    pub fn meters_to(&self, cell: Cell) -> Option<f64> {
        self.cost_to(cell).map(|c| c.meters(self.resolution))
    }

    /// Cells from the source to `cell` inclusive, or `None` when unreachable.
    pub fn path_to(&self, cell: Cell) -> Option<Vec<Cell>> {
        let mut idx = cell.row * self.cols + cell.col;
        self.cost[idx]?;
        let mut out = vec![cell];
        while self.parent[idx] != usize::MAX {
            idx = self.parent[idx];
            out.push(Cell::new(idx % self.cols, idx / self.cols));
        }
        out.reverse();
        Some(out)
    }
}

/// Drop interior vertices that lie on the straight line between their neighbours.
pub fn compress_collinear(points: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(points.len());
    for &p in points {
        if out.last() == Some(&p) {
            continue;
        }
        if out.len() >= 2 {
            let a = out[out.len() - 2];
            let b = out[out.len() - 1];
            let cross = (b.x - a.x) * (p.y - b.y) - (b.y - a.y) * (p.x - b.x);
            let dot = (b.x - a.x) * (p.x - b.x) + (b.y - a.y) * (p.y - b.y);
            let scale = a.distance(b) * b.distance(p);
            if cross.abs() <= 1e-9 * scale.max(1e-12) && dot > 0.0 {
                out.pop();
            }
        }
        out.push(p);
    }
    out
}

/// Greedy line-of-sight shortcutting: from each kept vertex jump to the farthest visible one.
pub fn smooth_polyline(grid: &OccupancyGrid, points: &[Point]) -> Vec<Point> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut out = vec![points[0]];
    let mut i = 0;
    while i < points.len() - 1 {
        let mut j = points.len() - 1;
        while j > i + 1 && !grid.segment_clear(points[i], points[j]) {
            j -= 1;
        }
        out.push(points[j]);
        i = j;
    }
    out
}
