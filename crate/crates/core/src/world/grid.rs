use crate::geometry::Point;

/// Integer cell coordinate: `col` grows with +x, `row` grows with +y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub const fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

/// Row-major boolean occupancy grid, `true` = obstacle. Row 0 is the bottom row (y in `[0, res)`).
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    cols: usize,
    rows: usize,
    resolution: f64,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(cols: usize, rows: usize, resolution: f64) -> Self {
        Self {
            cols,
            rows,
            resolution,
            cells: vec![false; cols * rows],
        }
    }

    pub fn filled(cols: usize, rows: usize, resolution: f64) -> Self {
        Self {
            cols,
            rows,
            resolution,
            cells: vec![true; cols * rows],
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.cols + cell.col
    }

    #[inline]
    pub fn cell_of_index(&self, idx: usize) -> Cell {
        Cell::new(idx % self.cols, idx / self.cols)
    }

    #[inline]
    pub fn is_blocked(&self, cell: Cell) -> bool {
        self.cells[self.index(cell)]
    }

    pub fn set(&mut self, cell: Cell, blocked: bool) {
        let i = self.index(cell);
        self.cells[i] = blocked;
    }

    pub fn obstacle_count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    /// Cell containing `p`. Points on the far edge of the grid map to the last row/column.
    pub fn cell_at(&self, p: Point) -> Option<Cell> {
        if !p.is_finite() || p.x < 0.0 || p.y < 0.0 {
            return None;
        }
        let width = self.cols as f64 * self.resolution;
        let height = self.rows as f64 * self.resolution;
        if p.x > width || p.y > height {
            return None;
        }
        let col = ((p.x / self.resolution).floor() as usize).min(self.cols - 1);
        let row = ((p.y / self.resolution).floor() as usize).min(self.rows - 1);
        Some(Cell::new(col, row))
    }

    pub fn cell_center(&self, cell: Cell) -> Point {
        Point::new(
            (cell.col as f64 + 0.5) * self.resolution,
            (cell.row as f64 + 0.5) * self.resolution,
        )
    }

    /// Out-of-bounds points count as blocked.
    pub fn is_point_blocked(&self, p: Point) -> bool {
        self.cell_at(p).is_none_or(|c| self.is_blocked(c))
    }

    /// Mark every cell whose center lies inside the rectangle.
    pub fn fill_rect(&mut self, min: Point, max: Point, blocked: bool) {
        for row in 0..self.rows {
            for col in 0..self.cols {
                let c = self.cell_center(Cell::new(col, row));
                if c.x >= min.x && c.x <= max.x && c.y >= min.y && c.y <= max.y {
                    self.set(Cell::new(col, row), blocked);
                }
            }
        }
    }

    /// Conservative swept-segment test: samples the segment every quarter cell.
    pub fn segment_clear(&self, a: Point, b: Point) -> bool {
        let len = a.distance(b);
        let n = ((len / (self.resolution * 0.25)).ceil() as usize).max(1);
        (0..=n).all(|i| !self.is_point_blocked(a.lerp(b, i as f64 / n as f64)))
    }

    /// Obstacles dilated by `radius` meters (cell centers within `radius` of an obstacle center).
    pub fn inflated(&self, radius: f64) -> OccupancyGrid {
        let reach = (radius / self.resolution).floor() as isize;
        let r2 = (radius / self.resolution).powi(2);
        let offsets: Vec<(isize, isize)> = (-reach..=reach)
            .flat_map(|dy| (-reach..=reach).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| ((dx * dx + dy * dy) as f64) <= r2 + 1e-9)
            .collect();
        let mut out = self.clone();
        for row in 0..self.rows {
            for col in 0..self.cols {
                if !self.is_blocked(Cell::new(col, row)) {
                    continue;
                }
                for &(dx, dy) in &offsets {
                    let (c, r) = (col as isize + dx, row as isize + dy);
                    if c >= 0 && r >= 0 && (c as usize) < self.cols && (r as usize) < self.rows {
                        out.set(Cell::new(c as usize, r as usize), true);
                    }
                }
            }
        }
        out
    }

    /// Each row as a run-length string: `<count><.|#>` runs, e.g. `"3#10.3#"`.
    pub fn to_rle_rows(&self) -> Vec<String> {
        (0..self.rows)
            .map(|row| {
                let slice = &self.cells[row * self.cols..(row + 1) * self.cols];
                let mut s = String::new();
                let mut i = 0;
                while i < slice.len() {
                    let v = slice[i];
                    let run = slice[i..].iter().take_while(|&&x| x == v).count();
                    s.push_str(&run.to_string());
                    s.push(if v { '#' } else { '.' });
                    i += run;
                }
                s
            })
            .collect()
    }

    pub fn from_rle_rows(cols: usize, rows: &[String], resolution: f64) -> Result<OccupancyGrid, String> {
        let mut cells = Vec::with_capacity(cols * rows.len());
        for (r, line) in rows.iter().enumerate() {
            let mut count = String::new();
            let mut filled = 0usize;
            for ch in line.chars() {
                match ch {
                    '0'..='9' => count.push(ch),
                    '.' | '#' => {
                        let n: usize = count
                            .parse()
                            .map_err(|_| format!("row {r}: run without a count"))?;
                        count.clear();
                        cells.extend(std::iter::repeat_n(ch == '#', n));
                        filled += n;
                    }
                    other => return Err(format!("row {r}: unexpected character {other:?}")),
                }
            }
            if !count.is_empty() {
                return Err(format!("row {r}: trailing count without a cell symbol"));
            }
            if filled != cols {
                return Err(format!("row {r}: expected {cols} cells, found {filled}"));
            }
        }
        Ok(OccupancyGrid {
            cols,
            rows: rows.len(),
            resolution,
            cells,
        })
    }
}
