//! Environment model: occupancy grid with room-labeled regions and landmarks,
//! episodes, geodesic planning, and the JSON world/episode file formats.

mod generate;
mod geodesic;
mod grid;
mod planner;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use generate::{generate_synthetic_world, GenerationParams, PlantedTransition};
pub use geodesic::{compress_collinear, neighbours, smooth_polyline, DistanceField, OctileCost};
pub use grid::{Cell, OccupancyGrid};
pub use planner::ClearancePlanner;

use crate::error::{Error, Result};
use crate::geometry::{polyline_length, Point, Rect};
use crate::kinematics::Pose;

pub const WORLD_SCHEMA: &str = "vlnkit.world/v1";
pub const EPISODES_SCHEMA: &str = "vlnkit.episodes/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub region: Rect,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: String,
    pub category: String,
    pub position: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub width: f64,
    pub height: f64,
}

/// Immutable after construction; share freely across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneWorld {
    grid: OccupancyGrid,
    rooms: Vec<Room>,
    landmarks: Vec<Landmark>,
    bounds: Bounds,
}

impl SceneWorld {
    /// Build and validate a world. Bounds are derived from the grid extent.
    pub fn new(grid: OccupancyGrid, rooms: Vec<Room>, landmarks: Vec<Landmark>) -> Result<Self> {
        let bounds = Bounds {
            width: grid.cols() as f64 * grid.resolution(),
            height: grid.rows() as f64 * grid.resolution(),
        };
        let world = SceneWorld {
            grid,
            rooms,
            landmarks,
            bounds,
        };
        world.validate()?;
        Ok(world)
    }

    /// An obstacle-free world of the given size.
    pub fn open(width: f64, height: f64, resolution: f64) -> Result<Self> {
        let cols = (width / resolution).round() as usize;
        let rows = (height / resolution).round() as usize;
        Self::new(OccupancyGrid::new(cols, rows, resolution), vec![], vec![])
    }

    fn validate(&self) -> Result<()> {
        let res = self.grid.resolution();
        if !(res.is_finite() && res > 0.0) {
            return Err(Error::validation("grid_resolution must be a positive real"));
        }
        if self.grid.cols() == 0 || self.grid.rows() == 0 {
            return Err(Error::validation("occupancy grid must have at least one cell"));
        }
        let whole = Rect::new(0.0, 0.0, self.bounds.width, self.bounds.height);
        for (i, room) in self.rooms.iter().enumerate() {
            let r = room.region;
            if !r.is_well_formed() {
                return Err(Error::validation(format!("rooms[{i}].region is degenerate")));
            }
            let tol = 1e-9;
            if r.min_x < -tol || r.min_y < -tol || r.max_x > whole.max_x + tol || r.max_y > whole.max_y + tol
            {
                return Err(Error::validation(format!(
                    "rooms[{i}].region lies outside the world bounds"
                )));
            }
            if room.category.trim().is_empty() {
                return Err(Error::validation(format!("rooms[{i}].category is empty")));
            }
            for (j, other) in self.rooms.iter().enumerate().skip(i + 1) {
                if r.overlaps(&other.region) {
                    return Err(Error::validation(format!("rooms[{i}] and rooms[{j}] overlap")));
                }
            }
        }
        for (i, lm) in self.landmarks.iter().enumerate() {
            if self.grid.is_point_blocked(lm.position) {
                return Err(Error::validation(format!(
                    "landmarks[{i}] ({}) is not in free space",
                    lm.id
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn rooms(&self) -> &[Room] {
        &self.rooms
    }

    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn resolution(&self) -> f64 {
        self.grid.resolution()
    }

    /// Length of the grid diagonal step, the tolerance unit for geodesic comparisons.
    pub fn cell_diagonal(&self) -> f64 {
        self.grid.resolution() * std::f64::consts::SQRT_2
    }

    /// Diameter of the world, used as the stand-in distance for unreachable goals.
    pub fn diameter(&self) -> f64 {
        self.bounds.width.hypot(self.bounds.height)
    }

    pub fn in_bounds(&self, p: Point) -> bool {
        p.is_finite() && p.x >= 0.0 && p.y >= 0.0 && p.x <= self.bounds.width && p.y <= self.bounds.height
    }

    pub fn is_free(&self, p: Point) -> bool {
        !self.grid.is_point_blocked(p)
    }

    /// Index of the first room (lowest list index) whose closed region contains `p`.
    pub fn room_index_at(&self, p: Point) -> Result<Option<usize>> {
        if !self.in_bounds(p) {
            return Err(Error::domain(format!(
                "position ({}, {}) is out of bounds",
                p.x, p.y
            )));
        }
        Ok(self.rooms.iter().position(|r| r.region.contains(p)))
    }

    pub fn room_at(&self, p: Point) -> Result<Option<&str>> {
        Ok(self.room_index_at(p)?.map(|i| self.rooms[i].category.as_str()))
    }

    fn free_cell(&self, p: Point, what: &str) -> Result<Cell> {
        match self.grid.cell_at(p) {
            Some(c) if !self.grid.is_blocked(c) => Ok(c),
            Some(_) => Err(Error::domain(format!(
                "{what} ({}, {}) lies in an obstacle",
                p.x, p.y
            ))),
            None => Err(Error::domain(format!(
                "{what} ({}, {}) is out of bounds",
                p.x, p.y
            ))),
        }
    }

    /// Geodesic length in meters, or `None` when `b` cannot be reached from `a`.
    pub fn geodesic_distance(&self, a: Point, b: Point) -> Result<Option<f64>> {
        let ca = self.free_cell(a, "start")?;
        let cb = self.free_cell(b, "goal")?;
        if ca == cb {
            return Ok(Some(a.distance(b)));
        }
        let field = DistanceField::search(&self.grid, ca, Some(cb));
        // endpoint legs are summed first so the result is exactly symmetric in (a, b)
        Ok(field.cost_to(cb).map(|c| {
            c.meters(self.grid.resolution())
                + (a.distance(self.grid.cell_center(ca)) + self.grid.cell_center(cb).distance(b))
        }))
    }

    /// Polyline from `a` to `b` through grid cell centers, collinear runs merged.
    pub fn shortest_path(&self, a: Point, b: Point) -> Result<Option<Vec<Point>>> {
        shortest_path_on(&self.grid, a, b)
    }

    /// Distance field rooted at `goal`, for repeated distance-to-goal queries.
    pub fn goal_field(&self, goal: Point) -> Result<GoalField> {
        let cell = self.free_cell(goal, "goal")?;
        Ok(GoalField {
            goal,
            cell,
            field: DistanceField::from_source(&self.grid, cell),
        })
    }

    pub fn to_file(&self) -> WorldFile {
        WorldFile {
            schema: WORLD_SCHEMA.to_string(),
            grid_resolution: self.grid.resolution(),
            bounds: self.bounds,
            occupancy: OccupancyFile {
                cols: self.grid.cols(),
                rows: self.grid.rows(),
                rle_rows: self.grid.to_rle_rows(),
            },
            rooms: self.rooms.clone(),
            landmarks: self.landmarks.clone(),
        }
    }

    pub fn from_file(file: WorldFile) -> Result<Self> {
        if file.schema != WORLD_SCHEMA {
            return Err(Error::parse(
                "schema",
                format!("expected {WORLD_SCHEMA:?}, found {:?}", file.schema),
            ));
        }
        if file.occupancy.rle_rows.len() != file.occupancy.rows {
            return Err(Error::parse(
                "occupancy.rle_rows",
                format!(
                    "expected {} rows, found {}",
                    file.occupancy.rows,
                    file.occupancy.rle_rows.len()
                ),
            ));
        }
        let grid = OccupancyGrid::from_rle_rows(
            file.occupancy.cols,
            &file.occupancy.rle_rows,
            file.grid_resolution,
        )
        .map_err(|m| Error::parse("occupancy.rle_rows", m))?;
        let world = SceneWorld::new(grid, file.rooms, file.landmarks)?;
        let tol = file.grid_resolution * 1e-6;
        if (world.bounds.width - file.bounds.width).abs() > tol
            || (world.bounds.height - file.bounds.height).abs() > tol
        {
            return Err(Error::validation(
                "bounds disagree with occupancy extent (cols/rows x grid_resolution)",
            ));
        }
        Ok(world)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("world serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WorldFile = parse_json(text)?;
        Self::from_file(file)
    }
}

/// Planner entry point shared with the data engine's clearance-inflated grids.
pub fn shortest_path_on(grid: &OccupancyGrid, a: Point, b: Point) -> Result<Option<Vec<Point>>> {
    let cell = |p: Point, what: &str| -> Result<Cell> {
        match grid.cell_at(p) {
            Some(c) if !grid.is_blocked(c) => Ok(c),
            _ => Err(Error::domain(format!(
                "{what} ({}, {}) is not in free space",
                p.x, p.y
            ))),
        }
    };
    let ca = cell(a, "start")?;
    let cb = cell(b, "goal")?;
    if a == b {
        return Ok(Some(vec![a]));
    }
    if ca == cb {
        return Ok(Some(vec![a, b]));
    }
    let field = DistanceField::search(grid, ca, Some(cb));
    let Some(cells) = field.path_to(cb) else {
        return Ok(None);
    };
    let mut pts = Vec::with_capacity(cells.len() + 2);
    pts.push(a);
    pts.extend(cells.iter().map(|&c| grid.cell_center(c)));
    pts.push(b);
    Ok(Some(compress_collinear(&pts)))
}

/// Precomputed geodesic distances to one goal.
#[derive(Debug, Clone)]
pub struct GoalField {
    goal: Point,
    cell: Cell,
    field: DistanceField,
}

impl GoalField {
    pub fn goal(&self) -> Point {
        self.goal
    }

    /// Geodesic distance from `p` to the goal; `None` when unreachable or `p` is not free.
    pub fn distance_from(&self, world: &SceneWorld, p: Point) -> Option<f64> {
        let grid = world.grid();
        let c = grid.cell_at(p).filter(|&c| !grid.is_blocked(c))?;
        if c == self.cell {
            return Some(p.distance(self.goal));
        }
        let cost = self.field.cost_to(c)?;
        Some(
            cost.meters(grid.resolution())
                + (p.distance(grid.cell_center(c)) + grid.cell_center(self.cell).distance(self.goal)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupancyFile {
    pub cols: usize,
    pub rows: usize,
    pub rle_rows: Vec<String>,
}

/// On-disk world representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldFile {
    pub schema: String,
    pub grid_resolution: f64,
    pub bounds: Bounds,
    pub occupancy: OccupancyFile,
    pub rooms: Vec<Room>,
    pub landmarks: Vec<Landmark>,
}

pub fn load_world(path: impl AsRef<Path>) -> Result<SceneWorld> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SceneWorld::from_json(&text)
}

/// Deserialize with the JSON path of the offending field in the error.
pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::parse(path, e.into_inner().to_string())
    })
}

/// A navigation task in a world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: String,
    pub instruction: String,
    pub start: Pose,
    pub goal: Point,
    pub gt_waypoints: Vec<Point>,
    pub gt_geodesic_length: f64,
    /// Generator metadata: the room transitions the reference path was built to cross.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub planted_transitions: Vec<PlantedTransition>,
}

impl Episode {
    pub fn validate(&self, world: &SceneWorld) -> Result<()> {
        let ctx = |m: String| Error::validation(format!("episode {}: {m}", self.id));
        if !world.is_free(self.start.position()) {
            return Err(ctx("start is not in free space".into()));
        }
        if !world.is_free(self.goal) {
            return Err(ctx("goal is not in free space".into()));
        }
        if self.gt_waypoints.len() < 2 {
            return Err(ctx("needs at least two waypoints".into()));
        }
        for (i, w) in self.gt_waypoints.iter().enumerate() {
            if !w.is_finite() || !world.is_free(*w) {
                return Err(ctx(format!("gt_waypoints[{i}] is not in free space")));
            }
        }
        if !(self.gt_geodesic_length.is_finite() && self.gt_geodesic_length > 0.0) {
            return Err(ctx("gt_geodesic_length must be positive".into()));
        }
        Ok(())
    }

    pub fn reference_length(&self) -> f64 {
        polyline_length(&self.gt_waypoints)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodesFile {
    pub schema: String,
    pub episodes: Vec<Episode>,
}

pub fn episodes_to_json(episodes: &[Episode]) -> String {
    serde_json::to_string_pretty(&EpisodesFile {
        schema: EPISODES_SCHEMA.to_string(),
        episodes: episodes.to_vec(),
    })
    .expect("episodes serialize")
}

pub fn episodes_from_json(text: &str, world: &SceneWorld) -> Result<Vec<Episode>> {
    let file: EpisodesFile = parse_json(text)?;
    if file.schema != EPISODES_SCHEMA {
        return Err(Error::parse(
            "schema",
            format!("expected {EPISODES_SCHEMA:?}, found {:?}", file.schema),
        ));
    }
    for ep in &file.episodes {
        ep.validate(world)?;
    }
    Ok(file.episodes)
}

pub fn load_episodes(path: impl AsRef<Path>, world: &SceneWorld) -> Result<Vec<Episode>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    episodes_from_json(&text, world)
}
