//! Procedural floorplans: a central corridor with rooms on both sides, each room opening
//! onto the corridor and optionally onto its neighbour. Episodes are planted between rooms
//! and record the room transitions their reference path crosses.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{Cell, OccupancyGrid};
use super::planner::ClearancePlanner;
use super::{Episode, Landmark, Room, SceneWorld};
use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::kinematics::Pose;

const CATEGORIES: [(&str, [&str; 3]); 8] = [
    ("bedroom", ["bed", "wardrobe", "nightstand"]),
    ("kitchen", ["fridge", "stove", "sink"]),
    ("living room", ["sofa", "television", "armchair"]),
    ("bathroom", ["bathtub", "toilet", "mirror"]),
    ("office", ["desk", "bookshelf", "printer"]),
    ("dining room", ["dining table", "cabinet", "chandelier"]),
    ("laundry room", ["washing machine", "dryer", "ironing board"]),
    ("study", ["reading lamp", "globe", "piano"]),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub room_count: usize,
    /// Interior room width range along the corridor, meters.
    pub room_width: (f64, f64),
    /// Interior room depth range away from the corridor, meters.
    pub room_depth: (f64, f64),
    pub corridor_width: f64,
    pub door_width: f64,
    pub wall_thickness: f64,
    pub resolution: f64,
    /// Probability that neighbouring rooms on the same side share a door.
    pub connect_probability: f64,
    pub episode_count: usize,
    /// Clearance kept from walls by reference paths.
    pub clearance: f64,
    /// Minimum distance of start and goal positions from room walls.
    pub placement_margin: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            room_count: 4,
            room_width: (3.0, 4.5),
            room_depth: (2.5, 3.5),
            corridor_width: 1.2,
            door_width: 1.0,
            wall_thickness: 0.1,
            resolution: 0.05,
            connect_probability: 0.5,
            episode_count: 10,
            clearance: 0.3,
            placement_margin: 0.6,
        }
    }
}

/// A room change the reference path was built to cross.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTransition {
    /// Index of the waypoint segment on which the path enters `to_room`.
    pub segment: usize,
    pub from_room: usize,
    pub to_room: usize,
    pub from: String,
    pub to: String,
}

struct Layout {
    grid: OccupancyGrid,
    rooms: Vec<Room>,
    corridor: Rect,
}

fn cells(meters: f64, res: f64) -> usize {
    (meters / res).round() as usize
}

fn sample_cells(rng: &mut ChaCha8Rng, range: (f64, f64), res: f64) -> usize {
    let lo = cells(range.0, res);
    let hi = cells(range.1, res).max(lo);
    rng.gen_range(lo..=hi)
}

impl GenerationParams {
    fn check(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Generation(m.to_string()));
        if self.room_count == 0 {
            return fail("room_count must be at least 1");
        }
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return fail("resolution must be positive");
        }
        for (name, (lo, hi)) in [("room_width", self.room_width), ("room_depth", self.room_depth)] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err(Error::Generation(format!("{name} range is empty or invalid")));
            }
        }
        if self.wall_thickness < self.resolution {
            return fail("wall_thickness must span at least one cell");
        }
        if self.corridor_width < 2.0 * self.clearance + 2.0 * self.resolution {
            return fail("corridor is too narrow for the path clearance");
        }
        if self.door_width < 2.0 * self.clearance + 2.0 * self.resolution {
            return fail("doors are too narrow for the path clearance");
        }
        if self.room_width.0 < self.door_width + 2.0 * self.wall_thickness {
            return fail("rooms cannot fit a door: room_width below door_width");
        }
        let inner = 2.0 * self.placement_margin + self.resolution;
        if self.room_width.0 < inner || self.room_depth.0 < inner {
            return fail("rooms are too small for the placement margin");
        }
        if self.placement_margin <= self.clearance {
            return fail("placement_margin must exceed clearance");
        }
        if self.room_depth.0 < self.door_width + 2.0 * self.wall_thickness && self.connect_probability > 0.0 {
            return fail("room_depth cannot fit an interior door");
        }
        if !(0.0..=1.0).contains(&self.connect_probability) {
            return fail("connect_probability must be in [0, 1]");
        }
        Ok(())
    }
}

fn build_layout(params: &GenerationParams, rng: &mut ChaCha8Rng) -> Result<Layout> {
    let res = params.resolution;
    let wall = cells(params.wall_thickness, res).max(1);
    let door = cells(params.door_width, res);
    let corridor = cells(params.corridor_width, res);
    let n_top = params.room_count.div_ceil(2);

    let mut order: Vec<usize> = (0..CATEGORIES.len()).collect();
    order.shuffle(rng);

    // (width, depth) per room in cells; top row first
    let dims: Vec<(usize, usize)> = (0..params.room_count)
        .map(|_| {
            (
                sample_cells(rng, params.room_width, res),
                sample_cells(rng, params.room_depth, res),
            )
        })
        .collect();
    let (top, bottom) = dims.split_at(n_top);
    let row_len = |row: &[(usize, usize)]| wall + row.iter().map(|d| d.0 + wall).sum::<usize>();
    let cols = row_len(top).max(row_len(bottom));
    let depth_bottom = bottom.iter().map(|d| d.1).max();
    let depth_top = top.iter().map(|d| d.1).max().unwrap_or(0);
    let corridor_y0 = wall + depth_bottom.map_or(0, |d| d + wall);
    let corridor_y1 = corridor_y0 + corridor;
    let rows = corridor_y1 + wall + depth_top + wall;
    if cols * rows > 16_000_000 {
        return Err(Error::Generation("world exceeds 16M cells".into()));
    }

    let mut grid = OccupancyGrid::filled(cols, rows, res);
    let carve = |grid: &mut OccupancyGrid, c0: usize, r0: usize, c1: usize, r1: usize| {
        for r in r0..r1 {
            for c in c0..c1 {
                grid.set(Cell::new(c, r), false);
            }
        }
    };
    let to_rect = |c0: usize, r0: usize, c1: usize, r1: usize| {
        Rect::new(c0 as f64 * res, r0 as f64 * res, c1 as f64 * res, r1 as f64 * res)
    };
    carve(&mut grid, wall, corridor_y0, cols - wall, corridor_y1);
    let corridor_rect = to_rect(wall, corridor_y0, cols - wall, corridor_y1);

    let mut rooms = Vec::with_capacity(params.room_count);
    // interior cell boxes (c0, r0, c1, r1) per room
    let mut boxes = Vec::with_capacity(params.room_count);
    for (side, row) in [(true, top), (false, bottom)] {
        let mut x = wall;
        for &(w, d) in row {
            let (r0, r1) = if side {
                (corridor_y1 + wall, corridor_y1 + wall + d)
            } else {
                (corridor_y0 - wall - d, corridor_y0 - wall)
            };
            carve(&mut grid, x, r0, x + w, r1);
            // door onto the corridor
            let dx = rng.gen_range(x + wall..=x + w - wall - door);
            let (dr0, dr1) = if side {
                (corridor_y1, corridor_y1 + wall)
            } else {
                (corridor_y0 - wall, corridor_y0)
            };
            carve(&mut grid, dx, dr0, dx + door, dr1);
            let idx = rooms.len();
            rooms.push(Room {
                region: to_rect(x, r0, x + w, r1),
                category: match idx / CATEGORIES.len() {
                    0 => CATEGORIES[order[idx]].0.to_string(),
                    k => format!("{} {}", CATEGORIES[order[idx % CATEGORIES.len()]].0, k + 1),
                },
            });
            boxes.push((x, r0, x + w, r1, side));
            x += w + wall;
        }
    }
    // interior doors between same-side neighbours
    for i in 0..boxes.len().saturating_sub(1) {
        let (a, b) = (boxes[i], boxes[i + 1]);
        if a.4 != b.4 || !rng.gen_bool(params.connect_probability) {
            continue;
        }
        let lo = a.1.max(b.1) + wall;
        let hi = a.3.min(b.3).saturating_sub(wall + door);
        if hi < lo {
            continue;
        }
        let dy = rng.gen_range(lo..=hi);
        carve(&mut grid, a.2, dy, b.0, dy + door);
    }
    Ok(Layout {
        grid,
        rooms,
        corridor: corridor_rect,
    })
}

fn random_point_in(rng: &mut ChaCha8Rng, rect: Rect) -> Point {
    Point::new(
        rng.gen_range(rect.min_x..=rect.max_x),
        rng.gen_range(rect.min_y..=rect.max_y),
    )
}

/// Rooms visited along a polyline as `(room index, segment index of entry)`, corridors skipped.
fn room_sequence(world: &SceneWorld, path: &[Point], step: f64) -> Vec<(usize, usize, f64)> {
    let mut seq: Vec<(usize, usize, f64)> = Vec::new();
    for (seg, w) in path.windows(2).enumerate() {
        let len = w[0].distance(w[1]);
        let n = ((len / step).ceil() as usize).max(1);
        for i in 0..=n {
            let p = w[0].lerp(w[1], i as f64 / n as f64);
            let Ok(Some(room)) = world.room_index_at(p) else {
                continue;
            };
            match seq.last_mut() {
                Some(last) if last.0 == room => last.2 += len / n as f64,
                _ => seq.push((room, seg, 0.0)),
            }
        }
    }
    seq
}

fn describe(
    rng: &mut ChaCha8Rng,
    world: &SceneWorld,
    visits: &[usize],
    via_corridor: bool,
    goal_landmark: Option<&Landmark>,
) -> String {
    let rooms = world.rooms();
    let mut parts = vec![format!(
        "{} the {}",
        ["Leave", "Walk out of", "Exit"][rng.gen_range(0..3)],
        rooms[visits[0]].category
    )];
    if via_corridor {
        parts.push(
            [
                "walk down the hallway",
                "follow the corridor",
                "go along the hallway",
            ][rng.gen_range(0..3)]
            .to_string(),
        );
    }
    for &r in &visits[1..] {
        parts.push(format!(
            "{} the {}",
            ["enter", "go into", "continue into"][rng.gen_range(0..3)],
            rooms[r].category
        ));
    }
    let mut text = parts.join(", ");
    match goal_landmark {
        Some(lm) => text.push_str(&format!(" and stop next to the {}.", lm.category)),
        None => text.push_str(" and stop there."),
    }
    text
}

/// Deterministic world and episode generation for a seed.
pub fn generate_synthetic_world(seed: u64, params: &GenerationParams) -> Result<(SceneWorld, Vec<Episode>)> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = build_layout(params, &mut rng)?;

    let mut landmarks = Vec::new();
    for (i, room) in layout.rooms.iter().enumerate() {
        let kinds = CATEGORIES
            .iter()
            .find(|(c, _)| room.category.starts_with(c))
            .map(|(_, k)| k)
            .expect("category comes from the table");
        let inner = room.region.shrink(0.3);
        for (k, kind) in kinds.iter().take(2).enumerate() {
            landmarks.push(Landmark {
                id: format!("lm-{i}-{k}"),
                category: kind.to_string(),
                position: random_point_in(&mut rng, inner),
            });
        }
    }
    let world = SceneWorld::new(layout.grid, layout.rooms, landmarks)?;
    let planner = ClearancePlanner::new(&world, params.clearance);
    let n = world.rooms().len();

    let mut episodes = Vec::with_capacity(params.episode_count);
    let mut attempts = 0;
    while episodes.len() < params.episode_count {
        attempts += 1;
        if attempts > 200 * (params.episode_count + 1) {
            return Err(Error::Generation(
                "could not place episodes satisfying the layout constraints".into(),
            ));
        }
        let (s, g) = if n >= 2 {
            let s = rng.gen_range(0..n);
            let mut g = rng.gen_range(0..n - 1);
            if g >= s {
                g += 1;
            }
            (s, g)
        } else {
            (0, 0)
        };
        let start = random_point_in(&mut rng, world.rooms()[s].region.shrink(params.placement_margin));
        let goal = random_point_in(&mut rng, world.rooms()[g].region.shrink(params.placement_margin));
        let heading = 15.0 * rng.gen_range(0..24) as f64;
        if s == g && start.distance(goal) < 1.5 {
            continue;
        }
        let Some(waypoints) = planner.plan(start, goal) else {
            continue;
        };
        if waypoints.len() < 2 {
            continue;
        }
        let seq = room_sequence(&world, &waypoints, world.resolution());
        // every room passed through must hold the path for a meter so room labels settle
        if seq.len() > 2 && seq[1..seq.len() - 1].iter().any(|v| v.2 < 1.0) {
            continue;
        }
        if seq.first().map(|v| v.0) != Some(s) || seq.last().map(|v| v.0) != Some(g) {
            continue;
        }
        let Some(geodesic) = world.geodesic_distance(start, goal)? else {
            continue;
        };
        let planted: Vec<PlantedTransition> = seq
            .windows(2)
            .filter(|w| world.rooms()[w[0].0].category != world.rooms()[w[1].0].category)
            .map(|w| PlantedTransition {
                segment: w[1].1,
                from_room: w[0].0,
                to_room: w[1].0,
                from: world.rooms()[w[0].0].category.clone(),
                to: world.rooms()[w[1].0].category.clone(),
            })
            .collect();
        let via_corridor = waypoints
            .windows(2)
            .any(|w| (0..=16).any(|i| layout.corridor.contains(w[0].lerp(w[1], i as f64 / 16.0))));
        let visits: Vec<usize> = seq.iter().map(|v| v.0).collect();
        let goal_landmark = world
            .landmarks()
            .iter()
            .filter(|lm| world.rooms()[g].region.contains(lm.position))
            .min_by(|a, b| a.position.distance(goal).total_cmp(&b.position.distance(goal)));
        let instruction = describe(&mut rng, &world, &visits, via_corridor, goal_landmark);
        let episode = Episode {
            id: format!("ep-{:04}", episodes.len()),
            instruction,
            start: Pose::at(start, heading),
            goal,
            gt_waypoints: waypoints,
            gt_geodesic_length: geodesic,
            planted_transitions: planted,
        };
        episode.validate(&world)?;
        episodes.push(episode);
    }
    Ok((world, episodes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rooms_is_an_error() {
        let p = GenerationParams {
            room_count: 0,
            ..Default::default()
        };
        assert!(matches!(
            generate_synthetic_world(1, &p),
            Err(Error::Generation(_))
        ));
    }

    #[test]
    fn doors_wider_than_rooms_are_infeasible() {
        let p = GenerationParams {
            door_width: 5.0,
            ..Default::default()
        };
        assert!(matches!(
            generate_synthetic_world(1, &p),
            Err(Error::Generation(_))
        ));
    }

    #[test]
    fn same_seed_same_bytes() {
        let p = GenerationParams::default();
        let (w1, e1) = generate_synthetic_world(11, &p).unwrap();
        let (w2, e2) = generate_synthetic_world(11, &p).unwrap();
        assert_eq!(w1.to_json(), w2.to_json());
        assert_eq!(
            super::super::episodes_to_json(&e1),
            super::super::episodes_to_json(&e2)
        );
    }

    #[test]
    fn two_rooms_one_transition() {
        let p = GenerationParams {
            room_count: 2,
            episode_count: 3,
            ..Default::default()
        };
        let (world, eps) = generate_synthetic_world(7, &p).unwrap();
        assert_eq!(world.rooms().len(), 2);
        for ep in &eps {
            assert_eq!(ep.planted_transitions.len(), 1, "{:?}", ep.planted_transitions);
            let t = &ep.planted_transitions[0];
            assert_ne!(t.from, t.to);
            ep.validate(&world).unwrap();
        }
    }

    #[test]
    fn single_room_world_has_no_transitions() {
        let p = GenerationParams {
            room_count: 1,
            room_width: (4.0, 4.0),
            room_depth: (4.0, 4.0),
            episode_count: 2,
            ..Default::default()
        };
        let (_, eps) = generate_synthetic_world(3, &p).unwrap();
        assert!(eps.iter().all(|e| e.planted_transitions.is_empty()));
    }
}
