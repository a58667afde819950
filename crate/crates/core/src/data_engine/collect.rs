use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_polyline_distance, polyline_length, Point};
use crate::kinematics::{
    ActionPrimitive, Mode, SegmentTag, StepAction, TerminatedBy, Trajectory, TrajectoryRecorder,
    FORWARD_STEP_M,
};
use crate::navigation::{PathFollower, VERTEX_TOLERANCE};
use crate::world::{ClearancePlanner, Episode, SceneWorld};

/// Radius within which a waypoint counts as visited.
pub const WAYPOINT_TOLERANCE: f64 = 0.25;

/// Wall clearance used when planning between waypoints.
const PLANNING_CLEARANCE: f64 = 0.3;

/// Consecutive blocked moves after which the follower is declared stuck.
const MAX_CONSECUTIVE_COLLISIONS: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    /// Turn 45 to 90 degrees off course, then walk 0.5 to 2 m.
    WrongTurn,
    /// Keep walking 0.5 to 2 m straight ahead.
    Overshoot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoisyExpertConfig {
    /// Chance per step of starting an error burst.
    pub error_probability: f64,
    pub kinds: Vec<ErrorKind>,
    pub seed: u64,
}

impl Default for NoisyExpertConfig {
    fn default() -> Self {
        Self {
            error_probability: 0.05,
            kinds: vec![ErrorKind::WrongTurn, ErrorKind::Overshoot],
            seed: 0,
        }
    }
}

impl NoisyExpertConfig {
    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.error_probability) {
            return Err(Error::domain(format!(
                "error_probability {} is outside [0, 1]",
                self.error_probability
            )));
        }
        if self.error_probability > 0.0 && self.kinds.is_empty() {
            return Err(Error::domain(
                "error kinds are empty but error_probability is positive",
            ));
        }
        Ok(())
    }

    fn burst(&self, rng: &mut ChaCha8Rng) -> Vec<ActionPrimitive> {
        let kind = *self.kinds.choose(rng).expect("kinds checked non-empty");
        let mut out = Vec::new();
        if kind == ErrorKind::WrongTurn {
            let dir = if rng.gen_bool(0.5) {
                ActionPrimitive::TurnLeft
            } else {
                ActionPrimitive::TurnRight
            };
            out.extend(std::iter::repeat_n(dir, rng.gen_range(3..=6)));
        }
        out.extend(std::iter::repeat_n(
            ActionPrimitive::Forward,
            rng.gen_range(2..=8),
        ));
        out
    }
}

/// Route vertices together with the index of the waypoint each vertex leads to.
#[derive(Debug, Clone, Default)]
struct Route {
    points: Vec<Point>,
    waypoint: Vec<usize>,
}

/// Reusable collection context: holds the clearance planner for one world.
#[derive(Debug, Clone)]
pub struct Collector<'w> {
    world: &'w SceneWorld,
    planner: ClearancePlanner,
}

impl<'w> Collector<'w> {
    pub fn new(world: &'w SceneWorld) -> Self {
        Self::with_planner(world, ClearancePlanner::new(world, PLANNING_CLEARANCE))
    }

    pub fn with_planner(world: &'w SceneWorld, planner: ClearancePlanner) -> Self {
        Self { world, planner }
    }

    pub fn world(&self) -> &'w SceneWorld {
        self.world
    }

    /// Plan from `from` through `waypoints[first..]`.
    fn route(&self, from: Point, waypoints: &[Point], first: usize) -> Result<Route> {
        let mut route = Route::default();
        let mut cur = from;
        for (i, &w) in waypoints.iter().enumerate().skip(first) {
            if cur == w {
                continue;
            }
            let leg = self
                .planner
                .plan(cur, w)
                .ok_or_else(|| Error::Collection(format!("waypoint {i} at {w:?} is unreachable")))?;
            for p in leg.into_iter().skip(1) {
                route.points.push(p);
                route.waypoint.push(i);
            }
            cur = w;
        }
        Ok(route)
    }

    /// Follow the reference waypoints and stop at the last one.
    pub fn gt(&self, episode: &Episode) -> Result<Trajectory> {
        self.walk(episode, None)
    }

    /// Follow the reference with seeded error bursts; excursions beyond `threshold` from the
    /// reference polyline are tagged deviated and corrected back to the next waypoint.
    pub fn dagger(&self, episode: &Episode, noise: &NoisyExpertConfig, threshold: f64) -> Result<Trajectory> {
        noise.check()?;
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(Error::domain(format!(
                "deviation threshold {threshold} must be positive"
            )));
        }
        self.walk(episode, Some((noise, threshold)))
    }

    fn walk(&self, episode: &Episode, noise: Option<(&NoisyExpertConfig, f64)>) -> Result<Trajectory> {
        let waypoints = &episode.gt_waypoints;
        let mut route = self.route(episode.start.position(), waypoints, 0)?;
        let budget = 200 + 20 * (polyline_length(&route.points) / FORWARD_STEP_M).ceil() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(noise.map_or(0, |(n, _)| n.seed));
        let mut rec = TrajectoryRecorder::new(self.world, episode.id.clone(), episode.start);
        let mut follower = PathFollower::new(route.points.clone(), VERTEX_TOLERANCE);
        // no new burst until the follower is back on the route it left
        let mut clean_until = 0;

        loop {
            if rec.len() > budget {
                return Err(Error::Collection(format!(
                    "episode {}: no arrival within {budget} steps",
                    episode.id
                )));
            }
            let pose = rec.pose();
            if follower.is_done(pose) {
                rec.pause(StepAction::Stop, Mode::Act);
                break;
            }
            let next = follower.next_index();
            if let Some((cfg, threshold)) = noise {
                if next >= clean_until && cfg.error_probability > 0.0 && rng.gen_bool(cfg.error_probability) {
                    let burst_start = rec.len();
                    let mut deviated = false;
                    for a in cfg.burst(&mut rng) {
                        rec.act(a, Mode::Act, SegmentTag::Normal);
                        if point_polyline_distance(rec.pose().position(), waypoints) > threshold {
                            deviated = true;
                            break;
                        }
                    }
                    let here = rec.pose().position();
                    route = if deviated {
                        for s in &mut rec.steps_mut()[burst_start..] {
                            s.segment_tag = SegmentTag::Deviated;
                        }
                        let wp = route.waypoint[next];
                        let target = waypoints[wp];
                        let fix = self.planner.plan(here, target).ok_or_else(|| {
                            Error::Collection(format!("waypoint {wp} at {target:?} is unreachable"))
                        })?;
                        self.follow(&mut rec, fix, SegmentTag::Correcting)?;
                        clean_until = 0;
                        self.route(rec.pose().position(), waypoints, wp + 1)?
                    } else {
                        let back = self.rejoin(here, &route, next)?;
                        clean_until = back.points.len() - (route.points.len() - next) + 1;
                        back
                    };
                    follower = PathFollower::new(route.points.clone(), VERTEX_TOLERANCE);
                    continue;
                }
            }
            let action = follower.next_primitive(pose).expect("follower not done");
            let hit = rec.act(action, Mode::Act, SegmentTag::Normal);
            follower.observe(pose, action, hit);
            if follower.collisions() >= MAX_CONSECUTIVE_COLLISIONS {
                return Err(Error::Collection(format!(
                    "episode {}: follower stuck at {:?}",
                    episode.id,
                    rec.pose().position()
                )));
            }
        }
        Ok(rec.finish(TerminatedBy::Stop))
    }

    /// Route from `here` back to vertex `next` of `route`, then the rest of it.
    fn rejoin(&self, here: Point, route: &Route, next: usize) -> Result<Route> {
        let target = route.points[next];
        let wp = route.waypoint[next];
        let leg = self
            .planner
            .plan(here, target)
            .ok_or_else(|| Error::Collection(format!("route vertex {target:?} is unreachable")))?;
        let mut out = Route::default();
        for p in leg.into_iter().skip(1) {
            out.points.push(p);
            out.waypoint.push(wp);
        }
        out.points.extend_from_slice(&route.points[next + 1..]);
        out.waypoint.extend_from_slice(&route.waypoint[next + 1..]);
        Ok(out)
    }

    fn follow(&self, rec: &mut TrajectoryRecorder<'_>, path: Vec<Point>, tag: SegmentTag) -> Result<()> {
        let budget = 100 + 20 * (polyline_length(&path) / FORWARD_STEP_M).ceil() as usize;
        let mut follower = PathFollower::new(path, VERTEX_TOLERANCE);
        for _ in 0..budget {
            let pose = rec.pose();
            let Some(action) = follower.next_primitive(pose) else {
                return Ok(());
            };
            let hit = rec.act(action, Mode::Act, tag);
            follower.observe(pose, action, hit);
            if follower.collisions() >= MAX_CONSECUTIVE_COLLISIONS {
                break;
            }
        }
        Err(Error::Collection(format!(
            "correction stuck at {:?}",
            rec.pose().position()
        )))
    }
}

pub fn collect_gt_trajectory(world: &SceneWorld, episode: &Episode) -> Result<Trajectory> {
    Collector::new(world).gt(episode)
}

pub fn collect_dagger_trajectory(
    world: &SceneWorld,
    episode: &Episode,
    noise: &NoisyExpertConfig,
    threshold: f64,
) -> Result<Trajectory> {
    Collector::new(world).dagger(episode, noise, threshold)
}
