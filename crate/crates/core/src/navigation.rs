//! Pure-pursuit control over the discrete primitives: aim at the next polyline vertex,
//! turn in 15° increments until aligned, then step forward.

use crate::geometry::Point;
use crate::kinematics::{apply_action, heading_delta, ActionPrimitive, Pose, TURN_STEP_DEG};
use crate::world::SceneWorld;

/// Distance at which a polyline vertex counts as reached.
pub const VERTEX_TOLERANCE: f64 = 0.15;

#[derive(Debug, Clone)]
pub struct PathFollower {
    path: Vec<Point>,
    next: usize,
    tolerance: f64,
    bias: i32,
    collisions: u32,
}

impl PathFollower {
    pub fn new(path: Vec<Point>, tolerance: f64) -> Self {
        Self {
            path,
            next: 0,
            tolerance,
            bias: 0,
            collisions: 0,
        }
    }

    pub fn path(&self) -> &[Point] {
        &self.path
    }

    pub fn target(&self) -> Option<Point> {
        self.path.get(self.next).copied()
    }

    /// Index of the vertex currently aimed at; equals the path length once done.
    pub fn next_index(&self) -> usize {
        self.next
    }

    /// Consecutive blocked FORWARD attempts since the last successful move.
    pub fn collisions(&self) -> u32 {
        self.collisions
    }

    fn advance(&mut self, at: Point) {
        while self.next < self.path.len() && at.distance(self.path[self.next]) <= self.tolerance {
            self.next += 1;
        }
    }

    pub fn is_done(&mut self, pose: Pose) -> bool {
        self.advance(pose.position());
        self.next >= self.path.len()
    }

    /// Next primitive toward the path end, or `None` once the last vertex is reached.
    pub fn next_primitive(&mut self, pose: Pose) -> Option<ActionPrimitive> {
        if self.is_done(pose) {
            return None;
        }
        let target = self.path[self.next];
        let raw = heading_delta(pose.heading, pose.position().bearing_to(target));
        let mut turns = (raw / TURN_STEP_DEG).round() as i32;
        if self.bias != 0 {
            turns += self.bias;
        }
        Some(match turns {
            0 => ActionPrimitive::Forward,
            t if t > 0 => ActionPrimitive::TurnLeft,
            _ => ActionPrimitive::TurnRight,
        })
    }

    /// Feed back the outcome of the last executed primitive.
    pub fn observe(&mut self, pose_before: Pose, action: ActionPrimitive, collided: bool) {
        if action != ActionPrimitive::Forward {
            return;
        }
        if !collided {
            self.bias = 0;
            self.collisions = 0;
            return;
        }
        self.collisions += 1;
        // aim one bucket to the side of the residual bearing error, alternating on repeats
        let Some(target) = self.target() else { return };
        let raw = heading_delta(pose_before.heading, pose_before.position().bearing_to(target));
        let residual = raw - (raw / TURN_STEP_DEG).round() * TURN_STEP_DEG;
        let side = if residual >= 0.0 { 1 } else { -1 };
        self.bias = if self.collisions % 2 == 1 { side } else { -side } * self.collisions.div_ceil(2) as i32;
    }

    /// How many copies of `action` the follower would issue in a row from `pose`, up to `cap`.
    pub fn run_length(&self, world: &SceneWorld, pose: Pose, action: ActionPrimitive, cap: usize) -> usize {
        let mut sim = self.clone();
        let mut p = pose;
        let mut n = 0;
        while n < cap {
            match sim.next_primitive(p) {
                Some(a) if a == action => {
                    let (after, hit) = apply_action(world, p, a);
                    sim.observe(p, a, hit);
                    if hit {
                        // a blocked step still counts as issued
                        return n + 1;
                    }
                    p = after;
                    n += 1;
                }
                _ => break,
            }
        }
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn turns_toward_target_then_advances() {
        let world = SceneWorld::open(4.0, 4.0, 0.05).unwrap();
        let mut f = PathFollower::new(vec![Point::new(1.0, 2.0)], VERTEX_TOLERANCE);
        let mut pose = Pose::new(1.0, 1.0, 0.0);
        let mut actions = Vec::new();
        while let Some(a) = f.next_primitive(pose) {
            let (p, hit) = apply_action(&world, pose, a);
            f.observe(pose, a, hit);
            pose = p;
            actions.push(a);
        }
        use ActionPrimitive::*;
        assert_eq!(actions, [vec![TurnLeft; 6], vec![Forward; 4]].concat());
        assert!(pose.position().distance(Point::new(1.0, 2.0)) < 1e-9);
    }
}
