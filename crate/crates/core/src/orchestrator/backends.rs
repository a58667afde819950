use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{render_command, BackendError, PolicyBackend, PolicyDecision, PolicyQuery};
use crate::kinematics::{apply_action, ActionPrimitive};
use crate::navigation::{PathFollower, VERTEX_TOLERANCE};
use crate::world::{ClearancePlanner, Episode, SceneWorld};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptedExpertConfig {
    /// Longest forward command issued at once, in primitives.
    pub max_forward_run: usize,
    pub max_turn_run: usize,
    /// Distance to the goal at which the expert stops.
    pub stop_radius: f64,
    /// Emit a reasoning step whenever the agent enters a new room.
    pub reason_on_room_change: bool,
    /// Give up after this many consecutive blocked forward moves.
    pub max_collisions: u32,
}

impl Default for ScriptedExpertConfig {
    fn default() -> Self {
        Self {
            max_forward_run: 3,
            max_turn_run: 6,
            stop_radius: 0.25,
            reason_on_room_change: false,
            max_collisions: 8,
        }
    }
}

/// Privileged policy that follows the reference waypoints and then stops.
pub struct ScriptedExpert<'w> {
    world: &'w SceneWorld,
    follower: PathFollower,
    goal: crate::geometry::Point,
    config: ScriptedExpertConfig,
    last_room: Option<String>,
}

impl<'w> ScriptedExpert<'w> {
    pub fn new(world: &'w SceneWorld, episode: &Episode, config: ScriptedExpertConfig) -> Self {
        let mut path = episode.gt_waypoints.clone();
        if path.last() != Some(&episode.goal) {
            path.push(episode.goal);
        }
        Self {
            world,
            follower: PathFollower::new(path, VERTEX_TOLERANCE),
            goal: episode.goal,
            config,
            last_room: None,
        }
    }

    /// Expert that plans its own route to the goal instead of using the waypoints.
    pub fn planned(
        world: &'w SceneWorld,
        planner: &ClearancePlanner,
        episode: &Episode,
        config: ScriptedExpertConfig,
    ) -> Option<Self> {
        let path = planner.plan(episode.start.position(), episode.goal)?;
        Some(Self {
            world,
            follower: PathFollower::new(path, VERTEX_TOLERANCE),
            goal: episode.goal,
            config,
            last_room: None,
        })
    }
}

impl PolicyBackend for ScriptedExpert<'_> {
    fn decide(&mut self, query: &PolicyQuery<'_>) -> Result<PolicyDecision, BackendError> {
        let frame = query
            .frames
            .last()
            .ok_or_else(|| BackendError::Protocol("query carries no frames".into()))?;
        let pose = frame.pose;

        if self.config.reason_on_room_change {
            if let Some(room) = &frame.room {
                if self.last_room.as_ref() != Some(room) {
                    if let Some(prev) = self.last_room.replace(room.clone()) {
                        return Ok(PolicyDecision::reason(format!(
                            "Scene: I am in the {room}.\nProgress: I left the {prev}.\nPlan: Continue toward the goal."
                        )));
                    }
                }
            }
        }

        if pose.position().distance(self.goal) <= self.config.stop_radius
            || self.follower.collisions() >= self.config.max_collisions
        {
            return Ok(PolicyDecision::act("stop"));
        }
        let Some(action) = self.follower.next_primitive(pose) else {
            return Ok(PolicyDecision::act("stop"));
        };
        let cap = match action {
            ActionPrimitive::Forward => self.config.max_forward_run,
            _ => self.config.max_turn_run,
        };
        let n = self
            .follower
            .run_length(self.world, pose, action, cap.max(1))
            .max(1);
        // advance the follower through the primitives the loop is about to execute
        let mut p = pose;
        for _ in 0..n {
            let (after, hit) = apply_action(self.world, p, action);
            self.follower.observe(p, action, hit);
            p = after;
        }
        Ok(PolicyDecision::act(render_command(action, n)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomBackendConfig {
    pub reason_probability: f64,
    /// Probability of emitting exactly equal logits.
    pub tie_probability: f64,
    pub stop_probability: f64,
    pub garbage_probability: f64,
}

impl Default for RandomBackendConfig {
    fn default() -> Self {
        Self {
            reason_probability: 0.2,
            tie_probability: 0.1,
            stop_probability: 0.02,
            garbage_probability: 0.05,
        }
    }
}

/// Seeded backend producing arbitrary, occasionally malformed decisions.
pub struct RandomBackend {
    rng: ChaCha8Rng,
    config: RandomBackendConfig,
}

impl RandomBackend {
    pub fn new(rng: ChaCha8Rng, config: RandomBackendConfig) -> Self {
        Self { rng, config }
    }
}

const GARBAGE: [&str; 4] = ["walk ahead a bit", "move forward", "turn around", "forward 3"];

impl PolicyBackend for RandomBackend {
    fn decide(&mut self, query: &PolicyQuery<'_>) -> Result<PolicyDecision, BackendError> {
        let rng = &mut self.rng;
        let (d_reason, d_act) = if rng.gen_bool(self.config.tie_probability) {
            let v = rng.gen_range(-2.0..2.0);
            (v, v)
        } else if rng.gen_bool(self.config.reason_probability) {
            (rng.gen_range(0.5..2.0), rng.gen_range(-2.0..0.5))
        } else {
            (rng.gen_range(-2.0..0.5), rng.gen_range(0.5..2.0))
        };
        let text = if d_reason > d_act {
            format!(
                "Scene: step {}.\nProgress: unknown.\nPlan: keep going.",
                query.frames.len()
            )
        } else if rng.gen_bool(self.config.stop_probability) {
            "stop".to_string()
        } else if rng.gen_bool(self.config.garbage_probability) {
            GARBAGE[rng.gen_range(0..GARBAGE.len())].to_string()
        } else {
            let action = [
                ActionPrimitive::Forward,
                ActionPrimitive::TurnLeft,
                ActionPrimitive::TurnRight,
            ][rng.gen_range(0..3)];
            render_command(action, rng.gen_range(1..=4))
        };
        Ok(PolicyDecision {
            d_reason,
            d_act,
            text,
        })
    }
}

/// Plays back a fixed list of decisions, failing once it runs out.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    decisions: std::vec::IntoIter<PolicyDecision>,
}

impl ReplayBackend {
    pub fn new(decisions: Vec<PolicyDecision>) -> Self {
        Self {
            decisions: decisions.into_iter(),
        }
    }
}

impl PolicyBackend for ReplayBackend {
    fn decide(&mut self, _query: &PolicyQuery<'_>) -> Result<PolicyDecision, BackendError> {
        self.decisions.next().ok_or(BackendError::Exhausted)
    }
}
