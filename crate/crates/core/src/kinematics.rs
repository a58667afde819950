//! Agent pose, the four motion primitives, and trajectory records.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::world::SceneWorld;

/// Forward translation of one FORWARD primitive, meters.
pub const FORWARD_STEP_M: f64 = 0.25;
/// Rotation of one TURN primitive, degrees.
pub const TURN_STEP_DEG: f64 = 15.0;

/// Planar pose. Heading in degrees, 0 = +x, counter-clockwise positive, kept in `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose {
            x,
            y,
            heading: normalize_heading(heading),
        }
    }

    pub fn at(p: Point, heading: f64) -> Self {
        Pose::new(p.x, p.y, heading)
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && (0.0..360.0).contains(&self.heading)
    }
}

pub fn normalize_heading(deg: f64) -> f64 {
    let h = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}

/// Signed smallest rotation from `from` to `to`, in `(-180, 180]`.
pub fn heading_delta(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionPrimitive {
    #[serde(rename = "FORWARD")]
    Forward,
    #[serde(rename = "TURN-LEFT")]
    TurnLeft,
    #[serde(rename = "TURN-RIGHT")]
    TurnRight,
    #[serde(rename = "STOP")]
    Stop,
}

impl ActionPrimitive {
    pub const ALL: [ActionPrimitive; 4] = [
        ActionPrimitive::Forward,
        ActionPrimitive::TurnLeft,
        ActionPrimitive::TurnRight,
        ActionPrimitive::Stop,
    ];
}

impl fmt::Display for ActionPrimitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionPrimitive::Forward => "FORWARD",
            ActionPrimitive::TurnLeft => "TURN-LEFT",
            ActionPrimitive::TurnRight => "TURN-RIGHT",
            ActionPrimitive::Stop => "STOP",
        })
    }
}

/// What a trajectory step did: a primitive, a reasoning pause, or a no-op from unparseable text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepAction {
    #[serde(rename = "FORWARD")]
    Forward,
    #[serde(rename = "TURN-LEFT")]
    TurnLeft,
    #[serde(rename = "TURN-RIGHT")]
    TurnRight,
    #[serde(rename = "STOP")]
    Stop,
    #[serde(rename = "REASON")]
    Reason,
    #[serde(rename = "NOOP")]
    Noop,
}

impl StepAction {
    pub fn primitive(self) -> Option<ActionPrimitive> {
        match self {
            StepAction::Forward => Some(ActionPrimitive::Forward),
            StepAction::TurnLeft => Some(ActionPrimitive::TurnLeft),
            StepAction::TurnRight => Some(ActionPrimitive::TurnRight),
            StepAction::Stop => Some(ActionPrimitive::Stop),
            StepAction::Reason | StepAction::Noop => None,
        }
    }
}

impl From<ActionPrimitive> for StepAction {
    fn from(a: ActionPrimitive) -> Self {
        match a {
            ActionPrimitive::Forward => StepAction::Forward,
            ActionPrimitive::TurnLeft => StepAction::TurnLeft,
            ActionPrimitive::TurnRight => StepAction::TurnRight,
            ActionPrimitive::Stop => StepAction::Stop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "[REASON]")]
    Reason,
    #[serde(rename = "[ACT]")]
    Act,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Reason => "[REASON]",
            Mode::Act => "[ACT]",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentTag {
    #[default]
    Normal,
    Deviated,
    Correcting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub pose_before: Pose,
    pub pose_after: Pose,
    pub action: StepAction,
    pub collided: bool,
    pub room: Option<String>,
    pub mode: Mode,
    pub segment_tag: SegmentTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminatedBy {
    Stop,
    StepBudget,
    /// The policy backend failed mid-rollout; the trajectory is partial.
    Aborted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub episode_id: String,
    pub steps: Vec<StepRecord>,
    pub terminated_by: TerminatedBy,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.terminated_by != TerminatedBy::Aborted
    }

    /// Pose after the last step, or `start` for an empty trajectory.
    pub fn final_pose(&self, start: Pose) -> Pose {
        self.steps.last().map_or(start, |s| s.pose_after)
    }

    /// Observation positions: the starting pose followed by the pose after each step.
    pub fn observation_poses(&self) -> Vec<Pose> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        if let Some(first) = self.steps.first() {
            out.push(first.pose_before);
        }
        out.extend(self.steps.iter().map(|s| s.pose_after));
        out
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.steps.iter().enumerate() {
            if s.t != i {
                return Err(Error::validation(format!(
                    "trajectory {}: step {} carries t={}",
                    self.episode_id, i, s.t
                )));
            }
            if !s.pose_before.is_valid() || !s.pose_after.is_valid() {
                return Err(Error::validation(format!(
                    "trajectory {}: step {i} has an invalid pose",
                    self.episode_id
                )));
            }
            if i > 0 && self.steps[i - 1].pose_after != s.pose_before {
                return Err(Error::validation(format!(
                    "trajectory {}: pose chain broken at step {i}",
                    self.episode_id
                )));
            }
            let stationary = matches!(s.action, StepAction::Stop | StepAction::Reason | StepAction::Noop)
                || (s.action == StepAction::Forward && s.collided);
            if stationary && s.pose_after != s.pose_before {
                return Err(Error::validation(format!(
                    "trajectory {}: step {i} moves on a stationary action",
                    self.episode_id
                )));
            }
        }
        Ok(())
    }
}

/// Execute one primitive. Collision is a result: a blocked FORWARD leaves the pose unchanged.
pub fn apply_action(world: &SceneWorld, pose: Pose, action: ActionPrimitive) -> (Pose, bool) {
    match action {
        ActionPrimitive::Forward => {
            let rad = pose.heading.to_radians();
            let from = pose.position();
            let to = Point::new(
                pose.x + FORWARD_STEP_M * rad.cos(),
                pose.y + FORWARD_STEP_M * rad.sin(),
            );
            if world.in_bounds(to) && world.grid().segment_clear(from, to) {
                (Pose::new(to.x, to.y, pose.heading), false)
            } else {
                (pose, true)
            }
        }
        ActionPrimitive::TurnLeft => (Pose::new(pose.x, pose.y, pose.heading + TURN_STEP_DEG), false),
        ActionPrimitive::TurnRight => (Pose::new(pose.x, pose.y, pose.heading - TURN_STEP_DEG), false),
        ActionPrimitive::Stop => (pose, false),
    }
}

/// Sum of Euclidean displacements over the steps.
pub fn path_length(traj: &Trajectory) -> f64 {
    steps_length(&traj.steps)
}

pub fn steps_length(steps: &[StepRecord]) -> f64 {
    steps
        .iter()
        .map(|s| s.pose_before.position().distance(s.pose_after.position()))
        .sum()
}

/// Incrementally builds a trajectory with consistent indices and room labels.
pub struct TrajectoryRecorder<'w> {
    world: &'w SceneWorld,
    episode_id: String,
    pose: Pose,
    steps: Vec<StepRecord>,
}

impl<'w> TrajectoryRecorder<'w> {
    pub fn new(world: &'w SceneWorld, episode_id: impl Into<String>, start: Pose) -> Self {
        Self {
            world,
            episode_id: episode_id.into(),
            pose: start,
            steps: Vec::new(),
        }
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn steps_mut(&mut self) -> &mut [StepRecord] {
        &mut self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    fn room_label(&self, p: Point) -> Option<String> {
        self.world.room_at(p).ok().flatten().map(str::to_owned)
    }

    /// Apply a primitive and record it; returns whether it collided.
    pub fn act(&mut self, action: ActionPrimitive, mode: Mode, tag: SegmentTag) -> bool {
        let (after, collided) = apply_action(self.world, self.pose, action);
        self.push(action.into(), after, collided, mode, tag);
        collided
    }

    /// Record a step that does not move the agent.
    pub fn pause(&mut self, action: StepAction, mode: Mode) {
        self.push(action, self.pose, false, mode, SegmentTag::Normal);
    }

    fn push(&mut self, action: StepAction, after: Pose, collided: bool, mode: Mode, tag: SegmentTag) {
        let room = self.room_label(after.position());
        self.steps.push(StepRecord {
            t: self.steps.len(),
            pose_before: self.pose,
            pose_after: after,
            action,
            collided,
            room,
            mode,
            segment_tag: tag,
        });
        self.pose = after;
    }

    pub fn finish(self, terminated_by: TerminatedBy) -> Trajectory {
        Trajectory {
            episode_id: self.episode_id,
            steps: self.steps,
            terminated_by,
        }
    }
}

pub const TRAJECTORY_SCHEMA: &str = "vlnkit.trajectory/v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum TrajectoryLine {
    Header {
        schema: String,
        episode_id: String,
        terminated_by: TerminatedBy,
        steps: usize,
    },
    Step(StepRecord),
}

/// One header line per trajectory followed by one line per step.
pub fn trajectories_to_jsonl(trajs: &[Trajectory]) -> String {
    let mut out = String::new();
    for traj in trajs {
        let header = TrajectoryLine::Header {
            schema: TRAJECTORY_SCHEMA.to_string(),
            episode_id: traj.episode_id.clone(),
            terminated_by: traj.terminated_by,
            steps: traj.steps.len(),
        };
        out.push_str(&serde_json::to_string(&header).expect("header serializes"));
        out.push('\n');
        for step in &traj.steps {
            out.push_str(
                &serde_json::to_string(&TrajectoryLine::Step(step.clone())).expect("step serializes"),
            );
            out.push('\n');
        }
    }
    out
}

pub fn trajectories_from_jsonl(text: &str) -> Result<Vec<Trajectory>> {
    let mut out: Vec<(Trajectory, usize)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrajectoryLine = crate::world::parse_json(line).map_err(|e| match e {
            Error::Parse { field, message } => Error::parse(format!("line {}: {field}", lineno + 1), message),
            other => other,
        })?;
        match rec {
            TrajectoryLine::Header {
                schema,
                episode_id,
                terminated_by,
                steps,
            } => {
                if schema != TRAJECTORY_SCHEMA {
                    return Err(Error::parse(
                        format!("line {}: schema", lineno + 1),
                        format!("expected {TRAJECTORY_SCHEMA:?}, found {schema:?}"),
                    ));
                }
                out.push((
                    Trajectory {
                        episode_id,
                        steps: Vec::with_capacity(steps),
                        terminated_by,
                    },
                    steps,
                ));
            }
            TrajectoryLine::Step(step) => match out.last_mut() {
                Some((traj, _)) => traj.steps.push(step),
                None => {
                    return Err(Error::parse(
                        format!("line {}", lineno + 1),
                        "step record before any trajectory header",
                    ))
                }
            },
        }
    }
    out.into_iter()
        .map(|(traj, declared)| {
            if traj.steps.len() != declared {
                return Err(Error::validation(format!(
                    "trajectory {}: header declares {declared} steps, found {}",
                    traj.episode_id,
                    traj.steps.len()
                )));
            }
            traj.validate()?;
            Ok(traj)
        })
        .collect()
}
