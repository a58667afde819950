use serde::{Deserialize, Serialize};

use super::context::{extract_node_context, ContextConfig};
use super::{sort_nodes, GoalDistance, KeyNode, NodeCause, NodeType, RoomTransition};
use crate::error::{Error, Result};
use crate::geometry::point_polyline_distance;
use crate::kinematics::{SegmentTag, TerminatedBy, Trajectory};
use crate::metrics::SUCCESS_RADIUS;
use crate::orchestrator::FovConfig;
use crate::world::{Episode, SceneWorld};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionConfig {
    pub k_debounce: usize,
    pub deviation_threshold: f64,
    pub context: ContextConfig,
    pub fov: FovConfig,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            k_debounce: 2,
            deviation_threshold: 1.0,
            context: ContextConfig::default(),
            fov: FovConfig::default(),
        }
    }
}

/// Room-change and correction-complete nodes.
///
/// A room change fires at the first step of a new category once it has held for
/// `k_debounce` labeled steps; unlabeled steps (corridors) are transparent.
pub fn detect_subtask_nodes(traj: &Trajectory, k_debounce: usize) -> Vec<KeyNode> {
    let k = k_debounce.max(1);
    let mut nodes = Vec::new();
    let mut current: Option<&str> = None;
    let mut candidate: Option<(&str, usize, usize)> = None;
    for (i, step) in traj.steps.iter().enumerate() {
        let Some(room) = step.room.as_deref() else {
            continue;
        };
        let Some(cur) = current else {
            current = Some(room);
            continue;
        };
        if room == cur {
            candidate = None;
            continue;
        }
        let (cand, start, count) = match candidate {
            Some((r, start, n)) if r == room => (r, start, n + 1),
            _ => (room, i, 1),
        };
        if count >= k {
            let mut node = KeyNode::new(&traj.episode_id, NodeType::SubtaskCompletion, start);
            node.cause = Some(NodeCause::RoomChange);
            node.room_transition = Some(RoomTransition {
                from: cur.to_string(),
                to: cand.to_string(),
            });
            nodes.push(node);
            current = Some(cand);
            candidate = None;
        } else {
            candidate = Some((cand, start, count));
        }
    }

    for (i, step) in traj.steps.iter().enumerate() {
        let ends_run = step.segment_tag == SegmentTag::Correcting
            && traj
                .steps
                .get(i + 1)
                .is_none_or(|n| n.segment_tag != SegmentTag::Correcting);
        if ends_run {
            let mut node = KeyNode::new(&traj.episode_id, NodeType::SubtaskCompletion, i);
            node.cause = Some(NodeCause::CorrectionComplete);
            nodes.push(node);
        }
    }
    sort_nodes(&mut nodes);
    nodes
}

/// Distance from each step's resulting position to the reference polyline.
pub fn deviation_series(traj: &Trajectory, episode: &Episode) -> Vec<f64> {
    traj.steps
        .iter()
        .map(|s| point_polyline_distance(s.pose_after.position(), &episode.gt_waypoints))
        .collect()
}

/// One node per excursion beyond `threshold`; re-arms once the distance falls to half of it.
pub fn detect_deviation_nodes(traj: &Trajectory, episode: &Episode, threshold: f64) -> Result<Vec<KeyNode>> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::domain(format!(
            "deviation threshold {threshold} must be positive"
        )));
    }
    let mut armed = true;
    let mut nodes = Vec::new();
    for (i, d) in deviation_series(traj, episode).into_iter().enumerate() {
        if armed && d > threshold {
            nodes.push(KeyNode::new(&traj.episode_id, NodeType::PathDeviation, i));
            armed = false;
        } else if !armed && d <= 0.5 * threshold {
            armed = true;
        }
    }
    Ok(nodes)
}

/// A stopping-error node at the terminal step when the agent ended outside the success radius.
pub fn detect_stopping_error(
    traj: &Trajectory,
    episode: &Episode,
    world: &SceneWorld,
) -> Result<Option<KeyNode>> {
    let Some(last) = traj.steps.last() else {
        return Ok(None);
    };
    if traj.terminated_by == TerminatedBy::Aborted {
        return Ok(None);
    }
    let distance = match world.geodesic_distance(last.pose_after.position(), episode.goal)? {
        Some(ne) if ne <= SUCCESS_RADIUS => return Ok(None),
        Some(ne) => GoalDistance::Meters(ne),
        None => GoalDistance::Unreachable,
    };
    let mut node = KeyNode::new(&traj.episode_id, NodeType::StoppingError, traj.steps.len() - 1);
    node.final_distance = Some(distance);
    Ok(Some(node))
}

/// Every detector, with context extracted and nodes in step order.
pub fn detect_all(
    world: &SceneWorld,
    episode: &Episode,
    traj: &Trajectory,
    config: &DetectionConfig,
) -> Result<Vec<KeyNode>> {
    let mut nodes = detect_subtask_nodes(traj, config.k_debounce);
    nodes.extend(detect_deviation_nodes(traj, episode, config.deviation_threshold)?);
    nodes.extend(detect_stopping_error(traj, episode, world)?);
    let mut nodes = nodes
        .into_iter()
        .map(|n| extract_node_context(world, traj, episode, n, &config.context, &config.fov))
        .collect::<Result<Vec<_>>>()?;
    sort_nodes(&mut nodes);
    Ok(nodes)
}
