use serde::{Deserialize, Serialize};

use super::{KeyNode, NodeType};
use crate::error::{Error, Result};
use crate::kinematics::{steps_length, Pose, SegmentTag, StepAction, Trajectory};
use crate::orchestrator::{make_frame, FovConfig, ObservationFrame};
use crate::world::{Episode, SceneWorld};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContextConfig {
    /// How many steps before the node the context reaches back.
    pub window: usize,
    pub stride: usize,
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self {
            window: 16,
            stride: 2,
        }
    }
}

/// Traveled distance up to and including `step`, over the reference length.
pub fn compute_progress(traj: &Trajectory, step: usize, episode: &Episode) -> Result<f64> {
    if step >= traj.steps.len() {
        return Err(Error::domain(format!(
            "step {step} outside a trajectory of {} steps",
            traj.steps.len()
        )));
    }
    if !(episode.gt_geodesic_length > 0.0) {
        return Err(Error::domain("reference length must be positive"));
    }
    Ok(steps_length(&traj.steps[..=step]) / episode.gt_geodesic_length)
}

/// The observation after `step`. Frames are indexed like the rollout buffer: observation 0
/// is the start pose and observation `s + 1` follows step `s`.
pub fn frame_at_step(
    world: &SceneWorld,
    traj: &Trajectory,
    step: usize,
    fov: &FovConfig,
) -> ObservationFrame {
    let t_prev = traj.steps[..=step]
        .iter()
        .rposition(|s| s.action == StepAction::Reason)
        .unwrap_or(0);
    make_frame(world, traj.steps[step].pose_after, step + 1, t_prev, fov)
}

/// Every observation of an episode: the start pose, then the pose after each step.
pub fn observation_frames(
    world: &SceneWorld,
    traj: &Trajectory,
    start: Pose,
    fov: &FovConfig,
) -> Vec<ObservationFrame> {
    let mut out = Vec::with_capacity(traj.steps.len() + 1);
    out.push(make_frame(world, start, 0, 0, fov));
    out.extend((0..traj.steps.len()).map(|s| frame_at_step(world, traj, s, fov)));
    out
}

/// `hi, hi - stride, ...` down to `lo`, returned ascending.
fn strided(lo: usize, hi: usize, stride: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (lo..=hi).rev().step_by(stride).collect();
    out.reverse();
    out
}

/// Steps of the correcting run that follows the node's excursion, if any.
fn following_correction(traj: &Trajectory, step: usize) -> Option<(usize, usize)> {
    let steps = &traj.steps;
    let mut i = step + 1;
    while i < steps.len() && steps[i].segment_tag == SegmentTag::Deviated {
        i += 1;
    }
    if i >= steps.len() || steps[i].segment_tag != SegmentTag::Correcting {
        return None;
    }
    let start = i;
    while i + 1 < steps.len() && steps[i + 1].segment_tag == SegmentTag::Correcting {
        i += 1;
    }
    Some((start, i))
}

/// Fill in progress, the preceding context frames and, for deviations, the correction frames.
pub fn extract_node_context(
    world: &SceneWorld,
    traj: &Trajectory,
    episode: &Episode,
    mut node: KeyNode,
    config: &ContextConfig,
    fov: &FovConfig,
) -> Result<KeyNode> {
    if config.stride == 0 {
        return Err(Error::domain("context stride must be at least 1"));
    }
    node.progress = compute_progress(traj, node.step, episode)?;
    node.context_frames = strided(node.step.saturating_sub(config.window), node.step, config.stride)
        .into_iter()
        .map(|s| frame_at_step(world, traj, s, fov))
        .collect();
    if node.node_type == NodeType::PathDeviation {
        node.correction_frames = Some(match following_correction(traj, node.step) {
            Some((a, b)) => strided(a, b, config.stride)
                .into_iter()
                .map(|s| frame_at_step(world, traj, s, fov))
                .collect(),
            None => Vec::new(),
        });
    }
    Ok(node)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strided_counts_back_from_the_end() {
        assert_eq!(strided(0, 5, 2), vec![1, 3, 5]);
        assert_eq!(strided(0, 0, 2), vec![0]);
        assert_eq!(strided(10, 15, 2), vec![11, 13, 15]);
    }
}
