//! Reasoning supervision: multi-turn conversations about each key node, a pluggable
//! reasoner that answers them with scene/progress/plan triplets, and the emission of
//! `[REASON]`/`[ACT]` training samples.

mod reasoner;
mod samples;
mod triplet;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use reasoner::{
    generate_reasoning, MockReasoner, ReasonerBackend, ReasonerError, ReasoningError, ReasoningOutcome,
    RemoteReasoner, RetrySettings, FORMAT_REMINDER,
};
pub use samples::{
    emit_training_samples, sample_from_json_line, samples_to_jsonl, ActEmission, SampleConfig, TrainingSample,
};
pub use triplet::{ReasoningTriplet, TripletParseError};

use crate::data_engine::{observation_frames, KeyNode, NodeType};
use crate::error::{Error, Result};
use crate::kinematics::Trajectory;
use crate::orchestrator::{sample_frames, FovConfig, ObservationFrame};
use crate::world::{Episode, SceneWorld};

/// Frame cap for the whole-episode turn.
pub const GLOBAL_FRAMES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationTurn {
    pub role: Role,
    pub content: String,
    #[serde(default)]
    pub attached_frames: Vec<ObservationFrame>,
}

impl ConversationTurn {
    pub fn user(content: impl Into<String>, frames: Vec<ObservationFrame>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
            attached_frames: frames,
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
            attached_frames: Vec::new(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
            attached_frames: Vec::new(),
        }
    }
}

fn frame_tags(frames: &[ObservationFrame]) -> String {
    frames
        .iter()
        .map(|f| format!("<frame:{}>", f.t))
        .collect::<Vec<_>>()
        .join(" ")
}

pub const INSTRUCTION_PREFIX: &str = "Instruction: ";

/// The opening turn: instruction plus the whole episode, uniformly downsampled.
pub fn build_global_turn(
    world: &SceneWorld,
    episode: &Episode,
    traj: &Trajectory,
    fov: &FovConfig,
    max_frames: usize,
) -> Result<ConversationTurn> {
    if episode.instruction.trim().is_empty() {
        return Err(Error::validation(format!(
            "episode {} has an empty instruction",
            episode.id
        )));
    }
    if traj.steps.is_empty() {
        return Err(Error::validation(format!(
            "trajectory {} is empty",
            traj.episode_id
        )));
    }
    let all = observation_frames(world, traj, episode.start, fov);
    let frames = sample_frames(&all, max_frames)?;
    let content = format!(
        "{INSTRUCTION_PREFIX}{}\nThe episode has {} observations; {} are shown: {}",
        episode.instruction.trim(),
        all.len(),
        frames.len(),
        frame_tags(&frames)
    );
    Ok(ConversationTurn::user(content, frames))
}

pub const CORRECTION_SEPARATOR: &str = "--- subsequent correction ---";

/// A follow-up turn describing one key node.
pub fn build_node_turn(node: &KeyNode) -> Result<ConversationTurn> {
    if !node.is_populated() {
        return Err(Error::domain(format!(
            "node at step {} has no context frames; extract its context first",
            node.step
        )));
    }
    let mut s = String::new();
    let _ = write!(s, "Key node: {} at step {}", node.node_type, node.step);
    if let Some(cause) = node.cause {
        let cause = match cause {
            crate::data_engine::NodeCause::RoomChange => "room change",
            crate::data_engine::NodeCause::CorrectionComplete => "correction complete",
        };
        let _ = write!(s, " ({cause})");
    }
    s.push_str(".\n");
    if let Some(tr) = &node.room_transition {
        let _ = writeln!(s, "Room transition: {} -> {}", tr.from, tr.to);
    }
    let _ = writeln!(s, "Navigation progress: {:.1}%", node.progress * 100.0);
    if let Some(d) = node.final_distance {
        let _ = writeln!(s, "Final distance to goal: {d}");
    }
    let _ = write!(s, "Frames before the node: {}", frame_tags(&node.context_frames));
    let mut frames = node.context_frames.clone();
    if node.node_type == NodeType::PathDeviation {
        let correction = node.correction_frames.as_deref().unwrap_or_default();
        let _ = write!(
            s,
            "\n{CORRECTION_SEPARATOR}\nCorrection frames: {}",
            frame_tags(correction)
        );
        frames.extend_from_slice(correction);
    }
    s.push_str("\nDescribe the scene, assess progress and plan the next step.");
    Ok(ConversationTurn::user(s, frames))
}

/// Global turn followed by the node turn, ready for a reasoner.
pub fn node_conversation(global: &ConversationTurn, node: &KeyNode) -> Result<Vec<ConversationTurn>> {
    Ok(vec![global.clone(), build_node_turn(node)?])
}
