//! Trajectory collection and offline detection of the steps that deserve reasoning
//! supervision: room-level subtask completion, path deviation and stopping errors.

mod collect;
mod context;
mod detect;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use collect::{
    collect_dagger_trajectory, collect_gt_trajectory, Collector, ErrorKind, NoisyExpertConfig,
    WAYPOINT_TOLERANCE,
};
pub use context::{compute_progress, extract_node_context, frame_at_step, observation_frames, ContextConfig};
pub use detect::{
    detect_all, detect_deviation_nodes, detect_stopping_error, detect_subtask_nodes, deviation_series,
    DetectionConfig,
};

use crate::error::{Error, Result};
pub use crate::metrics::GoalDistance;
use crate::orchestrator::ObservationFrame;

pub const NODES_SCHEMA: &str = "vlnkit.nodes/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeType {
    SubtaskCompletion,
    PathDeviation,
    StoppingError,
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeType::SubtaskCompletion => "subtask completion",
            NodeType::PathDeviation => "path deviation",
            NodeType::StoppingError => "stopping error",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeCause {
    RoomChange,
    CorrectionComplete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomTransition {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyNode {
    pub episode_id: String,
    pub node_type: NodeType,
    pub cause: Option<NodeCause>,
    pub step: usize,
    pub room_transition: Option<RoomTransition>,
    pub progress: f64,
    pub context_frames: Vec<ObservationFrame>,
    /// Present exactly for path-deviation nodes.
    pub correction_frames: Option<Vec<ObservationFrame>>,
    /// Navigation error at the terminal step; stopping-error nodes only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_distance: Option<GoalDistance>,
}

impl KeyNode {
    pub fn new(episode_id: impl Into<String>, node_type: NodeType, step: usize) -> Self {
        Self {
            episode_id: episode_id.into(),
            node_type,
            cause: None,
            step,
            room_transition: None,
            progress: 0.0,
            context_frames: Vec::new(),
            correction_frames: (node_type == NodeType::PathDeviation).then(Vec::new),
            final_distance: None,
        }
    }

    pub fn is_populated(&self) -> bool {
        !self.context_frames.is_empty()
    }

    pub fn validate(&self, steps: usize) -> Result<()> {
        let fail = |m: &str| Err(Error::validation(format!("node at step {}: {m}", self.step)));
        if self.step >= steps {
            return fail("step outside the trajectory");
        }
        if self.room_transition.is_some() != (self.cause == Some(NodeCause::RoomChange)) {
            return fail("room_transition must be present iff the cause is a room change");
        }
        if self.correction_frames.is_some() != (self.node_type == NodeType::PathDeviation) {
            return fail("correction_frames must be present iff the node is a path deviation");
        }
        if !(self.progress.is_finite() && self.progress >= 0.0) {
            return fail("progress must be a non-negative number");
        }
        Ok(())
    }
}

/// Stable order for nodes of one trajectory: by step, then by type.
pub fn sort_nodes(nodes: &mut [KeyNode]) {
    nodes.sort_by_key(|n| (n.step, n.node_type as u8, n.cause.map(|c| c as u8)));
}

#[derive(Serialize, Deserialize)]
struct NodeLine {
    schema: String,
    #[serde(flatten)]
    node: KeyNode,
}

pub fn nodes_to_jsonl(nodes: &[KeyNode]) -> String {
    nodes
        .iter()
        .map(|n| {
            let line = NodeLine {
                schema: NODES_SCHEMA.to_string(),
                node: n.clone(),
            };
            serde_json::to_string(&line).expect("node serializes") + "\n"
        })
        .collect()
}

pub fn nodes_from_jsonl(text: &str) -> Result<Vec<KeyNode>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: NodeLine = crate::world::parse_json(line).map_err(|e| match e {
            Error::Parse { field, message } => Error::parse(format!("line {}: {field}", i + 1), message),
            other => other,
        })?;
        if rec.schema != NODES_SCHEMA {
            return Err(Error::parse(
                format!("line {}: schema", i + 1),
                format!("expected {NODES_SCHEMA:?}, found {:?}", rec.schema),
            ));
        }
        out.push(rec.node);
    }
    Ok(out)
}
