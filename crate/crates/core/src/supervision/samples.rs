use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::triplet::ReasoningTriplet;
use crate::data_engine::KeyNode;
use crate::error::{Error, Result};
use crate::kinematics::{ActionPrimitive, Mode, Trajectory};
use crate::orchestrator::{
    fuse_reasoning_context, parse_action_text, render_command, sample_indices, NO_REASONING,
};
use crate::world::Episode;

/// One supervised target: either reasoning text or an action command.
///
/// `frame_refs` index the episode's observations: 0 is the start pose and `s + 1` the pose
/// after trajectory step `s`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSample {
    pub episode_id: String,
    pub t: usize,
    pub mode: Mode,
    pub instruction: String,
    pub fused_context: String,
    pub frame_refs: Vec<usize>,
    pub target: String,
}

impl TrainingSample {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| {
            Err(Error::validation(format!(
                "sample {}@{}: {m}",
                self.episode_id, self.t
            )))
        };
        if self.frame_refs.is_empty() {
            return bad("no frame references".into());
        }
        if self.frame_refs.windows(2).any(|w| w[0] >= w[1]) {
            return bad("frame references are not strictly increasing".into());
        }
        match self.mode {
            Mode::Reason => match ReasoningTriplet::parse(&self.target) {
                Ok(_) => Ok(()),
                Err(e) => bad(format!("reasoning target: {e}")),
            },
            Mode::Act => match parse_action_text(&self.target) {
                Ok(_) => Ok(()),
                Err(e) => bad(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActEmission {
    /// One sample per aggregated run of identical primitives.
    #[default]
    RunStart,
    /// One sample at every primitive step, each aggregating the run from that step on.
    EveryStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleConfig {
    pub frames_k: usize,
    pub act_emission: ActEmission,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            frames_k: 8,
            act_emission: ActEmission::RunStart,
        }
    }
}

/// Interleave `[ACT]` samples for the executed primitives with `[REASON]` samples at key nodes.
///
/// At a node step the action sample comes first, then one reasoning sample per node. Action
/// runs never extend past a node step.
pub fn emit_training_samples(
    episode: &Episode,
    traj: &Trajectory,
    nodes: &[KeyNode],
    triplets: &[ReasoningTriplet],
    config: &SampleConfig,
) -> Result<Vec<TrainingSample>> {
    if nodes.len() != triplets.len() {
        return Err(Error::Emission(format!(
            "episode {}: {} nodes but {} triplets",
            episode.id,
            nodes.len(),
            triplets.len()
        )));
    }
    let n = traj.steps.len();
    let mut at_step: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, node) in nodes.iter().enumerate() {
        if node.step >= n {
            return Err(Error::Emission(format!(
                "episode {}: node at step {} is outside the trajectory",
                episode.id, node.step
            )));
        }
        at_step.entry(node.step).or_default().push(i);
    }
    let prims: Vec<Option<ActionPrimitive>> = traj.steps.iter().map(|s| s.action.primitive()).collect();
    let run_len = |t: usize, a: ActionPrimitive| {
        let mut j = t + 1;
        while j < n && prims[j] == Some(a) && !at_step.contains_key(&(j - 1)) {
            j += 1;
        }
        j - t
    };

    let mut out = Vec::new();
    let mut reasoning = NO_REASONING.to_string();
    let mut t_prev = 0;
    let mut open_run: Option<ActionPrimitive> = None;
    let sample = |t: usize, mode, fused: String, frames: usize, target: String| -> Result<TrainingSample> {
        Ok(TrainingSample {
            episode_id: episode.id.clone(),
            t,
            mode,
            instruction: episode.instruction.clone(),
            fused_context: fused,
            frame_refs: sample_indices(frames, config.frames_k)?,
            target,
        })
    };
    for t in 0..n {
        match prims[t] {
            Some(a) => {
                if open_run != Some(a) || config.act_emission == ActEmission::EveryStep {
                    let fused = fuse_reasoning_context(&reasoning, t, t_prev)?;
                    out.push(sample(
                        t,
                        Mode::Act,
                        fused,
                        t + 1,
                        render_command(a, run_len(t, a)),
                    )?);
                }
                open_run = Some(a);
            }
            None => open_run = None,
        }
        if let Some(idx) = at_step.get(&t) {
            for &i in idx {
                let fused = fuse_reasoning_context(&reasoning, t, t_prev)?;
                let target = triplets[i].render();
                out.push(sample(t, Mode::Reason, fused, t + 2, target.clone())?);
                reasoning = target;
                t_prev = t;
            }
            open_run = None;
        }
    }
    Ok(out)
}

pub fn samples_to_jsonl(samples: &[TrainingSample]) -> String {
    samples
        .iter()
        .map(|s| serde_json::to_string(s).expect("sample serializes") + "\n")
        .collect()
}

/// Parse one sample line against the schema and check its target re-parses.
pub fn sample_from_json_line(line: &str) -> Result<TrainingSample> {
    let sample: TrainingSample = crate::world::parse_json(line)?;
    sample.validate()?;
    Ok(sample)
}
