//! The unified reason/act rollout loop.
//!
//! Each iteration fuses the last reasoning text with the number of steps since it was
//! produced, samples `k` frames from the observation buffer, queries the policy backend
//! and dispatches on the mode its logits select. A `[REASON]` iteration replaces the
//! reasoning context and moves nothing; an `[ACT]` iteration parses the text into
//! primitives and executes them. Either way `t` advances by one and a new frame is
//! appended, so the buffer always holds `t + 1` frames.

mod backends;
mod parse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backends::{RandomBackend, RandomBackendConfig, ReplayBackend, ScriptedExpert, ScriptedExpertConfig};
pub use parse::{
    parse_action_text, render_actions, render_command, ActionParseError, MAX_PRIMITIVES_PER_COMMAND,
};

use crate::error::{Error, Result};
use crate::kinematics::{
    heading_delta, ActionPrimitive, Mode, Pose, SegmentTag, StepAction, TerminatedBy, Trajectory,
    TrajectoryRecorder,
};
use crate::world::{Episode, SceneWorld};

/// Initial reasoning text before any `[REASON]` step.
pub const NO_REASONING: &str = "None";

/// Symbolic stand-in for one camera frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationFrame {
    pub t: usize,
    pub pose: Pose,
    pub room: Option<String>,
    pub visible_landmarks: Vec<String>,
    pub steps_since_reasoning: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FovConfig {
    pub radius: f64,
    pub half_angle_deg: f64,
}

impl Default for FovConfig {
    fn default() -> Self {
        Self {
            radius: 3.0,
            half_angle_deg: 60.0,
        }
    }
}

pub fn make_frame(
    world: &SceneWorld,
    pose: Pose,
    t: usize,
    t_prev: usize,
    fov: &FovConfig,
) -> ObservationFrame {
    let here = pose.position();
    let mut seen: Vec<(f64, &str)> = world
        .landmarks()
        .iter()
        .filter_map(|lm| {
            let d = here.distance(lm.position);
            if d > fov.radius {
                return None;
            }
            let off = heading_delta(pose.heading, here.bearing_to(lm.position)).abs();
            (d == 0.0 || off <= fov.half_angle_deg).then_some((d, lm.id.as_str()))
        })
        .collect();
    seen.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    ObservationFrame {
        t,
        pose,
        room: world.room_at(here).ok().flatten().map(str::to_owned),
        visible_landmarks: seen.into_iter().map(|(_, id)| id.to_string()).collect(),
        steps_since_reasoning: t.saturating_sub(t_prev),
    }
}

/// Append the step distance marker to the reasoning text.
pub fn fuse_reasoning_context(reasoning: &str, t: usize, t_prev: usize) -> Result<String> {
    if t_prev > t {
        return Err(Error::domain(format!("t_prev ({t_prev}) exceeds t ({t})")));
    }
    Ok(format!("{reasoning} [steps_since_reasoning={}]", t - t_prev))
}

/// Indices `round(i (n-1) / (k-1))` for `i in 0..k`, or all indices when `n <= k`.
pub fn sample_indices(n: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::domain("frame sample size k must be at least 1"));
    }
    if n == 0 {
        return Err(Error::domain("cannot sample from an empty frame buffer"));
    }
    if n <= k {
        return Ok((0..n).collect());
    }
    if k == 1 {
        return Ok(vec![n - 1]);
    }
    Ok((0..k)
        .map(|i| ((i * (n - 1)) as f64 / (k - 1) as f64).round() as usize)
        .collect())
}

pub fn sample_frames<T: Clone>(buffer: &[T], k: usize) -> Result<Vec<T>> {
    Ok(sample_indices(buffer.len(), k)?
        .into_iter()
        .map(|i| buffer[i].clone())
        .collect())
}

/// `[REASON]` iff the reason logit strictly exceeds the act logit.
pub fn decide_mode(d_reason: f64, d_act: f64) -> Result<Mode> {
    if !d_reason.is_finite() || !d_act.is_finite() {
        return Err(Error::domain(format!(
            "non-finite logit (reason {d_reason}, act {d_act})"
        )));
    }
    Ok(if d_reason > d_act { Mode::Reason } else { Mode::Act })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub d_reason: f64,
    pub d_act: f64,
    pub text: String,
}

impl PolicyDecision {
    pub fn act(text: impl Into<String>) -> Self {
        Self {
            d_reason: 0.0,
            d_act: 1.0,
            text: text.into(),
        }
    }

    pub fn reason(text: impl Into<String>) -> Self {
        Self {
            d_reason: 1.0,
            d_act: 0.0,
            text: text.into(),
        }
    }
}

/// Everything a policy sees at one iteration.
#[derive(Debug, Clone, Serialize)]
pub struct PolicyQuery<'a> {
    pub instruction: &'a str,
    pub fused_context: &'a str,
    pub frames: &'a [ObservationFrame],
    pub session_id: &'a str,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("backend exhausted")]
    Exhausted,
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

/// A policy: given instruction, fused context and sampled frames, return logits and text.
pub trait PolicyBackend {
    fn decide(&mut self, query: &PolicyQuery<'_>) -> std::result::Result<PolicyDecision, BackendError>;

    /// Whether one instance may serve several rollouts at once.
    fn shareable(&self) -> bool {
        false
    }
}

impl<B: PolicyBackend + ?Sized> PolicyBackend for Box<B> {
    fn decide(&mut self, query: &PolicyQuery<'_>) -> std::result::Result<PolicyDecision, BackendError> {
        (**self).decide(query)
    }

    fn shareable(&self) -> bool {
        (**self).shareable()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutConfig {
    /// Maximum loop iterations.
    pub step_budget: usize,
    pub frames_k: usize,
    pub fov: FovConfig,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            step_budget: 500,
            frames_k: 8,
            fov: FovConfig::default(),
        }
    }
}

/// Loop state carried between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutState {
    pub t: usize,
    pub last_reasoning: String,
    pub t_prev: usize,
    pub buffer: Vec<ObservationFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningEntry {
    pub episode_id: String,
    pub t: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub t: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutOutcome {
    pub trajectory: Trajectory,
    pub reasoning_log: Vec<ReasoningEntry>,
    pub parse_failures: Vec<ParseFailure>,
    /// Set when the backend failed and the trajectory is partial.
    pub error: Option<String>,
}

/// Hook invoked after every loop iteration, for instrumentation and invariant checks.
pub trait RolloutObserver {
    fn after_iteration(&mut self, state: &RolloutState, mode: Mode, pose_before: Pose, pose_after: Pose);
}

impl RolloutObserver for () {
    fn after_iteration(&mut self, _: &RolloutState, _: Mode, _: Pose, _: Pose) {}
}

pub fn run_rollout<B: PolicyBackend + ?Sized>(
    world: &SceneWorld,
    episode: &Episode,
    backend: &mut B,
    config: &RolloutConfig,
) -> Result<RolloutOutcome> {
    run_rollout_observed(world, episode, backend, config, &mut ())
}

pub fn run_rollout_observed<B: PolicyBackend + ?Sized, O: RolloutObserver + ?Sized>(
    world: &SceneWorld,
    episode: &Episode,
    backend: &mut B,
    config: &RolloutConfig,
    observer: &mut O,
) -> Result<RolloutOutcome> {
    if config.step_budget == 0 {
        return Err(Error::domain("step budget must be positive"));
    }
    episode.validate(world)?;
    let mut rec = TrajectoryRecorder::new(world, episode.id.clone(), episode.start);
    let mut state = RolloutState {
        t: 0,
        last_reasoning: NO_REASONING.to_string(),
        t_prev: 0,
        buffer: vec![make_frame(world, episode.start, 0, 0, &config.fov)],
    };
    let mut log = Vec::new();
    let mut failures = Vec::new();
    let mut terminated = TerminatedBy::StepBudget;
    let mut error = None;

    while state.t < config.step_budget {
        let fused = fuse_reasoning_context(&state.last_reasoning, state.t, state.t_prev)?;
        let frames = sample_frames(&state.buffer, config.frames_k)?;
        let query = PolicyQuery {
            instruction: &episode.instruction,
            fused_context: &fused,
            frames: &frames,
            session_id: &episode.id,
        };
        let decision = match backend.decide(&query) {
            Ok(d) => d,
            Err(e) => {
                error = Some(e.to_string());
                terminated = TerminatedBy::Aborted;
                break;
            }
        };
        let mode = match decide_mode(decision.d_reason, decision.d_act) {
            Ok(m) if !decision.text.trim().is_empty() => m,
            Ok(_) => {
                error = Some("backend returned empty text".into());
                terminated = TerminatedBy::Aborted;
                break;
            }
            Err(e) => {
                error = Some(e.to_string());
                terminated = TerminatedBy::Aborted;
                break;
            }
        };
        let pose_before = rec.pose();
        let mut stopped = false;
        match mode {
            Mode::Reason => {
                state.last_reasoning = decision.text.clone();
                state.t_prev = state.t;
                rec.pause(StepAction::Reason, Mode::Reason);
                log.push(ReasoningEntry {
                    episode_id: episode.id.clone(),
                    t: state.t,
                    text: decision.text,
                });
            }
            Mode::Act => match parse_action_text(&decision.text) {
                Ok(actions) => {
                    for a in actions {
                        if a == ActionPrimitive::Stop {
                            rec.pause(StepAction::Stop, Mode::Act);
                            stopped = true;
                            break;
                        }
                        rec.act(a, Mode::Act, SegmentTag::Normal);
                    }
                }
                Err(e) => {
                    log::debug!("episode {} t={}: {e}", episode.id, state.t);
                    rec.pause(StepAction::Noop, Mode::Act);
                    failures.push(ParseFailure {
                        t: state.t,
                        text: e.raw,
                    });
                }
            },
        }
        state.t += 1;
        state
            .buffer
            .push(make_frame(world, rec.pose(), state.t, state.t_prev, &config.fov));
        observer.after_iteration(&state, mode, pose_before, rec.pose());
        if stopped {
            terminated = TerminatedBy::Stop;
            break;
        }
    }
    Ok(RolloutOutcome {
        trajectory: rec.finish(terminated),
        reasoning_log: log,
        parse_failures: failures,
        error,
    })
}

pub fn reasoning_log_to_jsonl(entries: &[ReasoningEntry]) -> String {
    entries
        .iter()
        .map(|e| serde_json::to_string(e).expect("entry serializes") + "\n")
        .collect()
}

pub fn reasoning_log_from_jsonl(text: &str) -> Result<Vec<ReasoningEntry>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            crate::world::parse_json(l).map_err(|e| match e {
                Error::Parse { field, message } => Error::parse(format!("line {}: {field}", i + 1), message),
                other => other,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
