use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::triplet::ReasoningTriplet;
use super::{ConversationTurn, Role, CORRECTION_SEPARATOR, INSTRUCTION_PREFIX};
use crate::remote::{RemoteClient, RemoteConfig, RemoteError, RetryPolicy};

/// Appended as a user turn after a reply that does not follow the template.
pub const FORMAT_REMINDER: &str = "Your reply did not follow the required format. Answer with exactly three \
sections, each starting on its own line: \"Scene:\", \"Progress:\" and \"Plan:\".";

#[derive(Debug, Error)]
pub enum ReasonerError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("protocol: {0}")]
    Protocol(String),
}

/// Anything that can answer a conversation with assistant text.
pub trait ReasonerBackend {
    fn complete(&mut self, turns: &[ConversationTurn]) -> Result<String, ReasonerError>;
}

impl<B: ReasonerBackend + ?Sized> ReasonerBackend for Box<B> {
    fn complete(&mut self, turns: &[ConversationTurn]) -> Result<String, ReasonerError> {
        (**self).complete(turns)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrySettings {
    /// Re-queries after a malformed reply.
    pub format_retries: u32,
    pub transport: RetryPolicy,
}

impl Default for RetrySettings {
    fn default() -> Self {
        Self {
            format_retries: 2,
            transport: RetryPolicy {
                max_retries: 3,
                base: Duration::from_secs(1),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReasoningOutcome {
    pub triplet: ReasoningTriplet,
    pub format_retries: u32,
    pub transport_retries: u32,
}

#[derive(Debug, Error)]
pub enum ReasoningError {
    #[error("reasoner reply malformed after {attempts} attempts ({reason}); last reply: {raw:?}")]
    Malformed {
        raw: String,
        attempts: u32,
        reason: String,
    },
    #[error("reasoner unreachable after {retries} retries: {message}")]
    Transport { message: String, retries: u32 },
    #[error("reasoner protocol error: {0}")]
    Protocol(String),
    #[error("invalid conversation: {0}")]
    InvalidConversation(String),
}

/// Ask `backend` for a triplet, re-asking with a format reminder on malformed replies and
/// retrying transport failures with exponential backoff.
pub fn generate_reasoning<B: ReasonerBackend + ?Sized>(
    backend: &mut B,
    turns: &[ConversationTurn],
    settings: &RetrySettings,
) -> Result<ReasoningOutcome, ReasoningError> {
    match turns.first() {
        Some(t) if t.role == Role::User && t.content.starts_with(INSTRUCTION_PREFIX) => {}
        _ => {
            return Err(ReasoningError::InvalidConversation(
                "the conversation must open with the global instruction turn".into(),
            ))
        }
    }
    let mut convo = turns.to_vec();
    let mut transport_retries = 0;
    let mut format_retries = 0;
    loop {
        let attempt = settings.transport.run(
            || backend.complete(&convo),
            |e| matches!(e, ReasonerError::Transport(_)),
        );
        let (raw, used) = match attempt {
            Ok(v) => v,
            Err(ReasonerError::Transport(message)) => {
                return Err(ReasoningError::Transport {
                    message,
                    retries: transport_retries + settings.transport.max_retries,
                })
            }
            Err(ReasonerError::Protocol(m)) => return Err(ReasoningError::Protocol(m)),
        };
        transport_retries += used;
        if used > 0 {
            log::info!("reasoner answered after {used} transport retries");
        }
        match ReasoningTriplet::parse(&raw) {
            Ok(triplet) => {
                return Ok(ReasoningOutcome {
                    triplet,
                    format_retries,
                    transport_retries,
                })
            }
            Err(e) if format_retries < settings.format_retries => {
                log::debug!("malformed reasoner reply ({e}); asking again");
                format_retries += 1;
                convo.push(ConversationTurn::assistant(raw));
                convo.push(ConversationTurn::user(FORMAT_REMINDER, Vec::new()));
            }
            Err(e) => {
                return Err(ReasoningError::Malformed {
                    raw,
                    attempts: format_retries + 1,
                    reason: e.to_string(),
                })
            }
        }
    }
}

/// Deterministic reasoner that fills a template from the node turn.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockReasoner;

fn field<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.strip_prefix(prefix)).map(str::trim)
}

impl MockReasoner {
    pub fn reply(&self, turns: &[ConversationTurn]) -> String {
        let node = turns
            .iter()
            .rev()
            .find(|t| t.role == Role::User && t.content.starts_with("Key node:"));
        let Some(node) = node else {
            let instruction = turns
                .first()
                .and_then(|t| field(&t.content, INSTRUCTION_PREFIX))
                .unwrap_or("the instruction");
            return ReasoningTriplet::new(
                "I am at the start of the route.",
                "No part of the route is covered yet.",
                format!("Follow the instruction: {instruction}"),
            )
            .render();
        };
        let text = &node.content;
        let progress = field(text, "Navigation progress:").unwrap_or("0.0%");
        let transition = field(text, "Room transition:").and_then(|t| t.split_once(" -> "));
        // the last frame before any correction frames shows where the node happened
        let before = text.split(CORRECTION_SEPARATOR).next().unwrap_or_default();
        let n_before = before.matches("<frame:").count();
        let frame = node.attached_frames.get(n_before.saturating_sub(1));
        let room = transition
            .map(|(_, to)| to.to_string())
            .or_else(|| frame.and_then(|f| f.room.clone()))
            .unwrap_or_else(|| "hallway".to_string());
        let mut scene = format!("I am in the {room}.");
        if let Some(f) = frame.filter(|f| !f.visible_landmarks.is_empty()) {
            scene.push_str(&format!(" In view: {}.", f.visible_landmarks.join(", ")));
        }

        let (progress_text, plan) = if text.contains("stopping error") {
            let d = field(text, "Final distance to goal:").unwrap_or("unknown");
            (
                format!("I stopped {d} from the goal, outside the success radius, after covering {progress} of the route."),
                "Do not stop here; turn toward the goal and keep moving until it is close.".to_string(),
            )
        } else if text.contains("path deviation") {
            (
                format!("I drifted away from the route after covering {progress} of it; the later frames show the way back."),
                "Return to the reference path and head for the next waypoint.".to_string(),
            )
        } else if let Some((from, to)) = transition {
            (
                format!("I left the {from} and entered the {to}; {progress} of the route is covered."),
                "Continue with the next part of the instruction.".to_string(),
            )
        } else {
            (
                format!("I am back on the route after a correction; {progress} of it is covered."),
                "Resume following the instruction from here.".to_string(),
            )
        };
        ReasoningTriplet::new(scene, progress_text, plan).render()
    }
}

impl ReasonerBackend for MockReasoner {
    fn complete(&mut self, turns: &[ConversationTurn]) -> Result<String, ReasonerError> {
        Ok(self.reply(turns))
    }
}

#[derive(Serialize)]
struct ReasonRequest<'a> {
    messages: &'a [ConversationTurn],
}

#[derive(Deserialize)]
struct ReasonResponse {
    text: String,
}

/// Reasoner served over HTTP at `endpoint/reason`. Retries are left to [`generate_reasoning`].
#[derive(Debug, Clone)]
pub struct RemoteReasoner {
    client: RemoteClient,
}

impl RemoteReasoner {
    pub fn new(config: &RemoteConfig) -> Self {
        Self {
            client: RemoteClient::new(config),
        }
    }
}

impl ReasonerBackend for RemoteReasoner {
    fn complete(&mut self, turns: &[ConversationTurn]) -> Result<String, ReasonerError> {
        let resp: ReasonResponse = self
            .client
            .post("reason", &ReasonRequest { messages: turns })
            .map_err(|e| match e {
                RemoteError::Transport(m) => ReasonerError::Transport(m),
                RemoteError::Protocol(m) => ReasonerError::Protocol(m),
            })?;
        Ok(resp.text)
    }
}
