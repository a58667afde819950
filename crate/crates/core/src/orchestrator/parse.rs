//! The action-command language: `move forward D cm|m`, `turn left|right A degrees`, `stop`.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::kinematics::{ActionPrimitive, FORWARD_STEP_M, TURN_STEP_DEG};

/// Upper bound on primitives produced by a single command.
pub const MAX_PRIMITIVES_PER_COMMAND: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unparseable action text: {raw:?}")]
pub struct ActionParseError {
    pub raw: String,
}

fn forward_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^move\s+forward\s+(\d+(?:\.\d+)?)\s*(cm|m)$").expect("valid regex"))
}

fn turn_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^turn\s+(left|right)\s+(\d+(?:\.\d+)?)\s*degrees?$").expect("valid regex")
    })
}

/// `round(amount / unit)` with halves away from zero, at least one.
fn primitive_count(amount: f64, unit: f64) -> Option<usize> {
    let n = (amount / unit).round().max(1.0);
    (n.is_finite() && n <= MAX_PRIMITIVES_PER_COMMAND as f64).then_some(n as usize)
}

/// Parse one command into its primitive sequence.
pub fn parse_action_text(text: &str) -> Result<Vec<ActionPrimitive>, ActionParseError> {
    let err = || ActionParseError {
        raw: text.to_string(),
    };
    let s = text.trim();
    if s.eq_ignore_ascii_case("stop") {
        return Ok(vec![ActionPrimitive::Stop]);
    }
    if let Some(c) = forward_re().captures(s) {
        let value: f64 = c[1].parse().map_err(|_| err())?;
        let cm = if c[2].eq_ignore_ascii_case("m") {
            value * 100.0
        } else {
            value
        };
        let n = primitive_count(cm, FORWARD_STEP_M * 100.0).ok_or_else(err)?;
        return Ok(vec![ActionPrimitive::Forward; n]);
    }
    if let Some(c) = turn_re().captures(s) {
        let deg: f64 = c[2].parse().map_err(|_| err())?;
        let n = primitive_count(deg, TURN_STEP_DEG).ok_or_else(err)?;
        let dir = if c[1].eq_ignore_ascii_case("left") {
            ActionPrimitive::TurnLeft
        } else {
            ActionPrimitive::TurnRight
        };
        return Ok(vec![dir; n]);
    }
    Err(err())
}

/// Canonical command for `count` repetitions of one primitive.
pub fn render_command(action: ActionPrimitive, count: usize) -> String {
    let count = count.max(1);
    match action {
        ActionPrimitive::Forward => format!("move forward {} cm", count * 25),
        ActionPrimitive::TurnLeft => format!("turn left {} degrees", count * 15),
        ActionPrimitive::TurnRight => format!("turn right {} degrees", count * 15),
        ActionPrimitive::Stop => "stop".to_string(),
    }
}

/// Render a homogeneous primitive run; `None` for empty or mixed runs.
pub fn render_actions(actions: &[ActionPrimitive]) -> Option<String> {
    let first = *actions.first()?;
    actions
        .iter()
        .all(|&a| a == first)
        .then(|| render_command(first, actions.len()))
}
