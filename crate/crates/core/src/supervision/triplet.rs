use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const HEADINGS: [&str; 3] = ["Scene:", "Progress:", "Plan:"];

/// Structured reasoning: what the agent sees, how far it got, what it does next.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningTriplet {
    pub scene_description: String,
    pub progress_assessment: String,
    pub next_plan: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TripletParseError {
    #[error("missing section(s): {}", .0.join(", "))]
    Missing(Vec<&'static str>),
    #[error("section {0} is empty")]
    Empty(&'static str),
    #[error("section {0} is out of order or repeated")]
    Order(&'static str),
}

fn heading_at(line: &str) -> Option<(usize, &str)> {
    let t = line.trim_start();
    HEADINGS
        .iter()
        .position(|h| t.len() >= h.len() && t[..h.len()].eq_ignore_ascii_case(h))
        .map(|i| (i, &t[HEADINGS[i].len()..]))
}

/// Collapse whitespace so a field renders on one line and never starts a new section.
fn flatten(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl ReasoningTriplet {
    pub fn new(scene: impl Into<String>, progress: impl Into<String>, plan: impl Into<String>) -> Self {
        Self {
            scene_description: scene.into(),
            progress_assessment: progress.into(),
            next_plan: plan.into(),
        }
    }

    pub fn is_valid(&self) -> bool {
        [
            &self.scene_description,
            &self.progress_assessment,
            &self.next_plan,
        ]
        .iter()
        .all(|f| !f.trim().is_empty())
    }

    pub fn render(&self) -> String {
        format!(
            "Scene: {}\nProgress: {}\nPlan: {}",
            flatten(&self.scene_description),
            flatten(&self.progress_assessment),
            flatten(&self.next_plan)
        )
    }

    /// Parse the three-heading template. Text before the first heading is ignored;
    /// a section runs until the next heading.
    pub fn parse(text: &str) -> Result<Self, TripletParseError> {
        let mut sections: [Option<String>; 3] = [None, None, None];
        let mut current: Option<usize> = None;
        for line in text.lines() {
            if let Some((i, rest)) = heading_at(line) {
                if sections[i].is_some() || current.is_some_and(|c| c >= i) {
                    return Err(TripletParseError::Order(HEADINGS[i]));
                }
                sections[i] = Some(rest.trim().to_string());
                current = Some(i);
            } else if let Some(c) = current {
                let s = sections[c].as_mut().expect("current section exists");
                if !s.is_empty() {
                    s.push(' ');
                }
                s.push_str(line.trim());
            }
        }
        let missing: Vec<&'static str> = (0..3)
            .filter(|&i| sections[i].is_none())
            .map(|i| HEADINGS[i])
            .collect();
        if !missing.is_empty() {
            return Err(TripletParseError::Missing(missing));
        }
        let [scene, progress, plan] = sections.map(|s| flatten(&s.unwrap_or_default()));
        for (i, f) in [&scene, &progress, &plan].into_iter().enumerate() {
            if f.is_empty() {
                return Err(TripletParseError::Empty(HEADINGS[i]));
            }
        }
        Ok(Self::new(scene, progress, plan))
    }
}

impl fmt::Display for ReasoningTriplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
