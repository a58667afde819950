//! Navigation metrics: NE, SR, OS, SPL and nDTW, per episode and aggregated.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{resample_polyline, Point};
use crate::kinematics::{path_length, Trajectory};
use crate::world::{Episode, SceneWorld};

/// Success radius in meters.
pub const SUCCESS_RADIUS: f64 = 3.0;
/// Distance scale of nDTW, meters.
pub const NDTW_DISTANCE: f64 = 3.0;
/// Spacing at which the reference path is resampled for nDTW.
pub const NDTW_SPACING: f64 = 0.25;

/// Geodesic distance to the goal, or the fact that there is no path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalDistance {
    Meters(f64),
    Unreachable,
}

impl GoalDistance {
    pub fn meters(self) -> Option<f64> {
        match self {
            GoalDistance::Meters(m) => Some(m),
            GoalDistance::Unreachable => None,
        }
    }
}

impl std::fmt::Display for GoalDistance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GoalDistance::Meters(m) => write!(f, "{m:.2} m"),
            GoalDistance::Unreachable => f.write_str("unreachable"),
        }
    }
}

/// Geodesic distance from the final pose to the goal.
pub fn navigation_error(traj: &Trajectory, episode: &Episode, world: &SceneWorld) -> Result<GoalDistance> {
    let end = traj.final_pose(episode.start).position();
    Ok(match world.geodesic_distance(end, episode.goal)? {
        Some(m) => GoalDistance::Meters(m),
        None => GoalDistance::Unreachable,
    })
}

pub fn success(ne: f64) -> bool {
    ne <= SUCCESS_RADIUS
}

/// Whether any observed position came within the success radius of the goal.
pub fn oracle_success(traj: &Trajectory, episode: &Episode, world: &SceneWorld) -> Result<bool> {
    if traj.steps.is_empty() {
        return Err(Error::domain(format!("trajectory {} is empty", traj.episode_id)));
    }
    let field = world.goal_field(episode.goal)?;
    Ok(traj
        .observation_poses()
        .into_iter()
        .filter_map(|p| field.distance_from(world, p.position()))
        .any(success))
}

/// Success weighted by `reference / max(executed, reference)`.
pub fn spl(success: bool, reference: f64, executed: f64) -> Result<f64> {
    if !(reference > 0.0) {
        return Err(Error::domain(format!(
            "reference length {reference} must be positive"
        )));
    }
    if !(executed >= 0.0) {
        return Err(Error::domain(format!(
            "path length {executed} must be non-negative"
        )));
    }
    Ok(if success {
        reference / executed.max(reference)
    } else {
        0.0
    })
}

/// Dynamic time warping cost under Euclidean point distance.
pub fn dtw(a: &[Point], b: &[Point]) -> f64 {
    let mut prev = vec![f64::INFINITY; b.len() + 1];
    let mut cur = vec![f64::INFINITY; b.len() + 1];
    prev[0] = 0.0;
    for &p in a {
        cur[0] = f64::INFINITY;
        for (j, &q) in b.iter().enumerate() {
            let best = prev[j].min(prev[j + 1]).min(cur[j]);
            cur[j + 1] = p.distance(q) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `exp(-DTW(pred, reference) / (|reference| * 3 m))` with `|reference|` counted in points.
pub fn ndtw(pred: &[Point], reference: &[Point]) -> Result<f64> {
    if pred.is_empty() || reference.is_empty() {
        return Err(Error::domain("nDTW needs two non-empty paths"));
    }
    Ok((-dtw(pred, reference) / (reference.len() as f64 * NDTW_DISTANCE)).exp())
}

/// Visited positions with consecutive repeats (turns, collisions, stops) removed.
pub fn visited_positions(traj: &Trajectory, episode: &Episode) -> Vec<Point> {
    let mut out = vec![episode.start.position()];
    for s in &traj.steps {
        let p = s.pose_after.position();
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub episode_id: String,
    /// Navigation error in meters; the grid diameter when the goal is unreachable.
    pub ne: f64,
    pub goal_reachable: bool,
    pub success: bool,
    pub oracle_success: bool,
    pub spl: f64,
    pub ndtw: f64,
    pub path_length: f64,
}

pub fn evaluate_episode(traj: &Trajectory, episode: &Episode, world: &SceneWorld) -> Result<EpisodeReport> {
    let distance = navigation_error(traj, episode, world)?;
    let ne = distance.meters().unwrap_or_else(|| world.diameter());
    let ok = distance.meters().is_some_and(success);
    let walked = path_length(traj);
    let reference = resample_polyline(&episode.gt_waypoints, NDTW_SPACING);
    Ok(EpisodeReport {
        episode_id: episode.id.clone(),
        ne,
        goal_reachable: distance.meters().is_some(),
        success: ok,
        oracle_success: ok || oracle_success(traj, episode, world)?,
        spl: spl(ok, episode.gt_geodesic_length, walked)?,
        ndtw: ndtw(&visited_positions(traj, episode), &reference)?,
        path_length: walked,
    })
}

/// Means over episodes; SR, OS and SPL in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub episodes: usize,
    #[serde(rename = "NE")]
    pub ne: f64,
    #[serde(rename = "OS")]
    pub os: f64,
    #[serde(rename = "SR")]
    pub sr: f64,
    #[serde(rename = "SPL")]
    pub spl: f64,
    #[serde(rename = "nDTW")]
    pub ndtw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub aggregate: Aggregate,
    pub episodes: Vec<EpisodeReport>,
}

pub fn aggregate(reports: &[EpisodeReport]) -> Result<Aggregate> {
    if reports.is_empty() {
        return Err(Error::domain("nothing to aggregate"));
    }
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&EpisodeReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let pct = |b: bool| if b { 100.0 } else { 0.0 };
    Ok(Aggregate {
        episodes: reports.len(),
        ne: mean(&|r| r.ne),
        os: mean(&|r| pct(r.oracle_success)),
        sr: mean(&|r| pct(r.success)),
        spl: mean(&|r| 100.0 * r.spl),
        ndtw: mean(&|r| r.ndtw),
    })
}

/// Score one trajectory per episode, matched by id, in episode order.
pub fn evaluate(trajs: &[Trajectory], episodes: &[Episode], world: &SceneWorld) -> Result<Report> {
    if episodes.is_empty() {
        return Err(Error::domain("no episodes to evaluate"));
    }
    let mut by_id: HashMap<&str, &Trajectory> = HashMap::new();
    for t in trajs {
        if by_id.insert(t.episode_id.as_str(), t).is_some() {
            return Err(Error::validation(format!(
                "duplicate trajectory for episode {}",
                t.episode_id
            )));
        }
    }
    if trajs.len() != episodes.len() {
        return Err(Error::validation(format!(
            "{} trajectories for {} episodes",
            trajs.len(),
            episodes.len()
        )));
    }
    let reports = episodes
        .iter()
        .map(|ep| {
            let traj = by_id
                .get(ep.id.as_str())
                .ok_or_else(|| Error::validation(format!("no trajectory for episode {}", ep.id)))?;
            evaluate_episode(traj, ep, world)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Report {
        aggregate: aggregate(&reports)?,
        episodes: reports,
    })
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:>8} {:>4} {:>4} {:>6} {:>6}",
            "episode", "NE", "OS", "SR", "SPL", "nDTW"
        );
        let yn = |b: bool| if b { "yes" } else { "no" };
        for r in &self.episodes {
            let _ = writeln!(
                s,
                "{:<12} {:>8.3} {:>4} {:>4} {:>6.3} {:>6.3}",
                r.episode_id,
                r.ne,
                yn(r.oracle_success),
                yn(r.success),
                r.spl,
                r.ndtw
            );
        }
        let a = &self.aggregate;
        let _ = writeln!(s, "\naggregate over {} episodes", a.episodes);
        let _ = writeln!(s, "  NE   {:8.3} m", a.ne);
        let _ = writeln!(s, "  OS   {:8.2} %", a.os);
        let _ = writeln!(s, "  SR   {:8.2} %", a.sr);
        let _ = writeln!(s, "  SPL  {:8.2} %", a.spl);
        let _ = writeln!(s, "  nDTW {:8.3}", a.ndtw);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
