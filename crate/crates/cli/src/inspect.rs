//! Static top-down rendering of one trajectory: a character grid and an SVG drawing.

use std::fmt::Write as _;

use vlnkit_core::data_engine::{KeyNode, NodeCause, NodeType};
use vlnkit_core::geometry::{resample_polyline, Point};
use vlnkit_core::kinematics::{SegmentTag, Trajectory};
use vlnkit_core::world::{Cell, Episode, SceneWorld};

/// Side of one text cell in meters.
const TEXT_CELL: f64 = 0.25;
const PX_PER_M: f64 = 40.0;

pub fn node_marker(node: &KeyNode) -> char {
    match (node.node_type, node.cause) {
        (NodeType::SubtaskCompletion, Some(NodeCause::CorrectionComplete)) => 'C',
        (NodeType::SubtaskCompletion, _) => 'R',
        (NodeType::PathDeviation, _) => 'D',
        (NodeType::StoppingError, _) => 'E',
    }
}

fn node_label(node: &KeyNode) -> String {
    let mut s = format!("{} at step {}", node.node_type, node.step);
    if let Some(tr) = &node.room_transition {
        let _ = write!(s, ": {} -> {}", tr.from, tr.to);
    } else if node.cause == Some(NodeCause::CorrectionComplete) {
        s.push_str(": correction complete");
    }
    if let Some(d) = node.final_distance {
        let _ = write!(s, ", {d} from the goal");
    }
    s
}

fn node_position(traj: &Trajectory, node: &KeyNode) -> Option<Point> {
    traj.steps.get(node.step).map(|s| s.pose_after.position())
}

pub fn render_text(world: &SceneWorld, episode: &Episode, traj: &Trajectory, nodes: &[KeyNode]) -> String {
    let b = world.bounds();
    let cols = (b.width / TEXT_CELL).ceil().max(1.0) as usize;
    let rows = (b.height / TEXT_CELL).ceil().max(1.0) as usize;
    let grid = world.grid();
    let mut canvas = vec![vec![' '; cols]; rows];
    for (r, row) in canvas.iter_mut().enumerate() {
        for (c, ch) in row.iter_mut().enumerate() {
            let center = Point::new((c as f64 + 0.5) * TEXT_CELL, (r as f64 + 0.5) * TEXT_CELL);
            *ch = match grid.cell_at(center) {
                Some(cell) if !grid.is_blocked(cell) => '.',
                _ => '#',
            };
        }
    }
    let mut put = |p: Point, ch: char| {
        let c = ((p.x / TEXT_CELL).floor().max(0.0) as usize).min(cols - 1);
        let r = ((p.y / TEXT_CELL).floor().max(0.0) as usize).min(rows - 1);
        canvas[r][c] = ch;
    };
    for p in resample_polyline(&episode.gt_waypoints, TEXT_CELL / 2.0) {
        put(p, '+');
    }
    for s in &traj.steps {
        let ch = match s.segment_tag {
            SegmentTag::Normal => '*',
            SegmentTag::Deviated => '~',
            SegmentTag::Correcting => 'o',
        };
        put(s.pose_after.position(), ch);
    }
    put(episode.start.position(), 'S');
    put(episode.goal, 'G');
    for n in nodes {
        if let Some(p) = node_position(traj, n) {
            put(p, node_marker(n));
        }
    }

    let mut out = format!("episode {}: {}\n", episode.id, episode.instruction);
    for row in canvas.iter().rev() {
        out.extend(row.iter());
        out.push('\n');
    }
    out.push_str("\nlegend: # wall  + reference  * walked  ~ deviated  o correcting  S start  G goal\n");
    let _ = writeln!(out, "key nodes ({}):", nodes.len());
    for n in nodes {
        let _ = writeln!(out, "  {} {}", node_marker(n), node_label(n));
    }
    let _ = writeln!(
        out,
        "terminated by {:?} after {} steps",
        traj.terminated_by,
        traj.steps.len()
    );
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn render_svg(world: &SceneWorld, episode: &Episode, traj: &Trajectory, nodes: &[KeyNode]) -> String {
    let b = world.bounds();
    let (w, h) = (b.width * PX_PER_M, b.height * PX_PER_M);
    let px = |p: Point| (p.x * PX_PER_M, h - p.y * PX_PER_M);
    let points = |ps: &[Point]| {
        ps.iter()
            .map(|&p| {
                let (x, y) = px(p);
                format!("{x:.1},{y:.1}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.1} {h:.1}">"#
    );
    let _ = writeln!(
        s,
        "<title>{}</title>",
        escape(&format!("{}: {}", episode.id, episode.instruction))
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);

    let grid = world.grid();
    let res = grid.resolution() * PX_PER_M;
    s.push_str("<g class=\"walls\" fill=\"#444444\">\n");
    for r in 0..grid.rows() {
        let mut c = 0;
        while c < grid.cols() {
            if !grid.is_blocked(Cell::new(c, r)) {
                c += 1;
                continue;
            }
            let start = c;
            while c < grid.cols() && grid.is_blocked(Cell::new(c, r)) {
                c += 1;
            }
            let y = h - (r + 1) as f64 * res;
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{y:.1}" width="{:.1}" height="{res:.1}"/>"#,
                start as f64 * res,
                (c - start) as f64 * res
            );
        }
    }
    s.push_str("</g>\n<g class=\"rooms\">\n");
    for room in world.rooms() {
        let (x, y) = px(Point::new(room.region.min_x, room.region.max_y));
        let _ = writeln!(
            s,
            r##"<rect x="{x:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#9ab" stroke-dasharray="4 3"/>"##,
            room.region.width() * PX_PER_M,
            room.region.height() * PX_PER_M
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" font-size="12" fill="#678">{}</text>"##,
            x + 4.0,
            y + 14.0,
            escape(&room.category)
        );
    }
    s.push_str("</g>\n<g class=\"landmarks\">\n");
    for lm in world.landmarks() {
        let (x, y) = px(lm.position);
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{:.1}" width="6" height="6" fill="#c93"><title>{}</title></rect>"##,
            x - 3.0,
            y - 3.0,
            escape(&lm.category)
        );
    }
    s.push_str("</g>\n");

    let _ = writeln!(
        s,
        r##"<polyline class="reference" points="{}" fill="none" stroke="#3a3" stroke-width="2" stroke-dasharray="6 4"/>"##,
        points(&episode.gt_waypoints)
    );
    let mut walked = vec![episode.start.position()];
    walked.extend(traj.steps.iter().map(|s| s.pose_after.position()));
    let _ = writeln!(
        s,
        r##"<polyline class="trajectory" points="{}" fill="none" stroke="#25c" stroke-width="2"/>"##,
        points(&walked)
    );
    for (p, fill, label) in [
        (episode.start.position(), "#25c", "start"),
        (episode.goal, "#3a3", "goal"),
    ] {
        let (x, y) = px(p);
        let _ = writeln!(
            s,
            r#"<circle class="{label}" cx="{x:.1}" cy="{y:.1}" r="6" fill="{fill}"><title>{label}</title></circle>"#
        );
    }

    s.push_str("<g class=\"nodes\">\n");
    for n in nodes {
        let Some(p) = node_position(traj, n) else {
            continue;
        };
        let (x, y) = px(p);
        let fill = match node_marker(n) {
            'R' => "#e90",
            'C' => "#a5d",
            'D' => "#d33",
            _ => "#000",
        };
        let _ = writeln!(
            s,
            r##"<circle class="node" data-type="{}" data-step="{}" cx="{x:.1}" cy="{y:.1}" r="7" fill="{fill}" fill-opacity="0.8" stroke="#fff"><title>{}</title></circle>"##,
            n.node_type,
            n.step,
            escape(&node_label(n))
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use vlnkit_core::data_engine::{collect_gt_trajectory, detect_all, DetectionConfig};
    use vlnkit_core::world::{generate_synthetic_world, GenerationParams};

    #[test]
    fn every_node_is_drawn_once() {
        let params = GenerationParams {
            episode_count: 1,
            ..Default::default()
        };
        let (world, eps) = generate_synthetic_world(3, &params).unwrap();
        let traj = collect_gt_trajectory(&world, &eps[0]).unwrap();
        let nodes = detect_all(&world, &eps[0], &traj, &DetectionConfig::default()).unwrap();
        assert!(!nodes.is_empty());
        let svg = render_svg(&world, &eps[0], &traj, &nodes);
        assert_eq!(svg.matches("class=\"node\"").count(), nodes.len());
        let text = render_text(&world, &eps[0], &traj, &nodes);
        assert!(text.contains(&format!("key nodes ({}):", nodes.len())));
        assert!(text.contains('S') && text.contains('G'));
    }
}
