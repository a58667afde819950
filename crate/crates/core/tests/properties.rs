use proptest::prelude::*;

use vlnkit_core::data_engine::{compute_progress, extract_node_context, ContextConfig, KeyNode, NodeType};
use vlnkit_core::geometry::polyline_length;
use vlnkit_core::kinematics::{apply_action, path_length, steps_length, TrajectoryRecorder};
use vlnkit_core::metrics::{ndtw, spl};
use vlnkit_core::orchestrator::{
    decide_mode, parse_action_text, render_actions, render_command, sample_indices, FovConfig,
};
use vlnkit_core::supervision::{emit_training_samples, ReasoningTriplet, SampleConfig};
use vlnkit_core::world::OccupancyGrid;
use vlnkit_core::{
    ActionPrimitive, Episode, Mode, Point, Pose, SceneWorld, SegmentTag, TerminatedBy, Trajectory,
};

const RES: f64 = 0.1;
const SIDE: f64 = 4.0;

prop_compose! {
    fn cluttered_world()(boxes in prop::collection::vec((0.0..SIDE, 0.0..SIDE, 0.1..1.2f64, 0.1..1.2f64), 0..6)) -> SceneWorld {
        let n = (SIDE / RES) as usize;
        let mut grid = OccupancyGrid::new(n, n, RES);
        for (x, y, w, h) in boxes {
            grid.fill_rect(Point::new(x, y), Point::new((x + w).min(SIDE), (y + h).min(SIDE)), true);
        }
        SceneWorld::new(grid, Vec::new(), Vec::new()).unwrap()
    }
}

fn point() -> impl Strategy<Value = Point> {
    (0.01..SIDE - 0.01, 0.01..SIDE - 0.01).prop_map(|(x, y)| Point::new(x, y))
}

fn primitive() -> impl Strategy<Value = ActionPrimitive> {
    prop::sample::select(vec![
        ActionPrimitive::Forward,
        ActionPrimitive::TurnLeft,
        ActionPrimitive::TurnRight,
    ])
}

fn open_world() -> SceneWorld {
    SceneWorld::open(30.0, 30.0, 0.05).unwrap()
}

fn walk(world: &SceneWorld, start: Pose, actions: &[ActionPrimitive]) -> Trajectory {
    let mut rec = TrajectoryRecorder::new(world, "p", start);
    for &a in actions {
        rec.act(a, Mode::Act, SegmentTag::Normal);
    }
    rec.finish(TerminatedBy::StepBudget)
}

fn episode_for(start: Pose) -> Episode {
    Episode {
        id: "p".into(),
        instruction: "Wander.".into(),
        start,
        goal: Point::new(start.x + 1.0, start.y),
        gt_waypoints: vec![start.position(), Point::new(start.x + 1.0, start.y)],
        gt_geodesic_length: 1.0,
        planted_transitions: Vec::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn geodesic_is_symmetric_and_bounded(world in cluttered_world(), a in point(), b in point()) {
        prop_assume!(world.is_free(a) && world.is_free(b));
        let ab = world.geodesic_distance(a, b).unwrap();
        let ba = world.geodesic_distance(b, a).unwrap();
        prop_assert_eq!(ab, ba);
        let diag = world.cell_diagonal();
        if let Some(d) = ab {
            prop_assert!(d >= a.distance(b) - diag - 1e-9, "{} < {}", d, a.distance(b));
            let path = world.shortest_path(a, b).unwrap().unwrap();
            prop_assert_eq!(path[0], a);
            prop_assert_eq!(*path.last().unwrap(), b);
            prop_assert!((polyline_length(&path) - d).abs() <= diag + 1e-9);
            for w in path.windows(2) {
                prop_assert!(world.grid().segment_clear(w[0], w[1]));
            }
        } else {
            prop_assert!(world.shortest_path(a, b).unwrap().is_none());
        }
    }

    #[test]
    fn random_actions_stay_in_free_space(world in cluttered_world(), start in point(), heading in 0..24u32,
                                         actions in prop::collection::vec(primitive(), 1..200)) {
        prop_assume!(world.is_free(start));
        let mut pose = Pose::at(start, heading as f64 * 15.0);
        for a in actions {
            let (next, collided) = apply_action(&world, pose, a);
            prop_assert!(world.is_free(next.position()));
            if collided {
                prop_assert_eq!(next, pose);
            }
            pose = next;
        }
    }

    #[test]
    fn rendered_commands_parse_back(a in primitive(), n in 1..60usize) {
        let text = render_command(a, n);
        let parsed = parse_action_text(&text).unwrap();
        prop_assert_eq!(&parsed, &vec![a; n]);
        prop_assert_eq!(render_actions(&parsed).unwrap(), text);
    }

    #[test]
    fn free_form_distances_reach_a_fixed_point(cm in 1..2500u32, meters in prop::bool::ANY, deg in 1..720u32, left in prop::bool::ANY) {
        let forward = if meters { format!("move forward {:.2} m", cm as f64 / 100.0) } else { format!("move forward {cm} cm") };
        let turn = format!("turn {} {deg} degrees", if left { "left" } else { "right" });
        for s in [forward, turn] {
            let once = parse_action_text(&s).unwrap();
            let canonical = render_actions(&once).unwrap();
            prop_assert_eq!(parse_action_text(&canonical).unwrap(), once);
        }
    }

    // dyadic values keep the shifted sums exact
    #[test]
    fn mode_ignores_a_common_shift(r in -4096..4096i32, a in -4096..4096i32, c in -4096..4096i32) {
        let (r, a, c) = (r as f64 / 8.0, a as f64 / 8.0, c as f64 / 8.0);
        prop_assert_eq!(decide_mode(r + c, a + c).unwrap(), decide_mode(r, a).unwrap());
        if r == a {
            prop_assert_eq!(decide_mode(r, a).unwrap(), Mode::Act);
        }
    }

    #[test]
    fn path_length_splits_additively(actions in prop::collection::vec(primitive(), 1..120), cut in 0..120usize) {
        let world = open_world();
        let traj = walk(&world, Pose::new(15.0, 15.0, 0.0), &actions);
        let cut = cut.min(traj.steps.len());
        let (head, tail) = traj.steps.split_at(cut);
        prop_assert!((steps_length(head) + steps_length(tail) - path_length(&traj)).abs() < 1e-9);
    }

    #[test]
    fn progress_never_decreases(actions in prop::collection::vec(primitive(), 1..120)) {
        let world = open_world();
        let start = Pose::new(15.0, 15.0, 0.0);
        let traj = walk(&world, start, &actions);
        let ep = episode_for(start);
        let mut last = 0.0;
        for s in 0..traj.steps.len() {
            let p = compute_progress(&traj, s, &ep).unwrap();
            prop_assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn spl_is_a_fraction(success in prop::bool::ANY, reference in 0.01..100.0f64, executed in 0.0..200.0f64) {
        let v = spl(success, reference, executed).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        if !success {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn ndtw_is_in_unit_interval(a in prop::collection::vec(point(), 1..15), b in prop::collection::vec(point(), 1..15)) {
        let v = ndtw(&a, &b).unwrap();
        prop_assert!(v > 0.0 && v <= 1.0);
        prop_assert!((ndtw(&b, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_indices_are_uniform(n in 1..500usize, k in 1..40usize) {
        let idx = sample_indices(n, k).unwrap();
        prop_assert_eq!(idx.len(), n.min(k));
        prop_assert_eq!(*idx.last().unwrap(), n - 1);
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        if k > 1 || n == 1 {
            prop_assert_eq!(idx[0], 0);
        }
    }

    #[test]
    fn triplets_round_trip(s in "[a-zA-Z ,.]{1,40}", p in "[a-zA-Z0-9 %.]{1,40}", n in "[a-zA-Z ,.]{1,40}") {
        prop_assume!(!s.trim().is_empty() && !p.trim().is_empty() && !n.trim().is_empty());
        let t = ReasoningTriplet::new(s, p, n);
        let back = ReasoningTriplet::parse(&t.render()).unwrap();
        prop_assert_eq!(back.render(), t.render());
        prop_assert!(back.is_valid());
    }

    #[test]
    fn sample_count_matches_resegmentation(actions in prop::collection::vec(primitive(), 1..80),
                                           node_steps in prop::collection::btree_set(0..80usize, 0..6)) {
        let world = open_world();
        let start = Pose::new(15.0, 15.0, 0.0);
        let traj = walk(&world, start, &actions);
        let ep = episode_for(start);
        let steps: Vec<usize> = node_steps.into_iter().filter(|&s| s < traj.steps.len()).collect();
        let nodes: Vec<KeyNode> = steps
            .iter()
            .map(|&s| {
                let node = KeyNode::new("p", NodeType::PathDeviation, s);
                extract_node_context(&world, &traj, &ep, node, &ContextConfig::default(), &FovConfig::default()).unwrap()
            })
            .collect();
        let triplets = vec![ReasoningTriplet::new("a", "b", "c"); nodes.len()];
        let samples = emit_training_samples(&ep, &traj, &nodes, &triplets, &SampleConfig::default()).unwrap();

        // a run starts at step i unless step i-1 has the same primitive and carries no node
        let runs = (0..actions.len())
            .filter(|&i| i == 0 || actions[i - 1] != actions[i] || steps.contains(&(i - 1)))
            .count();
        prop_assert_eq!(samples.len(), runs + nodes.len());
        let mut expanded = Vec::new();
        for s in samples.iter().filter(|s| s.mode == Mode::Act) {
            expanded.extend(parse_action_text(&s.target).unwrap());
        }
        prop_assert_eq!(expanded, actions);
        prop_assert!(samples.windows(2).all(|w| w[0].t <= w[1].t));
    }
}
