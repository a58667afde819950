use super::*;
use crate::geometry::Point;
use crate::kinematics::StepAction;
use crate::world::{Landmark, OccupancyGrid};

fn corridor_world() -> SceneWorld {
    // 3 m long, 1 m wide free strip surrounded by walls
    let mut grid = OccupancyGrid::new(60, 40, 0.05);
    grid.fill_rect(Point::new(0.0, 0.0), Point::new(3.0, 0.5), true);
    grid.fill_rect(Point::new(0.0, 1.5), Point::new(3.0, 2.0), true);
    SceneWorld::new(grid, Vec::new(), Vec::new()).unwrap()
}

fn straight_episode() -> Episode {
    Episode {
        id: "ep-straight".into(),
        instruction: "Walk down the corridor and stop.".into(),
        start: Pose::new(0.5, 1.0, 0.0),
        goal: Point::new(2.5, 1.0),
        gt_waypoints: vec![Point::new(0.5, 1.0), Point::new(2.5, 1.0)],
        gt_geodesic_length: 2.0,
        planted_transitions: Vec::new(),
    }
}

#[test]
fn fusion_marker() {
    assert_eq!(
        fuse_reasoning_context("None", 0, 0).unwrap(),
        "None [steps_since_reasoning=0]"
    );
    assert!(fuse_reasoning_context("x", 12, 8)
        .unwrap()
        .ends_with("[steps_since_reasoning=4]"));
    assert!(fuse_reasoning_context("x", 3, 4).is_err());
}

#[test]
fn uniform_sampling_indices() {
    assert_eq!(sample_indices(8, 8).unwrap(), (0..8).collect::<Vec<_>>());
    assert_eq!(sample_indices(3, 8).unwrap(), vec![0, 1, 2]);
    assert_eq!(sample_indices(16, 8).unwrap(), vec![0, 2, 4, 6, 9, 11, 13, 15]);
    assert_eq!(sample_indices(5, 1).unwrap(), vec![4]);
    assert!(sample_indices(0, 8).is_err());
    assert!(sample_indices(3, 0).is_err());
}

#[test]
fn mode_is_strict_argmax() {
    assert_eq!(decide_mode(0.7, 0.3).unwrap(), Mode::Reason);
    assert_eq!(decide_mode(0.5, 0.5).unwrap(), Mode::Act);
    assert_eq!(decide_mode(-1.0, 2.0).unwrap(), Mode::Act);
    assert!(decide_mode(f64::NAN, 0.0).is_err());
    assert!(decide_mode(0.0, f64::INFINITY).is_err());
}

#[test]
fn frame_visibility_and_order() {
    let grid = OccupancyGrid::new(100, 100, 0.05);
    let lm = |id: &str, x, y| Landmark {
        id: id.into(),
        category: "lamp".into(),
        position: Point::new(x, y),
    };
    let world = SceneWorld::new(
        grid,
        Vec::new(),
        vec![
            lm("far", 3.0, 2.5),
            lm("near", 2.0, 2.5),
            lm("behind", 0.5, 2.5),
            lm("out", 4.8, 2.5),
        ],
    )
    .unwrap();
    let frame = make_frame(&world, Pose::new(1.0, 2.5, 0.0), 4, 1, &FovConfig::default());
    assert_eq!(frame.visible_landmarks, vec!["near", "far"]);
    assert_eq!(frame.steps_since_reasoning, 3);
    assert_eq!(frame.room, None);
}

#[test]
fn expert_walks_corridor_then_stops() {
    let world = corridor_world();
    let ep = straight_episode();
    let mut expert = ScriptedExpert::new(&world, &ep, ScriptedExpertConfig::default());
    let out = run_rollout(&world, &ep, &mut expert, &RolloutConfig::default()).unwrap();
    let actions: Vec<StepAction> = out.trajectory.steps.iter().map(|s| s.action).collect();
    let mut expected = vec![StepAction::Forward; 8];
    expected.push(StepAction::Stop);
    assert_eq!(actions, expected);
    assert_eq!(out.trajectory.terminated_by, TerminatedBy::Stop);
    let end = out.trajectory.final_pose(ep.start).position();
    assert!(end.distance(ep.goal) < 1e-9);
}

#[test]
fn reasoning_then_acting() {
    let world = corridor_world();
    let ep = straight_episode();
    let mut backend = ReplayBackend::new(vec![
        PolicyDecision::reason("Scene: a corridor.\nProgress: starting.\nPlan: go east."),
        PolicyDecision::act("move forward 50 cm"),
        PolicyDecision::act("stop"),
    ]);
    struct Check(Vec<(usize, usize, usize)>);
    impl RolloutObserver for Check {
        fn after_iteration(&mut self, s: &RolloutState, _: Mode, _: Pose, _: Pose) {
            self.0.push((s.t, s.t_prev, s.buffer.len()));
        }
    }
    let mut check = Check(Vec::new());
    let out = run_rollout_observed(&world, &ep, &mut backend, &RolloutConfig::default(), &mut check).unwrap();
    assert_eq!(out.reasoning_log.len(), 1);
    assert_eq!(out.reasoning_log[0].t, 0);
    assert_eq!(check.0, vec![(1, 0, 2), (2, 0, 3), (3, 0, 4)]);
    let first = &out.trajectory.steps[0];
    assert_eq!(first.action, StepAction::Reason);
    assert_eq!(first.pose_before, first.pose_after);
    assert_eq!(out.trajectory.steps.len(), 4);
}

#[test]
fn budget_and_malformed_text() {
    let world = corridor_world();
    let ep = straight_episode();
    let decisions = vec![PolicyDecision::act("spin around"); 5];
    let mut backend = ReplayBackend::new(decisions);
    let cfg = RolloutConfig {
        step_budget: 5,
        ..RolloutConfig::default()
    };
    let out = run_rollout(&world, &ep, &mut backend, &cfg).unwrap();
    assert_eq!(out.trajectory.terminated_by, TerminatedBy::StepBudget);
    assert_eq!(out.parse_failures.len(), 5);
    assert!(out.trajectory.steps.iter().all(|s| s.action == StepAction::Noop));
}

#[test]
fn backend_failure_aborts_with_partial_trajectory() {
    let world = corridor_world();
    let ep = straight_episode();
    let mut backend = ReplayBackend::new(vec![PolicyDecision::act("move forward 25 cm")]);
    let out = run_rollout(&world, &ep, &mut backend, &RolloutConfig::default()).unwrap();
    assert_eq!(out.trajectory.terminated_by, TerminatedBy::Aborted);
    assert!(!out.trajectory.is_complete());
    assert_eq!(out.trajectory.steps.len(), 1);
    assert!(out.error.is_some());
}

#[test]
fn reasoning_log_round_trip() {
    let log = vec![ReasoningEntry {
        episode_id: "e".into(),
        t: 3,
        text: "Scene: x\nProgress: y\nPlan: z".into(),
    }];
    assert_eq!(
        reasoning_log_from_jsonl(&reasoning_log_to_jsonl(&log)).unwrap(),
        log
    );
    assert!(reasoning_log_from_jsonl("{\"t\":1}").is_err());
}
