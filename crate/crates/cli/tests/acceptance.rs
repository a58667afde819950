//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::cell::RefCell;
use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::rc::Rc;
use std::time::{Duration, Instant};

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vlnkit_cli::commands::TripletRecord;
use vlnkit_core::data_engine::{
    detect_deviation_nodes, detect_subtask_nodes, nodes_from_jsonl, Collector, NodeCause, NoisyExpertConfig,
    WAYPOINT_TOLERANCE,
};
use vlnkit_core::geometry::Point;
use vlnkit_core::kinematics::{trajectories_to_jsonl, Pose, StepAction, TrajectoryRecorder};
use vlnkit_core::metrics::{evaluate, evaluate_episode, ndtw, oracle_success, spl, success, NDTW_DISTANCE};
use vlnkit_core::navigation::VERTEX_TOLERANCE;
use vlnkit_core::orchestrator::{
    decide_mode, parse_action_text, render_actions, run_rollout_observed, BackendError, PolicyBackend,
    PolicyDecision, PolicyQuery, RandomBackend, RandomBackendConfig, RolloutConfig, RolloutObserver,
    RolloutState,
};
use vlnkit_core::supervision::sample_from_json_line;
use vlnkit_core::world::{generate_synthetic_world, Cell, GenerationParams, OccupancyGrid};
use vlnkit_core::{ActionPrimitive, Episode, Mode, SceneWorld, SegmentTag, TerminatedBy, Trajectory};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure!(took < limit, "took {took:.2?}, limit {limit:?}");
    Ok(took)
}

// ---------------------------------------------------------------- 1

/// Textbook full-matrix DTW, filled by explicit recursion with memoization.
fn dtw_oracle(a: &[Point], b: &[Point]) -> f64 {
    fn cell(i: usize, j: usize, a: &[Point], b: &[Point], memo: &mut HashMap<(usize, usize), f64>) -> f64 {
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let c = a[i].distance(b[j]);
        let v = match (i, j) {
            (0, 0) => c,
            (0, _) => c + cell(0, j - 1, a, b, memo),
            (_, 0) => c + cell(i - 1, 0, a, b, memo),
            _ => {
                let best = cell(i - 1, j - 1, a, b, memo)
                    .min(cell(i - 1, j, a, b, memo))
                    .min(cell(i, j - 1, a, b, memo));
                c + best
            }
        };
        memo.insert((i, j), v);
        v
    }
    cell(a.len() - 1, b.len() - 1, a, b, &mut HashMap::new())
}

fn straight_walk(world: &SceneWorld, start: Pose, plan: &[(ActionPrimitive, usize)]) -> Trajectory {
    let mut rec = TrajectoryRecorder::new(world, "analytic", start);
    for &(a, n) in plan {
        for _ in 0..n {
            rec.act(a, Mode::Act, SegmentTag::Normal);
        }
    }
    rec.pause(StepAction::Stop, Mode::Act);
    rec.finish(TerminatedBy::Stop)
}

fn analytic_episode(start: Pose, goal: Point) -> Episode {
    Episode {
        id: "analytic".into(),
        instruction: "Walk east.".into(),
        start,
        goal,
        gt_waypoints: vec![start.position(), goal],
        gt_geodesic_length: start.position().distance(goal),
        planted_transitions: Vec::new(),
    }
}

fn metric_oracles() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let path = |rng: &mut ChaCha8Rng| {
            let n = rng.gen_range(1..=20);
            (0..n)
                .map(|_| Point::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)))
                .collect::<Vec<_>>()
        };
        let (pred, reference) = (path(&mut rng), path(&mut rng));
        let expected = (-dtw_oracle(&pred, &reference) / (reference.len() as f64 * NDTW_DISTANCE)).exp();
        let got = ndtw(&pred, &reference).map_err(|e| e.to_string())?;
        worst = worst.max((got - expected).abs());
    }
    ensure!(worst <= 1e-9, "nDTW differs from the DP oracle by {worst:e}");

    ensure!(spl(true, 7.5, 7.5).unwrap() == 1.0, "spl with p = l is not 1");
    ensure!(spl(true, 4.0, 8.0).unwrap() == 0.5, "spl(4 of 8) is not 0.5");
    ensure!(
        spl(false, 4.0, 4.0).unwrap() == 0.0,
        "failed episode has nonzero spl"
    );
    ensure!(
        success(3.0) && !success(3.0 + 1e-9),
        "success radius is not inclusive at 3.00 m"
    );

    // quarter-meter cells keep every position and distance exact
    let world = SceneWorld::open(20.0, 3.0, 0.25).map_err(|e| e.to_string())?;
    let start = Pose::new(2.125, 1.125, 0.0);
    let ep = analytic_episode(start, Point::new(7.125, 1.125));
    let traj = straight_walk(&world, start, &[(ActionPrimitive::Forward, 8)]);
    let r = evaluate_episode(&traj, &ep, &world).map_err(|e| e.to_string())?;
    ensure!(
        r.ne == 3.0 && r.success && r.oracle_success,
        "NE 3.00 is not a success: {r:?}"
    );
    let exact = straight_walk(&world, start, &[(ActionPrimitive::Forward, 20)]);
    let r = evaluate_episode(&exact, &ep, &world).map_err(|e| e.to_string())?;
    ensure!(
        r.spl == 1.0,
        "walking exactly the shortest path gives spl {}",
        r.spl
    );

    let mut passing = analytic_episode(Pose::new(8.125, 1.125, 0.0), Point::new(13.125, 1.125));
    passing.gt_waypoints = vec![passing.start.position(), passing.goal];
    let turned = straight_walk(
        &world,
        passing.start,
        &[
            (ActionPrimitive::Forward, 16),
            (ActionPrimitive::TurnLeft, 12),
            (ActionPrimitive::Forward, 24),
        ],
    );
    let r = evaluate_episode(&turned, &passing, &world).map_err(|e| e.to_string())?;
    ensure!(
        r.oracle_success && !r.success && r.spl == 0.0,
        "pass-by trajectory scored {r:?}"
    );
    let away = straight_walk(
        &world,
        Pose::new(8.125, 1.125, 180.0),
        &[(ActionPrimitive::Forward, 4)],
    );
    let never = oracle_success(&away, &passing, &world).map_err(|e| e.to_string())?;
    ensure!(
        !never,
        "trajectory that never came near the goal counts as oracle success"
    );

    let took = within(Duration::from_secs(5), t0)?;
    Ok(format!(
        "100 pairs, max nDTW error {worst:.1e}, closed forms exact, {took:.2?}"
    ))
}

// ---------------------------------------------------------------- 2

fn geodesic_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (n, res) = (50usize, 0.05);
    let mut pairs = 0;
    let mut unreachable = 0;
    for _ in 0..100 {
        let density = rng.gen_range(0.05..0.4);
        let mut grid = OccupancyGrid::new(n, n, res);
        for r in 0..n {
            for c in 0..n {
                if rng.gen_bool(density) {
                    grid.set(Cell::new(c, r), true);
                }
            }
        }
        let world = SceneWorld::new(grid.clone(), Vec::new(), Vec::new()).map_err(|e| e.to_string())?;

        // independent graph: 8-neighbourhood, diagonals only between two free orthogonal cells
        let mut g: UnGraph<(), f64> = UnGraph::new_undirected();
        let ids: Vec<Option<NodeIndex>> = (0..n * n)
            .map(|i| (!grid.is_blocked(Cell::new(i % n, i / n))).then(|| g.add_node(())))
            .collect();
        let free = |c: usize, r: usize| ids[r * n + c];
        for r in 0..n {
            for c in 0..n {
                let Some(a) = free(c, r) else { continue };
                if c + 1 < n {
                    if let Some(b) = free(c + 1, r) {
                        g.add_edge(a, b, 1.0);
                    }
                }
                if r + 1 < n {
                    if let Some(b) = free(c, r + 1) {
                        g.add_edge(a, b, 1.0);
                    }
                }
                if c + 1 < n && r + 1 < n && free(c + 1, r).is_some() && free(c, r + 1).is_some() {
                    if let Some(b) = free(c + 1, r + 1) {
                        g.add_edge(a, b, std::f64::consts::SQRT_2);
                    }
                }
                if c >= 1 && r + 1 < n && free(c - 1, r).is_some() && free(c, r + 1).is_some() {
                    if let Some(b) = free(c - 1, r + 1) {
                        g.add_edge(a, b, std::f64::consts::SQRT_2);
                    }
                }
            }
        }
        let free_cells: Vec<(usize, usize)> = (0..n * n)
            .filter(|&i| ids[i].is_some())
            .map(|i| (i % n, i / n))
            .collect();
        if free_cells.is_empty() {
            continue;
        }
        for _ in 0..5 {
            let (ac, ar) = free_cells[rng.gen_range(0..free_cells.len())];
            let dist = dijkstra(&g, free(ac, ar).unwrap(), None, |e| *e.weight());
            let a = grid.cell_center(Cell::new(ac, ar));
            for _ in 0..10 {
                let (bc, br) = free_cells[rng.gen_range(0..free_cells.len())];
                let b = grid.cell_center(Cell::new(bc, br));
                let got = world.geodesic_distance(a, b).map_err(|e| e.to_string())?;
                let want = dist.get(&free(bc, br).unwrap()).map(|d| d * res);
                pairs += 1;
                match (got, want) {
                    (Some(x), Some(y)) => ensure!((x - y).abs() <= 1e-9, "{a:?} -> {b:?}: {x} vs oracle {y}"),
                    (None, None) => unreachable += 1,
                    _ => return Err(format!("{a:?} -> {b:?}: {got:?} vs oracle {want:?}")),
                }
            }
        }
    }
    let took = within(Duration::from_secs(30), t0)?;
    Ok(format!(
        "100 grids, {pairs} pairs ({unreachable} unreachable) agree, {took:.2?}"
    ))
}

// ---------------------------------------------------------------- 3

/// Remembers the last decision so the observer can check how it was dispatched.
struct Recording<B> {
    inner: B,
    last: Rc<RefCell<Option<PolicyDecision>>>,
}

impl<B: PolicyBackend> PolicyBackend for Recording<B> {
    fn decide(&mut self, q: &PolicyQuery<'_>) -> Result<PolicyDecision, BackendError> {
        let d = self.inner.decide(q)?;
        *self.last.borrow_mut() = Some(d.clone());
        Ok(d)
    }
}

struct Invariants {
    last: Rc<RefCell<Option<PolicyDecision>>>,
    last_reason: usize,
    iterations: usize,
    ties: usize,
    violations: Vec<String>,
}

impl RolloutObserver for Invariants {
    fn after_iteration(&mut self, s: &RolloutState, mode: Mode, before: Pose, after: Pose) {
        let t = s.t - 1;
        self.iterations += 1;
        if s.buffer.len() != s.t + 1 {
            self.violations
                .push(format!("t={}: buffer length {}", s.t, s.buffer.len()));
        }
        let d = self.last.borrow().clone().expect("decision recorded");
        if d.d_reason == d.d_act {
            self.ties += 1;
            if mode != Mode::Act {
                self.violations
                    .push(format!("t={t}: equal logits dispatched as {mode:?}"));
            }
        }
        if mode == Mode::Reason {
            self.last_reason = t;
            if before != after {
                self.violations
                    .push(format!("t={t}: pose changed on a reasoning step"));
            }
        }
        if s.t_prev != self.last_reason {
            self.violations.push(format!(
                "t={t}: t_prev {} but last reasoning at {}",
                s.t_prev, self.last_reason
            ));
        }
    }
}

fn rollout_invariants() -> Outcome {
    let t0 = Instant::now();
    let params = GenerationParams {
        episode_count: 10,
        ..Default::default()
    };
    let worlds: Vec<(SceneWorld, Vec<Episode>)> = (0..5)
        .map(|s| generate_synthetic_world(100 + s, &params))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut stops, mut budgets, mut ties, mut reasons) = (0, 0, 0, 0);
    for i in 0..1000 {
        let (world, eps) = &worlds[i % worlds.len()];
        let ep = &eps[rng.gen_range(0..eps.len())];
        let cfg = RandomBackendConfig {
            reason_probability: rng.gen_range(0.0..0.6),
            tie_probability: rng.gen_range(0.0..0.3),
            stop_probability: rng.gen_range(0.0..0.05),
            garbage_probability: rng.gen_range(0.0..0.2),
        };
        let last = Rc::new(RefCell::new(None));
        let mut backend = Recording {
            inner: RandomBackend::new(ChaCha8Rng::seed_from_u64(rng.gen()), cfg),
            last: last.clone(),
        };
        let budget = rng.gen_range(1..=150);
        let config = RolloutConfig {
            step_budget: budget,
            ..Default::default()
        };
        let mut obs = Invariants {
            last,
            last_reason: 0,
            iterations: 0,
            ties: 0,
            violations: Vec::new(),
        };
        let out =
            run_rollout_observed(world, ep, &mut backend, &config, &mut obs).map_err(|e| e.to_string())?;
        ensure!(
            obs.violations.is_empty(),
            "rollout {i}: {}",
            obs.violations.join("; ")
        );
        for s in &out.trajectory.steps {
            ensure!(
                s.mode != Mode::Reason || s.pose_before == s.pose_after,
                "rollout {i}: reasoning step {} moved",
                s.t
            );
        }
        match out.trajectory.terminated_by {
            TerminatedBy::Stop => stops += 1,
            TerminatedBy::StepBudget => {
                ensure!(
                    obs.iterations == budget,
                    "rollout {i}: budget {budget} but {} iterations",
                    obs.iterations
                );
                budgets += 1;
            }
            other => return Err(format!("rollout {i} ended by {other:?}: {:?}", out.error)),
        }
        ties += obs.ties;
        reasons += out.reasoning_log.len();
    }
    ensure!(
        decide_mode(0.5, 0.5).unwrap() == Mode::Act,
        "equal logits do not act"
    );
    ensure!(
        ties > 0 && reasons > 0 && stops > 0 && budgets > 0,
        "rollouts did not exercise every branch"
    );
    let took = within(Duration::from_secs(60), t0)?;
    Ok(format!(
        "1000 rollouts ({stops} stopped, {budgets} hit the budget, {reasons} reasoning steps, {ties} ties), {took:.2?}"
    ))
}

// ---------------------------------------------------------------- 4

fn parser_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..1000 {
        let s = match rng.gen_range(0..5) {
            0 => format!("move forward {} cm", rng.gen_range(1..3000)),
            1 => format!("Move Forward {:.2} m", rng.gen_range(0.01..20.0)),
            2 => format!("turn left {} degrees", rng.gen_range(1..720)),
            3 => format!("turn right {:.1} degree", rng.gen_range(0.5..720.0)),
            _ => "stop".to_string(),
        };
        let once = parse_action_text(&s).map_err(|e| format!("command {i} {s:?}: {e}"))?;
        let canonical = render_actions(&once).ok_or_else(|| format!("{s:?} parsed to a mixed run"))?;
        let twice = parse_action_text(&canonical).map_err(|e| format!("canonical {canonical:?}: {e}"))?;
        ensure!(twice == once, "{s:?} -> {canonical:?} changes the primitives");
        ensure!(
            render_actions(&twice).as_deref() == Some(canonical.as_str()),
            "{canonical:?} is not a fixed point"
        );
    }
    let three = parse_action_text("move forward 75 cm").map_err(|e| e.to_string())?;
    ensure!(
        three == vec![ActionPrimitive::Forward; 3],
        "\"move forward 75 cm\" gave {three:?}"
    );
    Ok("1000 commands reach a fixed point; 75 cm is 3 FORWARD".into())
}

// ---------------------------------------------------------------- 5

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    p.distance(Point::new(a.x + t * dx, a.y + t * dy))
}

fn planted_worlds() -> Result<Vec<(SceneWorld, Vec<Episode>)>, String> {
    let params = GenerationParams {
        room_count: 5,
        episode_count: 4,
        ..Default::default()
    };
    (0..50)
        .map(|s| generate_synthetic_world(500 + s, &params).map_err(|e| e.to_string()))
        .collect()
}

fn data_engine_oracle() -> Outcome {
    let worlds = planted_worlds()?;
    let (mut planted_total, mut excursions) = (0, 0);
    let threshold = 1.0;
    for (w, (world, eps)) in worlds.iter().enumerate() {
        let collector = Collector::new(world);
        for (e, ep) in eps.iter().enumerate() {
            let traj = collector
                .gt(ep)
                .map_err(|err| format!("world {w} {}: {err}", ep.id))?;

            // ground truth: the first step inside each planted room's rectangle, in order
            let mut expected = Vec::new();
            let mut from = 0;
            for tr in &ep.planted_transitions {
                let region = world.rooms()[tr.to_room].region;
                let step = (from..traj.steps.len())
                    .find(|&s| region.contains(traj.steps[s].pose_after.position()))
                    .ok_or_else(|| format!("world {w} {}: never entered planted {}", ep.id, tr.to))?;
                let p = traj.steps[step].pose_after.position();
                let seg = (ep.gt_waypoints[tr.segment], ep.gt_waypoints[tr.segment + 1]);
                ensure!(
                    segment_distance(p, seg.0, seg.1) <= 0.5,
                    "world {w} {}: entry into {} far from planted segment {}",
                    ep.id,
                    tr.to,
                    tr.segment
                );
                expected.push((step, tr.from.clone(), tr.to.clone()));
                from = step + 1;
            }
            let detected: Vec<(usize, String, String)> = detect_subtask_nodes(&traj, 2)
                .into_iter()
                .filter(|n| n.cause == Some(NodeCause::RoomChange))
                .map(|n| {
                    let tr = n.room_transition.expect("room change carries its transition");
                    (n.step, tr.from, tr.to)
                })
                .collect();
            let tp = detected.iter().filter(|d| expected.contains(d)).count();
            ensure!(
                tp == detected.len() && tp == expected.len(),
                "world {w} {}: detected {detected:?}, planted {expected:?}",
                ep.id
            );
            planted_total += expected.len();

            let noise = NoisyExpertConfig {
                error_probability: 0.1,
                seed: (w * 100 + e) as u64,
                ..Default::default()
            };
            let dagger = collector
                .dagger(ep, &noise, threshold)
                .map_err(|err| err.to_string())?;
            let series: Vec<f64> = dagger
                .steps
                .iter()
                .map(|s| {
                    let p = s.pose_after.position();
                    ep.gt_waypoints
                        .windows(2)
                        .map(|seg| segment_distance(p, seg[0], seg[1]))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            // an excursion starts above the threshold and lasts until the distance halves
            let mut starts = Vec::new();
            let mut inside = false;
            for (i, &d) in series.iter().enumerate() {
                if !inside && d > threshold {
                    starts.push(i);
                    inside = true;
                } else if inside && d <= threshold / 2.0 {
                    inside = false;
                }
            }
            let nodes: Vec<usize> = detect_deviation_nodes(&dagger, ep, threshold)
                .map_err(|err| err.to_string())?
                .into_iter()
                .map(|n| n.step)
                .collect();
            ensure!(
                nodes == starts,
                "world {w} {}: deviation nodes {nodes:?}, excursions {starts:?}",
                ep.id
            );
            excursions += starts.len();
        }
    }
    ensure!(
        planted_total > 0 && excursions > 0,
        "oracle saw no transitions or excursions"
    );
    Ok(format!(
        "50 worlds: {planted_total} planted transitions recovered exactly, {excursions} excursions in bijection"
    ))
}

// ---------------------------------------------------------------- 6

fn dagger_contract() -> Outcome {
    let worlds = planted_worlds()?;
    let mut corrections = 0;
    let mut runs = 0;
    for (w, (world, eps)) in worlds.iter().enumerate() {
        let collector = Collector::new(world);
        for (e, ep) in eps.iter().enumerate() {
            let gt = collector.gt(ep).map_err(|err| err.to_string())?;
            let clean = NoisyExpertConfig {
                error_probability: 0.0,
                seed: (w * 7 + e) as u64,
                ..Default::default()
            };
            let same = collector.dagger(ep, &clean, 1.0).map_err(|err| err.to_string())?;
            ensure!(
                trajectories_to_jsonl(&[gt]) == trajectories_to_jsonl(&[same]),
                "world {w} {}: noiseless DAgger differs from GT following",
                ep.id
            );
        }
        // 200 noisy runs: 50 worlds x 4 episodes
        for (e, ep) in eps.iter().enumerate() {
            runs += 1;
            let noise = NoisyExpertConfig {
                error_probability: 0.15,
                seed: 9000 + (w * 4 + e) as u64,
                ..Default::default()
            };
            let traj = collector.dagger(ep, &noise, 1.0).map_err(|err| err.to_string())?;
            let wps = &ep.gt_waypoints;
            // waypoints reached in order while following normally
            let mut reached = 1;
            for (i, s) in traj.steps.iter().enumerate() {
                let p = s.pose_after.position();
                if s.segment_tag == SegmentTag::Normal {
                    while reached < wps.len() && p.distance(wps[reached]) <= VERTEX_TOLERANCE {
                        reached += 1;
                    }
                }
                let run_ends = s.segment_tag == SegmentTag::Correcting
                    && traj
                        .steps
                        .get(i + 1)
                        .is_none_or(|n| n.segment_tag != SegmentTag::Correcting);
                if run_ends {
                    corrections += 1;
                    let target = (reached..wps.len()).find(|&k| p.distance(wps[k]) <= WAYPOINT_TOLERANCE);
                    let Some(k) = target else {
                        return Err(format!(
                            "world {w} {} step {i}: correction ends {:.3} m from the nearest pending waypoint",
                            ep.id,
                            wps[reached.min(wps.len() - 1)..]
                                .iter()
                                .map(|q| q.distance(p))
                                .fold(f64::INFINITY, f64::min)
                        ));
                    };
                    reached = k + 1;
                }
            }
        }
    }
    ensure!(corrections > 0, "no corrections happened");
    Ok(format!(
        "{runs} noisy runs, {corrections} corrections all end within 0.25 m; p=0 is byte-identical to GT"
    ))
}

// ---------------------------------------------------------------- 7

fn gt_follower_quality() -> Outcome {
    let mut worlds = planted_worlds()?;
    let params = GenerationParams {
        episode_count: 50,
        ..Default::default()
    };
    worlds.push(generate_synthetic_world(0, &params).map_err(|e| e.to_string())?);
    let (mut n, mut spl_sum) = (0, 0.0);
    let (mut lowest_set, mut lowest_episode) = (f64::INFINITY, f64::INFINITY);
    for (w, (world, eps)) in worlds.iter().enumerate() {
        let collector = Collector::new(world);
        let trajs = eps
            .iter()
            .map(|e| collector.gt(e))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let report = evaluate(&trajs, eps, world).map_err(|e| e.to_string())?;
        for r in &report.episodes {
            ensure!(r.success, "set {w} {} failed with NE {:.3}", r.episode_id, r.ne);
            lowest_episode = lowest_episode.min(r.spl);
        }
        ensure!(
            report.aggregate.sr == 100.0,
            "set {w}: SR {}",
            report.aggregate.sr
        );
        ensure!(
            report.aggregate.spl >= 85.0,
            "set {w}: SPL {:.2}% < 85%",
            report.aggregate.spl
        );
        lowest_set = lowest_set.min(report.aggregate.spl);
        spl_sum += report.aggregate.spl * eps.len() as f64;
        n += eps.len();
    }
    let overall = spl_sum / n as f64;
    ensure!(overall >= 85.0, "overall SPL {overall:.2}% < 85%");
    Ok(format!(
        "{} sets, {n} episodes, SR 100%, SPL {overall:.2}% (lowest set {lowest_set:.2}%, lowest single episode {:.1}%)",
        worlds.len(),
        lowest_episode * 100.0
    ))
}

// ---------------------------------------------------------------- 8, 9

fn cli(dir: &Path, jobs: usize, args: &[&str]) -> Result<(), String> {
    let mut full = vec![
        "vlnkit".to_string(),
        "--out-dir".into(),
        dir.display().to_string(),
    ];
    full.extend(["--seed".into(), "42".into(), "--jobs".into(), jobs.to_string()]);
    full.extend(args.iter().map(|s| s.to_string()));
    vlnkit_cli::run_from(&full).map_err(|e| format!("{}: {e:#}", args.join(" ")))
}

const PIPELINE: [&[&str]; 5] = [
    &["--episodes", "50", "gen-world"],
    &["collect", "--mode", "dagger"],
    &["detect-nodes"],
    &["supervise", "--backend", "mock"],
    &["eval"],
];

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    for args in PIPELINE {
        cli(dir.path(), 0, args)?;
    }
    let took = within(Duration::from_secs(60), t0)?;
    let read =
        |name: &str| std::fs::read_to_string(dir.path().join(name)).map_err(|e| format!("{name}: {e}"));

    let nodes = nodes_from_jsonl(&read("nodes.jsonl")?).map_err(|e| e.to_string())?;
    let triplets: Vec<TripletRecord> = read("triplets.jsonl")?
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| format!("triplet line: {e}")))
        .collect::<Result<_, _>>()?;
    ensure!(
        nodes.len() == triplets.len(),
        "{} nodes but {} triplets",
        nodes.len(),
        triplets.len()
    );
    for (n, t) in nodes.iter().zip(&triplets) {
        ensure!(
            (n.episode_id.as_str(), n.step, n.node_type) == (t.episode_id.as_str(), t.step, t.node_type),
            "triplet for {} step {} does not follow the node order",
            t.episode_id,
            t.step
        );
        ensure!(
            t.triplet.is_valid(),
            "empty triplet field for {} step {}",
            t.episode_id,
            t.step
        );
    }
    let samples = read("samples.jsonl")?;
    let mut acts = 0;
    let mut reasons = 0;
    for (i, line) in samples.lines().enumerate() {
        let s = sample_from_json_line(line).map_err(|e| format!("sample line {}: {e}", i + 1))?;
        match s.mode {
            Mode::Act => {
                parse_action_text(&s.target).map_err(|e| format!("sample line {}: {e}", i + 1))?;
                acts += 1;
            }
            Mode::Reason => reasons += 1,
        }
    }
    ensure!(
        reasons == nodes.len(),
        "{reasons} reasoning samples for {} nodes",
        nodes.len()
    );
    let report = read("report.json")?;
    ensure!(report.contains("\"SR\""), "report.json has no SR field");
    Ok(format!(
        "50 episodes in {took:.2?}: {} nodes, all triplets complete, {acts} act + {reasons} reason samples validate",
        nodes.len()
    ))
}

fn all_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| e.to_string())? {
            let p = entry.map_err(|e| e.to_string())?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).map_err(|e| e.to_string())?));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn determinism() -> Outcome {
    let mut snapshots = Vec::new();
    for jobs in [1, 4] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        for args in PIPELINE {
            cli(dir.path(), jobs, args)?;
        }
        cli(dir.path(), jobs, &["rollout", "--backend", "random"])?;
        cli(dir.path(), jobs, &["inspect"])?;
        snapshots.push(all_files(dir.path())?);
    }
    let (a, b) = (&snapshots[0], &snapshots[1]);
    let names = |s: &[(String, Vec<u8>)]| s.iter().map(|f| f.0.clone()).collect::<Vec<_>>();
    ensure!(
        names(a) == names(b),
        "different file sets: {:?} vs {:?}",
        names(a),
        names(b)
    );
    for (x, y) in a.iter().zip(b) {
        ensure!(x.1 == y.1, "{} differs between --jobs 1 and --jobs 4", x.0);
    }
    Ok(format!(
        "{} files byte-identical across --jobs 1 and --jobs 4",
        a.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("metric oracle equivalence", metric_oracles),
        ("geodesic correctness", geodesic_oracle),
        ("rollout loop invariants", rollout_invariants),
        ("action-parser round trip", parser_round_trip),
        ("data-engine oracle", data_engine_oracle),
        ("DAgger correction contract", dagger_contract),
        ("GT-follower quality", gt_follower_quality),
        ("end-to-end pipeline", end_to_end),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({why})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
