use criterion::{black_box, criterion_group, criterion_main, Criterion};

use vlnkit_bench::fixture;
use vlnkit_core::data_engine::{detect_all, Collector, DetectionConfig};
use vlnkit_core::metrics::{evaluate, ndtw};
use vlnkit_core::orchestrator::{
    parse_action_text, run_rollout, RolloutConfig, ScriptedExpert, ScriptedExpertConfig,
};

fn geodesic(c: &mut Criterion) {
    let f = fixture(1, 20);
    let pairs: Vec<_> = f.episodes.iter().map(|e| (e.start.position(), e.goal)).collect();
    c.bench_function("geodesic/20 start-goal pairs", |b| {
        b.iter(|| {
            for &(a, g) in &pairs {
                black_box(f.world.geodesic_distance(a, g).unwrap());
            }
        })
    });
}

fn metrics(c: &mut Criterion) {
    let f = fixture(2, 20);
    let walked: Vec<Vec<_>> = f
        .dagger
        .iter()
        .map(|t| t.observation_poses().iter().map(|p| p.position()).collect())
        .collect();
    c.bench_function("ndtw/20 noisy trajectories", |b| {
        b.iter(|| {
            for (p, e) in walked.iter().zip(&f.episodes) {
                black_box(ndtw(p, &e.gt_waypoints).unwrap());
            }
        })
    });
    c.bench_function("evaluate/20 episodes", |b| {
        b.iter(|| black_box(evaluate(&f.dagger, &f.episodes, &f.world).unwrap()))
    });
}

fn collection(c: &mut Criterion) {
    let f = fixture(3, 10);
    let collector = Collector::new(&f.world);
    c.bench_function("collect/gt 10 episodes", |b| {
        b.iter(|| {
            for e in &f.episodes {
                black_box(collector.gt(e).unwrap());
            }
        })
    });
    let cfg = DetectionConfig::default();
    c.bench_function("detect/10 noisy trajectories", |b| {
        b.iter(|| {
            for (t, e) in f.dagger.iter().zip(&f.episodes) {
                black_box(detect_all(&f.world, e, t, &cfg).unwrap());
            }
        })
    });
}

fn rollout(c: &mut Criterion) {
    let f = fixture(4, 5);
    let config = RolloutConfig::default();
    c.bench_function("rollout/scripted expert 5 episodes", |b| {
        b.iter(|| {
            for e in &f.episodes {
                let mut expert = ScriptedExpert::new(&f.world, e, ScriptedExpertConfig::default());
                black_box(run_rollout(&f.world, e, &mut expert, &config).unwrap());
            }
        })
    });
    c.bench_function("parse/free-form command", |b| {
        b.iter(|| black_box(parse_action_text(black_box("Move forward 1.75 m")).unwrap()))
    });
}

criterion_group!(benches, geodesic, metrics, collection, rollout);
criterion_main!(benches);
