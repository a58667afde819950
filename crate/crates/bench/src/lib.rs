//! Shared fixtures for the engine benchmarks.

use vlnkit_core::data_engine::{Collector, NoisyExpertConfig};
use vlnkit_core::world::{generate_synthetic_world, GenerationParams};
use vlnkit_core::{Episode, SceneWorld, Trajectory};

pub struct Fixture {
    pub world: SceneWorld,
    pub episodes: Vec<Episode>,
    pub gt: Vec<Trajectory>,
    pub dagger: Vec<Trajectory>,
}

/// A generated world with `episodes` episodes and their GT and noisy trajectories.
pub fn fixture(seed: u64, episodes: usize) -> Fixture {
    let params = GenerationParams {
        episode_count: episodes,
        ..Default::default()
    };
    let (world, episodes) = generate_synthetic_world(seed, &params).expect("world generates");
    let collector = Collector::new(&world);
    let gt = episodes
        .iter()
        .map(|e| collector.gt(e).expect("gt collects"))
        .collect();
    let dagger = episodes
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let noise = NoisyExpertConfig {
                error_probability: 0.1,
                seed: i as u64,
                ..Default::default()
            };
            collector.dagger(e, &noise, 1.0).expect("dagger collects")
        })
        .collect();
    Fixture {
        world,
        episodes,
        gt,
        dagger,
    }
}
