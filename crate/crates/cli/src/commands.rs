use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use vlnkit_core::data_engine::{detect_all, nodes_to_jsonl, Collector, KeyNode, NodeType};
use vlnkit_core::kinematics::{trajectories_to_jsonl, TerminatedBy, Trajectory};
use vlnkit_core::metrics::{evaluate, Report};
use vlnkit_core::orchestrator::{
    reasoning_log_to_jsonl, run_rollout, PolicyBackend, RandomBackend, RandomBackendConfig, ReasoningEntry,
    ScriptedExpert,
};
use vlnkit_core::remote::RemotePolicyBackend;
use vlnkit_core::seeds;
use vlnkit_core::supervision::{
    build_global_turn, emit_training_samples, generate_reasoning, node_conversation, samples_to_jsonl,
    MockReasoner, ReasonerBackend, ReasoningTriplet, RemoteReasoner, TrainingSample,
};
use vlnkit_core::world::{episodes_to_json, generate_synthetic_world, Episode, SceneWorld};

use crate::config::PipelineConfig;
use crate::inspect;
use crate::io::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CollectMode {
    Gt,
    Dagger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Backend {
    /// Deterministic local backend: template reasoner, or the scripted expert for rollouts.
    Mock,
    /// Seeded random policy (rollouts only).
    Random,
    /// HTTP service at the configured endpoint.
    Remote,
}

/// Resolved settings shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: PipelineConfig,
    pub out_dir: PathBuf,
    /// Worker threads; 0 lets the pool pick.
    pub jobs: usize,
}

impl Context {
    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn input(&self, given: Option<&Path>, default: &str) -> PathBuf {
        given.map_or_else(|| self.path(default), Path::to_path_buf)
    }

    /// Run `f` over `items` on the worker pool, keeping input order.
    fn par_map<T, R, F>(&self, items: &[T], f: F) -> anyhow::Result<Vec<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> anyhow::Result<R> + Sync + Send,
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .context("starting worker pool")?;
        pool.install(|| items.par_iter().map(&f).collect())
    }

    fn world(&self) -> anyhow::Result<SceneWorld> {
        read_world(&self.path(WORLD_FILE))
    }

    fn world_and_episodes(&self) -> anyhow::Result<(SceneWorld, Vec<Episode>)> {
        let world = self.world()?;
        let episodes = read_episodes(&self.path(EPISODES_FILE), &world)?;
        Ok((world, episodes))
    }
}

pub fn gen_world(ctx: &Context) -> anyhow::Result<()> {
    let seed = seeds::derive(ctx.config.seed, "world", 0);
    let (world, episodes) = generate_synthetic_world(seed, &ctx.config.world)?;
    write_atomic(&ctx.path(WORLD_FILE), &world.to_json())?;
    write_atomic(&ctx.path(EPISODES_FILE), &episodes_to_json(&episodes))?;
    log::info!("{} rooms, {} episodes", world.rooms().len(), episodes.len());
    Ok(())
}

pub fn collect(ctx: &Context, mode: CollectMode, output: Option<&Path>) -> anyhow::Result<()> {
    let (world, episodes) = ctx.world_and_episodes()?;
    let collector = Collector::new(&world);
    let cfg = &ctx.config;
    let trajs = ctx.par_map(&episodes, |ep| {
        let traj = match mode {
            CollectMode::Gt => collector.gt(ep),
            CollectMode::Dagger => {
                let noise = cfg
                    .noise
                    .with_seed(seeds::derive(cfg.seed, &format!("dagger/{}", ep.id), 0));
                collector.dagger(ep, &noise, cfg.detection.deviation_threshold)
            }
        };
        traj.with_context(|| format!("collecting episode {}", ep.id))
    })?;
    write_atomic(
        &ctx.input(output, TRAJECTORIES_FILE),
        &trajectories_to_jsonl(&trajs),
    )
}

pub fn detect_nodes(ctx: &Context, trajectories: Option<&Path>) -> anyhow::Result<()> {
    let (world, episodes) = ctx.world_and_episodes()?;
    let source = ctx.input(trajectories, TRAJECTORIES_FILE);
    let pairs = pair_with_episodes(&episodes, read_trajectories(&source)?, &source)?;
    let per_episode = ctx.par_map(&pairs, |(ep, traj)| {
        detect_all(&world, ep, traj, &ctx.config.detection)
            .with_context(|| format!("detecting nodes in {}", ep.id))
    })?;
    let nodes: Vec<KeyNode> = per_episode.into_iter().flatten().collect();
    log::info!("{} key nodes over {} episodes", nodes.len(), pairs.len());
    write_atomic(&ctx.path(NODES_FILE), &nodes_to_jsonl(&nodes))
}

/// Reasoning generated for one key node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletRecord {
    pub episode_id: String,
    pub step: usize,
    pub node_type: NodeType,
    #[serde(flatten)]
    pub triplet: ReasoningTriplet,
    pub format_retries: u32,
}

fn group_nodes(
    nodes: Vec<KeyNode>,
    pairs: &[(&Episode, Trajectory)],
    source: &Path,
) -> anyhow::Result<BTreeMap<String, Vec<KeyNode>>> {
    let steps: BTreeMap<&str, usize> = pairs
        .iter()
        .map(|(e, t)| (e.id.as_str(), t.steps.len()))
        .collect();
    let mut grouped: BTreeMap<String, Vec<KeyNode>> = BTreeMap::new();
    for node in nodes {
        let Some(&n) = steps.get(node.episode_id.as_str()) else {
            bail!(
                "{}: node for unknown episode {}",
                source.display(),
                node.episode_id
            );
        };
        node.validate(n)
            .with_context(|| format!("{}: node of episode {}", source.display(), node.episode_id))?;
        grouped.entry(node.episode_id.clone()).or_default().push(node);
    }
    Ok(grouped)
}

pub fn supervise(
    ctx: &Context,
    backend: Backend,
    trajectories: Option<&Path>,
    nodes: Option<&Path>,
) -> anyhow::Result<()> {
    if backend == Backend::Random {
        bail!("the random backend only drives rollouts; use mock or remote");
    }
    let (world, episodes) = ctx.world_and_episodes()?;
    let traj_source = ctx.input(trajectories, TRAJECTORIES_FILE);
    let pairs = pair_with_episodes(&episodes, read_trajectories(&traj_source)?, &traj_source)?;
    let node_source = ctx.input(nodes, NODES_FILE);
    let grouped = group_nodes(read_nodes(&node_source)?, &pairs, &node_source)?;
    let cfg = &ctx.config;
    let settings = cfg.retry_settings();

    let results = ctx.par_map(
        &pairs,
        |(ep, traj)| -> anyhow::Result<(Vec<TripletRecord>, Vec<TrainingSample>)> {
            let nodes = grouped.get(&ep.id).map(Vec::as_slice).unwrap_or_default();
            let mut reasoner: Box<dyn ReasonerBackend> = match backend {
                Backend::Remote => Box::new(RemoteReasoner::new(&cfg.remote)),
                _ => Box::new(MockReasoner),
            };
            let global = build_global_turn(&world, ep, traj, &cfg.detection.fov, cfg.global_frames)?;
            let mut records = Vec::with_capacity(nodes.len());
            for node in nodes {
                let turns = node_conversation(&global, node)?;
                let out = generate_reasoning(&mut reasoner, &turns, &settings).with_context(|| {
                    format!(
                        "reasoning for {} node at step {} of {}",
                        node.node_type, node.step, ep.id
                    )
                })?;
                records.push(TripletRecord {
                    episode_id: ep.id.clone(),
                    step: node.step,
                    node_type: node.node_type,
                    triplet: out.triplet,
                    format_retries: out.format_retries,
                });
            }
            let triplets: Vec<ReasoningTriplet> = records.iter().map(|r| r.triplet.clone()).collect();
            let samples = emit_training_samples(ep, traj, nodes, &triplets, &cfg.sample_config())?;
            Ok((records, samples))
        },
    )?;

    let mut triplet_text = String::new();
    let mut samples = Vec::new();
    for (records, s) in results {
        for r in records {
            triplet_text.push_str(&serde_json::to_string(&r)?);
            triplet_text.push('\n');
        }
        samples.extend(s);
    }
    log::info!("{} training samples", samples.len());
    write_atomic(&ctx.path(TRIPLETS_FILE), &triplet_text)?;
    write_atomic(&ctx.path(SAMPLES_FILE), &samples_to_jsonl(&samples))
}

pub fn rollout(ctx: &Context, backend: Backend) -> anyhow::Result<()> {
    let (world, episodes) = ctx.world_and_episodes()?;
    let cfg = &ctx.config;
    let rollout_cfg = cfg.rollout_config();
    let outcomes = ctx.par_map(
        &episodes,
        |ep| -> anyhow::Result<(Trajectory, Vec<ReasoningEntry>)> {
            let mut policy: Box<dyn PolicyBackend + '_> = match backend {
                Backend::Mock => Box::new(ScriptedExpert::new(&world, ep, cfg.expert.clone())),
                Backend::Random => Box::new(RandomBackend::new(
                    seeds::rng(cfg.seed, &format!("rollout/{}", ep.id), 0),
                    RandomBackendConfig::default(),
                )),
                Backend::Remote => Box::new(RemotePolicyBackend::new(&cfg.remote)),
            };
            let out = run_rollout(&world, ep, &mut policy, &rollout_cfg)?;
            if let Some(e) = &out.error {
                log::warn!("rollout {} aborted: {e}", ep.id);
            }
            for f in &out.parse_failures {
                log::debug!("rollout {} step {}: unparseable action {:?}", ep.id, f.t, f.text);
            }
            if !out.parse_failures.is_empty() {
                log::info!(
                    "rollout {}: {} unparseable actions",
                    ep.id,
                    out.parse_failures.len()
                );
            }
            Ok((out.trajectory, out.reasoning_log))
        },
    )?;
    let aborted = outcomes
        .iter()
        .filter(|(t, _)| t.terminated_by == TerminatedBy::Aborted)
        .count();
    let (trajs, logs): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    let log: Vec<ReasoningEntry> = logs.into_iter().flatten().collect();
    write_atomic(&ctx.path(ROLLOUT_FILE), &trajectories_to_jsonl(&trajs))?;
    write_atomic(&ctx.path(REASONING_FILE), &reasoning_log_to_jsonl(&log))?;
    if aborted > 0 {
        log::warn!("{aborted} of {} rollouts aborted on backend errors", trajs.len());
    }
    Ok(())
}

pub fn eval(ctx: &Context, trajectories: Option<&Path>) -> anyhow::Result<Report> {
    let (world, episodes) = ctx.world_and_episodes()?;
    let source = ctx.input(trajectories, TRAJECTORIES_FILE);
    let trajs = read_trajectories(&source)?;
    let report =
        evaluate(&trajs, &episodes, &world).with_context(|| format!("evaluating {}", source.display()))?;
    write_atomic(&ctx.path(REPORT_TEXT_FILE), &report.to_text())?;
    write_atomic(&ctx.path(REPORT_JSON_FILE), &report.to_json())?;
    Ok(report)
}

pub fn inspect(
    ctx: &Context,
    trajectories: Option<&Path>,
    nodes: Option<&Path>,
    episode: Option<&str>,
) -> anyhow::Result<Vec<PathBuf>> {
    let (world, episodes) = ctx.world_and_episodes()?;
    let traj_source = ctx.input(trajectories, TRAJECTORIES_FILE);
    let pairs = pair_with_episodes(&episodes, read_trajectories(&traj_source)?, &traj_source)?;
    let node_source = ctx.input(nodes, NODES_FILE);
    let grouped = if node_source.exists() || nodes.is_some() {
        group_nodes(read_nodes(&node_source)?, &pairs, &node_source)?
    } else {
        BTreeMap::new()
    };
    if let Some(id) = episode {
        if !pairs.iter().any(|(e, _)| e.id == id) {
            bail!("episode {id} is not in {}", ctx.path(EPISODES_FILE).display());
        }
    }
    let dir = ctx.path(INSPECT_DIR);
    let mut written = Vec::new();
    for (ep, traj) in pairs.iter().filter(|(e, _)| episode.is_none_or(|id| e.id == id)) {
        let nodes = grouped.get(&ep.id).map(Vec::as_slice).unwrap_or_default();
        let text = dir.join(format!("{}.txt", ep.id));
        let svg = dir.join(format!("{}.svg", ep.id));
        write_atomic(&text, &inspect::render_text(&world, ep, traj, nodes))?;
        write_atomic(&svg, &inspect::render_svg(&world, ep, traj, nodes))?;
        written.push(text);
        written.push(svg);
    }
    Ok(written)
}
