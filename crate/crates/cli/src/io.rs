use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use vlnkit_core::data_engine::{nodes_from_jsonl, KeyNode};
use vlnkit_core::kinematics::{trajectories_from_jsonl, Trajectory};
use vlnkit_core::world::{load_episodes, load_world, Episode, SceneWorld};

pub const WORLD_FILE: &str = "world.json";
pub const EPISODES_FILE: &str = "episodes.json";
pub const TRAJECTORIES_FILE: &str = "trajectories.jsonl";
pub const NODES_FILE: &str = "nodes.jsonl";
pub const TRIPLETS_FILE: &str = "triplets.jsonl";
pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const ROLLOUT_FILE: &str = "rollout.jsonl";
pub const REASONING_FILE: &str = "reasoning.jsonl";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const INSPECT_DIR: &str = "inspect";

/// Write through a temporary file in the target directory, then rename over the target.
pub fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp =
        tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("writing {}", path.display()))?;
    tmp.write_all(contents.as_bytes())
        .and_then(|_| tmp.as_file().sync_all())
        .with_context(|| format!("writing {}", path.display()))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("{}: cannot read file", path.display()))
}

pub fn read_world(path: &Path) -> anyhow::Result<SceneWorld> {
    load_world(path).with_context(|| format!("{}: invalid world file", path.display()))
}

pub fn read_episodes(path: &Path, world: &SceneWorld) -> anyhow::Result<Vec<Episode>> {
    load_episodes(path, world).with_context(|| format!("{}: invalid episodes file", path.display()))
}

pub fn read_trajectories(path: &Path) -> anyhow::Result<Vec<Trajectory>> {
    trajectories_from_jsonl(&read(path)?)
        .with_context(|| format!("{}: invalid trajectory file", path.display()))
}

pub fn read_nodes(path: &Path) -> anyhow::Result<Vec<KeyNode>> {
    nodes_from_jsonl(&read(path)?).with_context(|| format!("{}: invalid key-node file", path.display()))
}

/// Trajectories reordered to follow `episodes`; every episode needs exactly one.
pub fn pair_with_episodes<'a>(
    episodes: &'a [Episode],
    trajs: Vec<Trajectory>,
    source: &Path,
) -> anyhow::Result<Vec<(&'a Episode, Trajectory)>> {
    let mut by_id = std::collections::HashMap::new();
    for t in trajs {
        let id = t.episode_id.clone();
        if by_id.insert(id.clone(), t).is_some() {
            anyhow::bail!("{}: episode_id {id} appears twice", source.display());
        }
    }
    let mut out = Vec::with_capacity(episodes.len());
    for ep in episodes {
        let traj = by_id
            .remove(&ep.id)
            .with_context(|| format!("{}: no trajectory for episode {}", source.display(), ep.id))?;
        out.push((ep, traj));
    }
    if let Some(extra) = by_id.keys().min() {
        anyhow::bail!(
            "{}: episode_id {extra} is not in the episode file",
            source.display()
        );
    }
    Ok(out)
}
