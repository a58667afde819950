//! Command-line pipeline: world generation, trajectory collection, key-node detection,
//! supervision, rollouts, evaluation and trace inspection.

pub mod commands;
pub mod config;
pub mod inspect;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{Backend, CollectMode, Context};
use config::{Overrides, PipelineConfig};

#[derive(Debug, Parser)]
#[command(name = "vlnkit", version, about = "Reason-act navigation data pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML pipeline configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory holding inputs and outputs.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Number of episodes to generate.
    #[arg(long, global = true)]
    pub episodes: Option<usize>,
    /// Rollout iteration budget.
    #[arg(long, global = true)]
    pub step_budget: Option<usize>,
    /// Path-deviation threshold in meters.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Base URL of the remote policy/reasoner service.
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    /// Trajectory file to read (or, for collect, to write).
    #[arg(long, global = true)]
    pub trajectories: Option<PathBuf>,
    /// Key-node file to read.
    #[arg(long, global = true)]
    pub nodes: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a synthetic floorplan and its episodes.
    GenWorld,
    /// Collect one trajectory per episode.
    Collect {
        #[arg(long, value_enum, default_value = "gt")]
        mode: CollectMode,
    },
    /// Detect key reasoning nodes in collected trajectories.
    DetectNodes,
    /// Generate reasoning for key nodes and emit training samples.
    Supervise {
        #[arg(long, value_enum, default_value = "mock")]
        backend: Backend,
    },
    /// Run the reason/act loop on every episode.
    Rollout {
        #[arg(long, value_enum, default_value = "mock")]
        backend: Backend,
    },
    /// Score trajectories against their episodes.
    Eval,
    /// Render trajectories with their key nodes as text and SVG.
    Inspect {
        /// Only this episode id.
        #[arg(long)]
        episode: Option<String>,
    },
    /// Print the resolved configuration as TOML.
    ShowConfig,
}

impl GlobalArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            threshold: self.threshold,
            episodes: self.episodes,
            step_budget: self.step_budget,
            endpoint: self.endpoint.clone(),
        }
    }

    pub fn context(&self) -> anyhow::Result<Context> {
        Ok(Context {
            config: PipelineConfig::resolve(self.config.as_deref(), &self.overrides())?,
            out_dir: self.out_dir.clone(),
            jobs: self.jobs,
        })
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = cli.global.context()?;
    let g = &cli.global;
    match cli.command {
        Command::GenWorld => commands::gen_world(&ctx),
        Command::Collect { mode } => commands::collect(&ctx, mode, g.trajectories.as_deref()),
        Command::DetectNodes => commands::detect_nodes(&ctx, g.trajectories.as_deref()),
        Command::Supervise { backend } => {
            commands::supervise(&ctx, backend, g.trajectories.as_deref(), g.nodes.as_deref())
        }
        Command::Rollout { backend } => commands::rollout(&ctx, backend),
        Command::Eval => {
            let report = commands::eval(&ctx, g.trajectories.as_deref())?;
            print!("{}", report.to_text());
            Ok(())
        }
        Command::Inspect { episode } => {
            for p in commands::inspect(
                &ctx,
                g.trajectories.as_deref(),
                g.nodes.as_deref(),
                episode.as_deref(),
            )? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::ShowConfig => {
            print!("{}", ctx.config.to_toml());
            Ok(())
        }
    }
}

/// Parse `args` (program name first) and run.
pub fn run_from<I, T>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run(Cli::try_parse_from(args)?)
}
