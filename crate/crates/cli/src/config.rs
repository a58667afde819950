use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use vlnkit_core::data_engine::{DetectionConfig, ErrorKind, NoisyExpertConfig};
use vlnkit_core::orchestrator::{RolloutConfig, ScriptedExpertConfig};
use vlnkit_core::remote::RemoteConfig;
use vlnkit_core::supervision::{ActEmission, RetrySettings, SampleConfig, GLOBAL_FRAMES};
use vlnkit_core::world::GenerationParams;

/// Noisy-expert settings; the per-episode seed is derived from the root seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSettings {
    pub error_probability: f64,
    pub kinds: Vec<ErrorKind>,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        let d = NoisyExpertConfig::default();
        Self {
            error_probability: d.error_probability,
            kinds: d.kinds,
        }
    }
}

impl NoiseSettings {
    pub fn with_seed(&self, seed: u64) -> NoisyExpertConfig {
        NoisyExpertConfig {
            error_probability: self.error_probability,
            kinds: self.kinds.clone(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub world: GenerationParams,
    pub detection: DetectionConfig,
    pub frames_k: usize,
    /// Frames attached to the whole-episode turn of a supervision conversation.
    pub global_frames: usize,
    pub act_emission: ActEmission,
    /// Re-queries after a malformed reasoner reply.
    pub format_retries: u32,
    pub noise: NoiseSettings,
    pub remote: RemoteConfig,
    pub step_budget: usize,
    pub expert: ScriptedExpertConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            world: GenerationParams::default(),
            detection: DetectionConfig::default(),
            frames_k: 8,
            global_frames: GLOBAL_FRAMES,
            act_emission: ActEmission::RunStart,
            format_retries: RetrySettings::default().format_retries,
            noise: NoiseSettings::default(),
            remote: RemoteConfig::default(),
            step_budget: RolloutConfig::default().step_budget,
            expert: ScriptedExpertConfig::default(),
        }
    }
}

/// Values given on the command line; each one replaces the file or default value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub episodes: Option<usize>,
    pub step_budget: Option<usize>,
    pub endpoint: Option<String>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("config {}", path.display()))
    }

    /// Defaults, then the optional file, then flags.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(t) = o.threshold {
            self.detection.deviation_threshold = t;
        }
        if let Some(n) = o.episodes {
            self.world.episode_count = n;
        }
        if let Some(b) = o.step_budget {
            self.step_budget = b;
        }
        if let Some(e) = &o.endpoint {
            self.remote.endpoint = e.clone();
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let d = &self.detection;
        if !(d.deviation_threshold.is_finite() && d.deviation_threshold > 0.0) {
            bail!(
                "detection.deviation_threshold must be positive, got {}",
                d.deviation_threshold
            );
        }
        if d.k_debounce == 0 {
            bail!("detection.k_debounce must be at least 1");
        }
        if d.context.window == 0 || d.context.stride == 0 {
            bail!("detection.context window and stride must be positive");
        }
        if self.frames_k == 0 {
            bail!("frames_k must be at least 1");
        }
        if self.global_frames == 0 {
            bail!("global_frames must be at least 1");
        }
        if self.step_budget == 0 {
            bail!("step_budget must be positive");
        }
        if self.remote.endpoint.trim().is_empty() {
            bail!("remote.endpoint is empty");
        }
        self.noise.with_seed(0).check().context("noise")?;
        Ok(())
    }

    pub fn sample_config(&self) -> SampleConfig {
        SampleConfig {
            frames_k: self.frames_k,
            act_emission: self.act_emission,
        }
    }

    pub fn rollout_config(&self) -> RolloutConfig {
        RolloutConfig {
            step_budget: self.step_budget,
            frames_k: self.frames_k,
            fov: self.detection.fov,
        }
    }

    pub fn retry_settings(&self) -> RetrySettings {
        RetrySettings {
            format_retries: self.format_retries,
            transport: self.remote.retry_policy(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
