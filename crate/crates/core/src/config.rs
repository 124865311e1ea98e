//! Experiment configuration files.
//!
//! One TOML file per experiment. Every section and key is optional and
//! falls back to the built-in defaults; unknown keys are rejected.
//!
//! ```toml
//! [run]
//! seed = 7
//!
//! [scenario]          # adaptation and evaluation scenario
//! kind = "indoor_office"
//! bandwidths_mhz = [0.36, 0.72, 1.44]
//!
//! [meta]
//! scenario = "urban_micro"
//! task_ues = [2, 4, 8]
//! n_epochs = 150
//!
//! [adapt]
//! n_ues = 6
//! n_episodes = 1000
//! weighting = "success_weighted"
//!
//! [net]
//! trunk = [512, 256]
//! critic_hidden = 128
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::VariantConfig;
use crate::channel::{ScenarioConfig, ScenarioKind, DEFAULT_BANDWIDTHS_MHZ};
use crate::env::EnvConfig;
use crate::fed::{FedConfig, Weighting};
use crate::meta::{MetaConfig, TaskSpec};
use crate::net::Topology;
use crate::ppo::PpoConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { seed: 1 }
    }
}

/// Scenario preset plus optional overrides of individual constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    pub bandwidths_mhz: Vec<f64>,
    pub carrier_freq_ghz: Option<f64>,
    pub area_side_m: Option<f64>,
    pub bs_height_m: Option<f64>,
    pub noise_psd_dbm_hz: Option<f64>,
    pub p_max_dbm: Option<f64>,
    pub p_min_dbm: Option<f64>,
    pub gamma_min_db: Option<f64>,
    pub shadowing_sigma_db: Option<f64>,
    pub per_subchannel_shadowing: Option<bool>,
    pub max_speed_mps: Option<f64>,
    pub large_scale_update_period_steps: Option<u64>,
    pub fast_fading_update_period_steps: Option<u64>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            kind: ScenarioKind::IndoorOffice,
            bandwidths_mhz: DEFAULT_BANDWIDTHS_MHZ.to_vec(),
            carrier_freq_ghz: None,
            area_side_m: None,
            bs_height_m: None,
            noise_psd_dbm_hz: None,
            p_max_dbm: None,
            p_min_dbm: None,
            gamma_min_db: None,
            shadowing_sigma_db: None,
            per_subchannel_shadowing: None,
            max_speed_mps: None,
            large_scale_update_period_steps: None,
            fast_fading_update_period_steps: None,
        }
    }
}

impl ScenarioSection {
    /// The configured scenario with the preset of `kind`.
    pub fn build_as(&self, kind: ScenarioKind) -> Result<ScenarioConfig> {
        let mut s = ScenarioConfig::preset(kind).with_bandwidths_hz(self.bandwidths_mhz.iter().map(|b| b * 1e6).collect());
        if let Some(f) = self.carrier_freq_ghz {
            s.carrier_freq_ghz = vec![f; s.n_subchannels()];
        }
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { s.$field = v; })*
            };
        }
        apply!(
            area_side_m,
            bs_height_m,
            noise_psd_dbm_hz,
            p_max_dbm,
            p_min_dbm,
            gamma_min_db,
            shadowing_sigma_db,
            per_subchannel_shadowing,
            max_speed_mps,
            large_scale_update_period_steps,
            fast_fading_update_period_steps
        );
        s.validate()?;
        Ok(s)
    }

    pub fn build(&self) -> Result<ScenarioConfig> {
        self.build_as(self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaSection {
    /// Propagation preset of the meta tasks; the rest of `[scenario]` is shared.
    pub scenario: ScenarioKind,
    pub task_ues: Vec<usize>,
    pub n_epochs: usize,
    pub meta_lr: f64,
    pub batch_size: usize,
}

impl Default for MetaSection {
    fn default() -> Self {
        let d = MetaConfig::default();
        MetaSection {
            scenario: ScenarioKind::UrbanMicro,
            task_ues: vec![2, 4, 8],
            n_epochs: d.n_epochs,
            meta_lr: d.meta_lr,
            batch_size: d.batch_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptSection {
    pub n_ues: usize,
    pub n_episodes: usize,
    pub averaging_period: usize,
    pub weighting: Weighting,
    pub adaptation_lr: f64,
    pub checkpoint_episodes: Vec<usize>,
}

impl Default for AdaptSection {
    fn default() -> Self {
        let d = FedConfig::default();
        AdaptSection {
            n_ues: 6,
            n_episodes: d.n_episodes,
            averaging_period: d.averaging_period,
            weighting: d.weighting,
            adaptation_lr: d.adaptation_lr,
            checkpoint_episodes: d.checkpoint_episodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    pub trunk: Vec<usize>,
    pub critic_hidden: usize,
}

impl Default for NetSection {
    fn default() -> Self {
        let t = Topology::standard(1);
        NetSection {
            trunk: t.trunk,
            critic_hidden: t.critic_hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub n_distributions: usize,
    pub n_steps: usize,
    /// Sample actions instead of taking the argmax channel and mean power.
    pub stochastic: bool,
    /// UE counts for the sweep over the number of users; empty disables it.
    pub sweep_ues: Vec<usize>,
    pub oracle_grid_points: usize,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            n_distributions: 100,
            n_steps: 100,
            stochastic: false,
            sweep_ues: Vec::new(),
            oracle_grid_points: 25,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub scenario: ScenarioSection,
    pub meta: MetaSection,
    pub adapt: AdaptSection,
    pub ppo: PpoConfig,
    pub env: EnvConfig,
    pub net: NetSection,
    pub evaluate: EvaluateSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_toml(&text).map_err(|message| Error::ConfigFile {
            path: path.to_path_buf(),
            message,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let scenario = self.scenario()?;
        self.ppo.validate()?;
        self.fed().validate()?;
        self.topology().validate()?;
        let n = scenario.n_subchannels();
        for &i in self.meta.task_ues.iter().chain([self.adapt.n_ues].iter()).chain(&self.evaluate.sweep_ues) {
            if i == 0 || i > n {
                return Err(Error::TooManyUes { ues: i, subchannels: n });
            }
        }
        if self.env.episode_len == 0 {
            return Err(Error::Config("env.episode_len must be positive".into()));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<ScenarioConfig> {
        self.scenario.build()
    }

    pub fn meta_scenario(&self) -> Result<ScenarioConfig> {
        self.scenario.build_as(self.meta.scenario)
    }

    pub fn n_subchannels(&self) -> usize {
        self.scenario.bandwidths_mhz.len()
    }

    pub fn topology(&self) -> Topology {
        Topology::new(self.n_subchannels(), self.net.trunk.clone(), self.net.critic_hidden)
    }

    pub fn meta_config(&self) -> MetaConfig {
        MetaConfig {
            n_epochs: self.meta.n_epochs,
            meta_lr: self.meta.meta_lr,
            batch_size: self.meta.batch_size,
            ppo: self.ppo,
            env: self.env,
        }
    }

    /// Meta tasks, each with its own environment seed derived from `seed`.
    pub fn meta_tasks(&self, seed: u64) -> Result<Vec<TaskSpec>> {
        let scenario = self.meta_scenario()?;
        Ok(self
            .meta
            .task_ues
            .iter()
            .enumerate()
            .map(|(k, &i)| TaskSpec::new(i, scenario.clone(), derive_seed(seed, 1 + k as u64)))
            .collect())
    }

    pub fn adapt_task(&self, seed: u64) -> Result<TaskSpec> {
        Ok(TaskSpec::new(self.adapt.n_ues, self.scenario()?, derive_seed(seed, 0)))
    }

    pub fn fed(&self) -> FedConfig {
        FedConfig {
            averaging_period: self.adapt.averaging_period,
            weighting: self.adapt.weighting,
            adaptation_lr: self.adapt.adaptation_lr,
            n_episodes: self.adapt.n_episodes,
            checkpoint_episodes: self.adapt.checkpoint_episodes.clone(),
            freeze_after: None,
        }
    }

    pub fn variant_config(&self) -> VariantConfig {
        VariantConfig {
            fed: self.fed(),
            ppo: self.ppo,
            env: self.env,
            topology: self.topology(),
        }
    }
}

/// Mixes a run seed with a small tag (splitmix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
