//! Local adaptation at the UEs with periodic federated averaging at the BS.
//!
//! Every UE starts from the same broadcast parameters and trains its own
//! copy with PPO on its own experience, while all UEs act in one shared cell
//! and receive the same team reward. Every `averaging_period` episodes the
//! BS forms a convex combination of the local models and broadcasts it back.

use serde::{Deserialize, Serialize};

use crate::env::{Env, EnvConfig, SuccessTracker};
use crate::meta::TaskSpec;
use crate::net::{Adam, AdamConfig, PolicyParams};
use crate::ppo::{self, PpoConfig};
use crate::rng::{self, STREAM_BATCH, STREAM_ENV, STREAM_POLICY};
use crate::rollout::Runner;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Weights proportional to local sample counts.
    SizeWeighted,
    /// Weights proportional to per-UE success rates.
    SuccessWeighted,
    /// No averaging: UEs train independently.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FedConfig {
    pub averaging_period: usize,
    pub weighting: Weighting,
    pub adaptation_lr: f64,
    pub n_episodes: usize,
    /// Episode counts after which the local models are stored.
    pub checkpoint_episodes: Vec<usize>,
    /// Stop learning (and averaging) once this many episodes are done.
    pub freeze_after: Option<usize>,
}

impl Default for FedConfig {
    fn default() -> Self {
        FedConfig {
            averaging_period: 100,
            weighting: Weighting::SuccessWeighted,
            adaptation_lr: 1e-6,
            n_episodes: 1000,
            checkpoint_episodes: vec![500],
            freeze_after: None,
        }
    }
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.averaging_period == 0 {
            return Err(Error::Config("averaging_period must be at least 1".into()));
        }
        if !(self.adaptation_lr >= 0.0) {
            return Err(Error::Config("adaptation_lr must be non-negative".into()));
        }
        Ok(())
    }

    /// Episode counts after which averaging happens: multiples of the period
    /// strictly inside the run and before any freeze.
    pub fn averaging_schedule(&self) -> Vec<usize> {
        if self.weighting == Weighting::None {
            return Vec::new();
        }
        let stop = self.freeze_after.unwrap_or(self.n_episodes).min(self.n_episodes);
        (1..)
            .map(|k| k * self.averaging_period)
            .take_while(|&e| e < stop)
            .collect()
    }
}

/// Convex combination `sum w_i W_i / sum w_i`, evaluated as an offset from
/// the first model so that identical inputs come back bit-identical.
pub fn weighted_average(models: &[PolicyParams], weights: &[f64]) -> Result<PolicyParams> {
    let first = models.first().ok_or(Error::NoModels)?;
    if weights.len() != models.len() {
        return Err(Error::InvalidWeights);
    }
    if models.iter().any(|m| !m.same_topology(first)) {
        return Err(Error::TopologyMismatch);
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidWeights);
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidWeights);
    }
    let mut out = first.clone();
    for (m, &w) in models.iter().zip(weights).skip(1) {
        let alpha = w / total;
        if alpha == 0.0 {
            continue;
        }
        for (o, (&x, &x0)) in out.weights.iter_mut().zip(m.weights.iter().zip(&first.weights)) {
            *o += alpha * (x - x0);
        }
    }
    Ok(out)
}

/// Average weighted by local batch sizes.
pub fn fedavg_size_weighted(models: &[PolicyParams], batch_sizes: &[f64]) -> Result<PolicyParams> {
    weighted_average(models, batch_sizes)
}

/// Average weighted by success rates; an all-zero rate vector degrades to
/// the plain mean.
pub fn fedavg_success_weighted(models: &[PolicyParams], success_rates: &[f64]) -> Result<PolicyParams> {
    if success_rates.len() == models.len() && !models.is_empty() && success_rates.iter().all(|&r| r == 0.0) {
        log::warn!("all success rates are zero; falling back to the unweighted mean");
        return weighted_average(models, &vec![1.0; models.len()]);
    }
    weighted_average(models, success_rates)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub reward: f64,
    pub entropy_channel: f64,
    pub entropy_power: f64,
    pub sum_ee: f64,
    pub collision_rate: f64,
    /// Success rate of each UE since adaptation started.
    pub eta: Vec<f64>,
    pub actor: f64,
    pub critic: f64,
    pub clip_fraction: f64,
    /// Averaging and broadcast happened after this episode.
    pub averaged: bool,
    /// No learning took place in this episode.
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub episode: usize,
    pub models: Vec<PolicyParams>,
}

#[derive(Debug, Clone)]
pub struct AdaptOutcome {
    pub models: Vec<PolicyParams>,
    pub metrics: Vec<EpisodeMetrics>,
    pub checkpoints: Vec<Checkpoint>,
    pub averaging_events: Vec<usize>,
}

/// Local PPO at every UE plus the configured federated averaging.
///
/// Checkpoints capture the local models before any averaging at the same
/// episode boundary.
pub fn adapt(
    initial: &PolicyParams,
    task: &TaskSpec,
    cfg: &FedConfig,
    ppo_cfg: &PpoConfig,
    env_cfg: EnvConfig,
    seed: u64,
) -> Result<AdaptOutcome> {
    cfg.validate()?;
    ppo_cfg.validate()?;
    task.validate()?;
    let n = task.scenario.n_subchannels();
    if initial.topology.n_channels != n || initial.topology.input != n + 2 {
        return Err(Error::TopologyMismatch);
    }
    let mut env_rng = rng::stream(task.seed, STREAM_ENV);
    let mut policy_rng = rng::stream(seed, STREAM_POLICY);
    let mut batch_rng = rng::stream(seed, STREAM_BATCH);
    let (env, obs) = Env::reset(task, env_cfg, &mut env_rng)?;
    let mut runner = Runner::new(env, obs);

    let n_ues = task.n_ues;
    let mut models = vec![initial.clone(); n_ues];
    let mut optimizers = vec![Adam::new(initial.weights.len(), AdamConfig::with_lr(cfg.adaptation_lr)); n_ues];
    let mut round = SuccessTracker::new(n_ues);
    let mut round_samples = vec![0.0; n_ues];
    let schedule = cfg.averaging_schedule();
    let mut metrics = Vec::with_capacity(cfg.n_episodes);
    let mut checkpoints = Vec::new();
    let mut averaging_events = Vec::new();

    for episode in 0..cfg.n_episodes {
        let frozen = cfg.freeze_after.is_some_and(|f| episode >= f);
        let policies: Vec<&PolicyParams> = models.iter().collect();
        let rollout = runner.run_episode(&policies, &mut env_rng, &mut policy_rng)?;
        round.add_counts(&rollout.successes, rollout.steps as u64);

        let (mut actor, mut critic, mut clip) = (0.0, 0.0, 0.0);
        if !frozen {
            for i in 0..n_ues {
                let samples = rollout.buffers[i].finish(ppo_cfg);
                round_samples[i] += samples.len() as f64;
                let d = ppo::update(&mut models[i], &mut optimizers[i], &samples, ppo_cfg, &mut batch_rng);
                actor += d.terms.actor / n_ues as f64;
                critic += d.terms.critic / n_ues as f64;
                clip += d.terms.clip_fraction / n_ues as f64;
            }
        }

        let done = episode + 1;
        if cfg.checkpoint_episodes.contains(&done) {
            checkpoints.push(Checkpoint {
                episode: done,
                models: models.clone(),
            });
        }
        let averaged = schedule.contains(&done);
        if averaged {
            let global = match cfg.weighting {
                Weighting::SizeWeighted => fedavg_size_weighted(&models, &round_samples)?,
                Weighting::SuccessWeighted => fedavg_success_weighted(&models, &round.rates())?,
                Weighting::None => unreachable!("no schedule without weighting"),
            };
            models.iter_mut().for_each(|m| m.clone_from(&global));
            round.reset();
            round_samples.iter_mut().for_each(|s| *s = 0.0);
            averaging_events.push(done);
        }

        metrics.push(EpisodeMetrics {
            episode,
            reward: rollout.reward,
            entropy_channel: rollout.entropy_channel,
            entropy_power: rollout.entropy_power,
            sum_ee: rollout.sum_ee,
            collision_rate: rollout.collision_rate,
            eta: runner.env.tracker().rates(),
            actor,
            critic,
            clip_fraction: clip,
            averaged,
            frozen,
        });
    }

    Ok(AdaptOutcome {
        models,
        metrics,
        checkpoints,
        averaging_events,
    })
}
