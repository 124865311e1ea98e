//! Meta-training of one initialization across tasks with different UE counts.
//!
//! Every epoch, the current global policy is rolled out for one episode in
//! each task, with all of the task's UEs acting from the same parameters.
//! The resulting transitions are pooled at the BS, minibatches are sampled
//! from the pool and the single global model takes PPO/Adam steps on them.
//! The pool is emptied after the update so that every ratio is taken
//! against the policy that produced the data.
//!
//! This is pooled multi-task pre-training, not second-order MAML: there is
//! no inner adaptation loop.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ScenarioConfig;
use crate::env::{Env, EnvConfig};
use crate::net::{Adam, AdamConfig, PolicyParams};
use crate::ppo::{self, PpoConfig, TrainSample};
use crate::rng::{self, STREAM_BATCH, STREAM_ENV, STREAM_POLICY};
use crate::rollout::Runner;
use crate::{Error, Result};

/// One meta task: a scenario with a given number of UEs.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub n_ues: usize,
    pub scenario: ScenarioConfig,
    pub seed: u64,
}

impl TaskSpec {
    pub fn new(n_ues: usize, scenario: ScenarioConfig, seed: u64) -> Self {
        TaskSpec { n_ues, scenario, seed }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let n = self.scenario.n_subchannels();
        if self.n_ues == 0 || self.n_ues > n {
            return Err(Error::TooManyUes {
                ues: self.n_ues,
                subchannels: n,
            });
        }
        Ok(())
    }
}

/// Transitions pooled at the BS, each tagged with its task.
#[derive(Debug, Clone, Default)]
pub struct CentralDataset {
    items: Vec<(usize, TrainSample)>,
}

impl CentralDataset {
    pub fn push(&mut self, task: usize, sample: TrainSample) {
        self.items.push((task, sample));
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }

    pub fn task_of(&self, k: usize) -> usize {
        self.items[k].0
    }

    pub fn sample(&self, k: usize) -> &TrainSample {
        &self.items[k].1
    }
}

/// Uniform sample without replacement; the whole dataset when it is smaller
/// than the batch.
pub fn sample_batch<'a, R: Rng + ?Sized>(
    dataset: &'a CentralDataset,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<&'a TrainSample>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let amount = batch_size.min(dataset.len());
    Ok(index::sample(rng, dataset.len(), amount)
        .into_iter()
        .map(|k| dataset.sample(k))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    pub n_epochs: usize,
    pub meta_lr: f64,
    pub batch_size: usize,
    pub ppo: PpoConfig,
    pub env: EnvConfig,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            n_epochs: 150,
            meta_lr: 5e-7,
            batch_size: 256,
            ppo: PpoConfig::default(),
            env: EnvConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-step reward of each task's episode.
    pub task_rewards: Vec<f64>,
    pub sum_reward: f64,
    /// Pool size right before the update.
    pub dataset_len: usize,
    pub gradient_steps: usize,
}

#[derive(Debug, Clone)]
pub struct MetaOutcome {
    pub params: PolicyParams,
    pub epochs: Vec<EpochRecord>,
}

/// Pooled multi-task PPO on a single global model.
///
/// Each epoch takes `ppo.epochs * ceil(|M| / batch_size)` Adam steps, each on
/// a fresh [`sample_batch`] draw.
pub fn meta_train(initial: PolicyParams, tasks: &[TaskSpec], cfg: &MetaConfig, seed: u64) -> Result<MetaOutcome> {
    if tasks.is_empty() {
        return Err(Error::Config("meta-training needs at least one task".into()));
    }
    cfg.ppo.validate()?;
    if cfg.batch_size == 0 {
        return Err(Error::Config("meta batch_size must be positive".into()));
    }
    let n = tasks[0].scenario.n_subchannels();
    for t in tasks {
        t.validate()?;
        if t.scenario.n_subchannels() != n {
            return Err(Error::Config("all meta tasks must share the subchannel count".into()));
        }
    }
    if initial.topology.n_channels != n || initial.topology.input != n + 2 {
        return Err(Error::TopologyMismatch);
    }

    let mut env_rngs: Vec<_> = tasks.iter().map(|t| rng::stream(t.seed, STREAM_ENV)).collect();
    let mut runners = Vec::with_capacity(tasks.len());
    for (t, r) in tasks.iter().zip(env_rngs.iter_mut()) {
        let (env, obs) = Env::reset(t, cfg.env, r)?;
        runners.push(Runner::new(env, obs));
    }
    let mut policy_rng = rng::stream(seed, STREAM_POLICY);
    let mut batch_rng = rng::stream(seed, STREAM_BATCH);

    let mut theta = initial;
    let mut adam = Adam::new(theta.weights.len(), AdamConfig::with_lr(cfg.meta_lr));
    let mut dataset = CentralDataset::default();
    let mut epochs = Vec::with_capacity(cfg.n_epochs);

    for epoch in 0..cfg.n_epochs {
        let mut task_rewards = Vec::with_capacity(tasks.len());
        for (k, (runner, env_rng)) in runners.iter_mut().zip(env_rngs.iter_mut()).enumerate() {
            let policies = vec![&theta; runner.env.n_ues()];
            let episode = runner.run_episode(&policies, env_rng, &mut policy_rng)?;
            task_rewards.push(episode.reward);
            for buffer in &episode.buffers {
                for sample in buffer.finish(&cfg.ppo) {
                    dataset.push(k, sample);
                }
            }
        }
        let dataset_len = dataset.len();
        let steps = cfg.ppo.epochs * dataset_len.div_ceil(cfg.batch_size);
        for _ in 0..steps {
            let batch = sample_batch(&dataset, cfg.batch_size, &mut batch_rng)?;
            ppo::gradient_step(&mut theta, &mut adam, &batch, &cfg.ppo);
        }
        dataset.clear();
        let sum_reward = task_rewards.iter().sum();
        log::debug!("meta epoch {epoch}: sum reward {sum_reward:.4}");
        epochs.push(EpochRecord {
            epoch,
            task_rewards,
            sum_reward,
            dataset_len,
            gradient_steps: steps,
        });
    }
    Ok(MetaOutcome { params: theta, epochs })
}
