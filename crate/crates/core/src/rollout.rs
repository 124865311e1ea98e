//! Lock-step episode collection for any number of per-UE policies.

use rand::Rng;

use crate::env::{Env, Observation, Transition};
use crate::net::{self, PolicyParams};
use crate::ppo::RolloutBuffer;
use crate::Result;

/// An environment together with the observations the UEs currently hold.
#[derive(Debug, Clone)]
pub struct Runner {
    pub env: Env,
    pub obs: Vec<Observation>,
}

/// Per-episode aggregates plus the per-UE experience.
#[derive(Debug, Clone)]
pub struct EpisodeRollout {
    pub buffers: Vec<RolloutBuffer>,
    /// Mean joint reward per step.
    pub reward: f64,
    /// Mean summed energy efficiency per step, bits/J.
    pub sum_ee: f64,
    /// Fraction of steps with at least one collision.
    pub collision_rate: f64,
    /// Mean categorical entropy over UEs and steps.
    pub entropy_channel: f64,
    pub entropy_power: f64,
    /// Per-UE collision-free step counts within the episode.
    pub successes: Vec<u64>,
    pub steps: usize,
}

impl Runner {
    pub fn new(env: Env, obs: Vec<Observation>) -> Self {
        Runner { env, obs }
    }

    /// Runs one episode with UE `i` acting from `policies[i]`.
    pub fn run_episode<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &mut self,
        policies: &[&PolicyParams],
        env_rng: &mut R1,
        policy_rng: &mut R2,
    ) -> Result<EpisodeRollout> {
        let n_ues = self.env.n_ues();
        assert_eq!(policies.len(), n_ues, "one policy per UE");
        let layouts: Vec<_> = policies.iter().map(|p| p.topology.layout()).collect();
        let scenario = self.env.scenario().clone();
        let mut buffers = vec![RolloutBuffer::new(); n_ues];
        let mut outs: Vec<_> = (0..n_ues)
            .map(|i| net::forward_cached(policies[i], &layouts[i], &self.obs[i].features).0)
            .collect();
        let (mut reward, mut sum_ee, mut collisions, mut h_ch, mut h_pw) = (0.0, 0.0, 0usize, 0.0, 0.0);
        let mut successes = vec![0u64; n_ues];
        let mut steps = 0;
        loop {
            let samples: Vec<_> = outs.iter().map(|o| net::sample_action(o, &scenario, policy_rng)).collect();
            let actions: Vec<_> = samples.iter().map(|s| s.action).collect();
            let step = self.env.joint_step(&actions, env_rng)?;
            let next_outs: Vec<_> = (0..n_ues)
                .map(|i| net::forward_cached(policies[i], &layouts[i], &step.next_obs[i].features).0)
                .collect();
            for i in 0..n_ues {
                buffers[i].push(Transition {
                    obs: self.obs[i].clone(),
                    action: samples[i].action,
                    reward: step.reward,
                    next_obs: step.next_obs[i].clone(),
                    log_prob_channel: samples[i].log_prob_channel,
                    log_prob_power: samples[i].log_prob_power,
                    value_estimate: outs[i].value,
                    next_value_estimate: next_outs[i].value,
                    done: step.episode_end,
                });
                h_ch += samples[i].entropy_channel;
                h_pw += samples[i].entropy_power;
                if step.stats.success[i] {
                    successes[i] += 1;
                }
            }
            reward += step.reward;
            sum_ee += step.stats.sum_ee();
            if step.stats.collision {
                collisions += 1;
            }
            steps += 1;
            self.obs = step.next_obs;
            outs = next_outs;
            if step.episode_end {
                break;
            }
        }
        let s = steps as f64;
        let su = s * n_ues as f64;
        Ok(EpisodeRollout {
            buffers,
            reward: reward / s,
            sum_ee: sum_ee / s,
            collision_rate: collisions as f64 / s,
            entropy_channel: h_ch / su,
            entropy_power: h_pw / su,
            successes,
            steps,
        })
    }
}
