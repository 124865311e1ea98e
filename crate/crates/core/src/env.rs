//! Multi-agent uplink allocation MDP.
//!
//! All UEs act simultaneously with one (subchannel, power) pair each and
//! share a single team reward: the scaled sum of per-UE energy efficiency
//! when the joint choice is collision free, and `(I_suc - I) / I` otherwise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelState, ScenarioConfig, UeState};
use crate::meta::TaskSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Joint steps per episode.
    pub episode_len: usize,
    /// Scale applied to energy efficiency (bits/J) to form the reward.
    pub reward_scale: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            episode_len: 100,
            reward_scale: 1e-7,
        }
    }
}

/// Local view of one UE: its own gains, the cell size and the step clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub gains: Vec<f64>,
    pub n_ues: usize,
    pub epoch: usize,
    /// Normalized network input, `gains.len() + 2` long.
    pub features: Vec<f64>,
}

impl Observation {
    pub fn new(gains: Vec<f64>, n_ues: usize, epoch: usize, episode_len: usize) -> Self {
        let n = gains.len();
        let mut features: Vec<f64> = gains.iter().map(|&h| normalize_gain(h)).collect();
        features.push(n_ues as f64 / n as f64);
        features.push(epoch as f64 / episode_len.max(1) as f64);
        Observation {
            gains,
            n_ues,
            epoch,
            features,
        }
    }
}

/// Maps a linear gain to `(log10 h + 8) / 4`, i.e. -80 dB to zero and
/// every 40 dB to one unit.
pub fn normalize_gain(h: f64) -> f64 {
    (h.log10() + 8.0) / 4.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub channel: usize,
    /// Unsquashed Gaussian sample.
    pub power_raw: f64,
    pub power_w: f64,
}

impl Action {
    /// Clips the raw sample to `[-1, 1]` and maps it affinely onto the dBm range.
    pub fn from_raw(channel: usize, power_raw: f64, scenario: &ScenarioConfig) -> Self {
        Action {
            channel,
            power_raw,
            power_w: map_power(power_raw, scenario),
        }
    }
}

pub fn map_power(power_raw: f64, scenario: &ScenarioConfig) -> f64 {
    let u = (power_raw.clamp(-1.0, 1.0) + 1.0) / 2.0;
    let dbm = scenario.p_min_dbm + u * (scenario.p_max_dbm - scenario.p_min_dbm);
    channel::dbm_to_w(dbm).clamp(scenario.p_min_w(), scenario.p_max_w())
}

/// One experience tuple plus the rollout-time quantities PPO needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_obs: Observation,
    pub log_prob_channel: f64,
    pub log_prob_power: f64,
    pub value_estimate: f64,
    /// Value of `next_obs` under the rollout policy.
    pub next_value_estimate: f64,
    /// Last step of an episode; GAE does not recurse across it.
    pub done: bool,
}

impl Transition {
    pub fn log_prob(&self) -> f64 {
        self.log_prob_channel + self.log_prob_power
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuccessTracker {
    pub beta: Vec<u64>,
    pub total: u64,
}

impl SuccessTracker {
    pub fn new(n_ues: usize) -> Self {
        SuccessTracker {
            beta: vec![0; n_ues],
            total: 0,
        }
    }

    pub fn record(&mut self, success: &[bool]) {
        for (b, &ok) in self.beta.iter_mut().zip(success) {
            if ok {
                *b += 1;
            }
        }
        self.total += 1;
    }

    /// Adds `steps` allocations at once, `successes[i]` of them successful for UE `i`.
    pub fn add_counts(&mut self, successes: &[u64], steps: u64) {
        for (b, &s) in self.beta.iter_mut().zip(successes) {
            *b += s.min(steps);
        }
        self.total += steps;
    }

    pub fn success_rate(&self, ue: usize) -> f64 {
        success_rate(self, ue)
    }

    pub fn rates(&self) -> Vec<f64> {
        (0..self.beta.len()).map(|i| self.success_rate(i)).collect()
    }

    pub fn reset(&mut self) {
        self.beta.iter_mut().for_each(|b| *b = 0);
        self.total = 0;
    }
}

/// `beta_i / T`, with a fresh tracker reporting zero.
pub fn success_rate(tracker: &SuccessTracker, ue: usize) -> f64 {
    if tracker.total == 0 {
        0.0
    } else {
        tracker.beta[ue] as f64 / tracker.total as f64
    }
}

/// `sum_t xi^t r_t`.
pub fn discounted_return(rewards: &[f64], xi: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + xi * acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    /// Energy efficiency credited to each UE, bits/J (zero when collided).
    pub ee: Vec<f64>,
    pub snr: Vec<f64>,
    /// Per-UE collision-free flags.
    pub success: Vec<bool>,
    pub n_success: usize,
    pub collision: bool,
}

impl StepStats {
    pub fn sum_ee(&self) -> f64 {
        self.ee.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub reward: f64,
    pub next_obs: Vec<Observation>,
    pub stats: StepStats,
    /// The step closed an episode.
    pub episode_end: bool,
}

/// Per-UE reward terms and the team reward for a joint action on fixed gains.
///
/// Exposed separately from [`Env::joint_step`] so that oracles and frozen
/// evaluations score actions exactly as training does.
pub fn score_joint_action(
    scenario: &ScenarioConfig,
    noise_w: &[f64],
    gains: &[&[f64]],
    actions: &[Action],
    reward_scale: f64,
) -> (f64, StepStats) {
    let n_ues = actions.len();
    let mut load = vec![0usize; scenario.n_subchannels()];
    for a in actions {
        load[a.channel] += 1;
    }
    let success: Vec<bool> = actions.iter().map(|a| load[a.channel] == 1).collect();
    let n_success = success.iter().filter(|&&s| s).count();
    let collision = n_success < n_ues;

    let mut ee = vec![0.0; n_ues];
    let mut snr = vec![0.0; n_ues];
    for (i, a) in actions.iter().enumerate() {
        let h = gains[i][a.channel];
        snr[i] = channel::snr(success[i], h, a.power_w, noise_w[a.channel]);
        if success[i] {
            ee[i] = credited_ee(scenario, noise_w, h, a.channel, a.power_w);
        }
    }
    let reward = if collision {
        (n_success as f64 - n_ues as f64) / n_ues as f64
    } else {
        reward_scale * ee.iter().sum::<f64>()
    };
    (
        reward,
        StepStats {
            ee,
            snr,
            success,
            n_success,
            collision,
        },
    )
}

/// Energy efficiency of a collision-free UE: its own power if the SNR floor
/// is met, otherwise the efficiency it gets at maximum power.
pub fn credited_ee(scenario: &ScenarioConfig, noise_w: &[f64], gain: f64, channel: usize, power_w: f64) -> f64 {
    let bw = scenario.subchannel_bandwidth_hz[channel];
    let gamma = channel::snr(true, gain, power_w, noise_w[channel]);
    let ee = if gamma > scenario.gamma_min_lin() {
        channel::energy_efficiency(bw, power_w, gamma, true)
    } else {
        let p_max = scenario.p_max_w();
        let gamma_max = channel::snr(true, gain, p_max, noise_w[channel]);
        channel::energy_efficiency(bw, p_max, gamma_max, true)
    };
    ee.expect("mapped powers are strictly positive")
}

/// One cell: UEs, their channels and the success bookkeeping.
#[derive(Debug, Clone)]
pub struct Env {
    scenario: ScenarioConfig,
    config: EnvConfig,
    noise_w: Vec<f64>,
    ues: Vec<UeState>,
    channel: ChannelState,
    tracker: SuccessTracker,
    step_in_episode: usize,
}

impl Env {
    /// Places the task's UEs and draws a fresh channel realization.
    pub fn reset<R: Rng + ?Sized>(task: &TaskSpec, config: EnvConfig, rng: &mut R) -> Result<(Self, Vec<Observation>)> {
        task.scenario.validate()?;
        let n = task.scenario.n_subchannels();
        if task.n_ues == 0 {
            return Err(Error::Config("a task needs at least one UE".into()));
        }
        if task.n_ues > n {
            return Err(Error::TooManyUes {
                ues: task.n_ues,
                subchannels: n,
            });
        }
        if config.episode_len == 0 {
            return Err(Error::Config("episode_len must be positive".into()));
        }
        let scenario = task.scenario.clone();
        let ues: Vec<UeState> = (0..task.n_ues).map(|_| UeState::random(&scenario, rng)).collect();
        let channel = ChannelState::new(&scenario, &ues, rng);
        let env = Env {
            noise_w: scenario.noise_powers_w(),
            scenario,
            config,
            ues,
            channel,
            tracker: SuccessTracker::new(task.n_ues),
            step_in_episode: 0,
        };
        let obs = env.observations();
        Ok((env, obs))
    }

    pub fn observations(&self) -> Vec<Observation> {
        (0..self.n_ues())
            .map(|i| {
                Observation::new(
                    self.channel.gain_lin.row(i).to_vec(),
                    self.n_ues(),
                    self.step_in_episode,
                    self.config.episode_len,
                )
            })
            .collect()
    }

    pub fn joint_step<R: Rng + ?Sized>(&mut self, actions: &[Action], rng: &mut R) -> Result<StepOutcome> {
        if actions.len() != self.n_ues() {
            return Err(Error::ActionCount {
                expected: self.n_ues(),
                actual: actions.len(),
            });
        }
        if let Some(a) = actions.iter().find(|a| a.channel >= self.scenario.n_subchannels()) {
            return Err(Error::Config(format!("subchannel {} does not exist", a.channel)));
        }
        let gains: Vec<&[f64]> = (0..self.n_ues()).map(|i| self.channel.gain_lin.row(i)).collect();
        let (reward, stats) = score_joint_action(&self.scenario, &self.noise_w, &gains, actions, self.config.reward_scale);
        self.tracker.record(&stats.success);
        self.channel.advance(&self.scenario, &mut self.ues, rng);
        self.step_in_episode += 1;
        let episode_end = self.step_in_episode >= self.config.episode_len;
        if episode_end {
            self.step_in_episode = 0;
        }
        Ok(StepOutcome {
            reward,
            next_obs: self.observations(),
            stats,
            episode_end,
        })
    }

    pub fn n_ues(&self) -> usize {
        self.ues.len()
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn noise_w(&self) -> &[f64] {
        &self.noise_w
    }

    pub fn channel(&self) -> &ChannelState {
        &self.channel
    }

    pub fn ues(&self) -> &[UeState] {
        &self.ues
    }

    pub fn tracker(&self) -> &SuccessTracker {
        &self.tracker
    }

    pub fn step_in_episode(&self) -> usize {
        self.step_in_episode
    }
}
