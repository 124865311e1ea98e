//! Proximal policy optimization for the hybrid channel/power policy.
//!
//! The per-sample objective is
//!
//! ```text
//! L = min(ratio * A, g(eps, A)) - c1 * (r + xi * V_old(o') - V(o))^2 + c2 * (H_channel + H_power)
//! ```
//!
//! with `ratio = pi(a|o) / pi_old(a|o)`, where the joint log-probability is
//! the sum of the channel and power log-probabilities. Minibatches are
//! mean-reduced and maximized with Adam by descending on `-L`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Transition;
use crate::net::{self, Adam, HeadGrads, PolicyParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    /// Reward discount.
    pub xi: f64,
    /// GAE decay.
    pub lambda: f64,
    /// Clip range.
    pub epsilon: f64,
    pub c1: f64,
    pub c2: f64,
    /// Passes over a rollout per update.
    pub epochs: usize,
    pub minibatch_size: usize,
    pub normalize_advantages: bool,
    /// Discount the bootstrapped value inside the critic target.
    pub discount_critic_target: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            xi: 0.9,
            lambda: 0.98,
            epsilon: 0.2,
            c1: 0.5,
            c2: 0.01,
            epochs: 4,
            minibatch_size: 256,
            normalize_advantages: true,
            discount_critic_target: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.xi > 0.0
            && self.xi < 1.0
            && self.lambda > 0.0
            && self.lambda <= 1.0
            && self.epsilon > 0.0
            && self.epochs > 0
            && self.minibatch_size > 0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Config(
                "ppo needs 0 < xi < 1, 0 < lambda <= 1, epsilon > 0 and positive epochs/minibatch".into(),
            ))
        }
    }

    fn critic_discount(&self) -> f64 {
        if self.discount_critic_target {
            self.xi
        } else {
            1.0
        }
    }
}

/// `A_t = delta_t + lambda * xi * A_{t+1}` with
/// `delta_t = r_t + xi * V(o_{t+1}) - V(o_t)`, over one trajectory.
pub fn compute_gae(rewards: &[f64], values: &[f64], next_values: &[f64], xi: f64, lambda: f64) -> Vec<f64> {
    assert!(rewards.len() == values.len() && values.len() == next_values.len());
    let mut adv = vec![0.0; rewards.len()];
    let mut running = 0.0;
    for t in (0..rewards.len()).rev() {
        let delta = rewards[t] + xi * next_values[t] - values[t];
        running = delta + lambda * xi * running;
        adv[t] = running;
    }
    adv
}

pub fn clip_fn(epsilon: f64, advantage: f64) -> f64 {
    if advantage >= 0.0 {
        (1.0 + epsilon) * advantage
    } else {
        (1.0 - epsilon) * advantage
    }
}

pub fn clipped_objective(log_prob_new: f64, log_prob_old: f64, advantage: f64, epsilon: f64) -> f64 {
    let ratio = (log_prob_new - log_prob_old).exp();
    (ratio * advantage).min(clip_fn(epsilon, advantage))
}

pub fn critic_loss(reward: f64, value_next: f64, value_now: f64, xi: f64) -> f64 {
    let gap = reward + xi * value_next - value_now;
    gap * gap
}

/// Zero-mean, unit-variance rescaling. Left untouched below two samples or
/// when all advantages coincide.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.len() < 2 {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std < 1e-12 {
        return;
    }
    adv.iter_mut().for_each(|a| *a = (*a - mean) / (std + 1e-8));
}

/// A transition reduced to what the loss needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub features: Vec<f64>,
    pub channel: usize,
    pub power_raw: f64,
    pub log_prob_old: f64,
    pub advantage: f64,
    /// `r + xi * V_old(o')`, frozen at rollout time.
    pub value_target: f64,
}

/// On-policy storage for one agent.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    transitions: Vec<Transition>,
}

impl RolloutBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: Transition) {
        self.transitions.push(t);
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn clear(&mut self) {
        self.transitions.clear();
    }

    /// GAE per episode segment, then one training sample per transition.
    pub fn finish(&self, cfg: &PpoConfig) -> Vec<TrainSample> {
        let mut out = Vec::with_capacity(self.transitions.len());
        let mut start = 0;
        while start < self.transitions.len() {
            let end = self.transitions[start..]
                .iter()
                .position(|t| t.done)
                .map_or(self.transitions.len(), |p| start + p + 1);
            let seg = &self.transitions[start..end];
            let rewards: Vec<f64> = seg.iter().map(|t| t.reward).collect();
            let values: Vec<f64> = seg.iter().map(|t| t.value_estimate).collect();
            let next: Vec<f64> = seg.iter().map(|t| t.next_value_estimate).collect();
            let adv = compute_gae(&rewards, &values, &next, cfg.xi, cfg.lambda);
            for (t, a) in seg.iter().zip(adv) {
                out.push(TrainSample {
                    features: t.obs.features.clone(),
                    channel: t.action.channel,
                    power_raw: t.action.power_raw,
                    log_prob_old: t.log_prob(),
                    advantage: a,
                    value_target: t.reward + cfg.critic_discount() * t.next_value_estimate,
                });
            }
            start = end;
        }
        out
    }
}

/// Batch means of the objective terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossTerms {
    /// Clipped surrogate.
    pub actor: f64,
    /// Squared TD gap.
    pub critic: f64,
    /// Channel plus power entropy.
    pub entropy: f64,
    pub entropy_channel: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    /// Minimized quantity, `-(actor - c1 * critic + c2 * entropy)`.
    pub loss: f64,
}

/// Loss over a minibatch and its exact gradient. Advantages are used as
/// given; normalization happens before this call.
pub fn loss_and_gradient(params: &PolicyParams, batch: &[&TrainSample], cfg: &PpoConfig) -> (LossTerms, Vec<f64>) {
    let layout = params.topology.layout();
    let mut grad = vec![0.0; layout.n_weights];
    let mut terms = LossTerms::default();
    if batch.is_empty() {
        return (terms, grad);
    }
    let scale = 1.0 / batch.len() as f64;
    for s in batch {
        let (out, cache) = net::forward_cached(params, &layout, &s.features);
        let log_probs = net::log_softmax(&out.logits);
        let probs: Vec<f64> = log_probs.iter().map(|lp| lp.exp()).collect();
        let h_channel: f64 = -probs.iter().zip(&log_probs).map(|(p, lp)| p * lp).sum::<f64>();
        let h_power = net::gaussian_entropy(out.log_sigma);

        let inv_var = (-2.0 * out.log_sigma).exp();
        let diff = s.power_raw - out.mu;
        let log_prob = log_probs[s.channel] + net::gaussian_log_prob(s.power_raw, out.mu, out.log_sigma);
        let ratio = (log_prob - s.log_prob_old).exp();
        let unclipped = ratio * s.advantage;
        let clipped = clip_fn(cfg.epsilon, s.advantage);
        let actor = unclipped.min(clipped);
        // d actor / d log_prob; zero once the clipped branch is active.
        let a = if unclipped <= clipped { unclipped } else { 0.0 };
        let gap = s.value_target - out.value;

        terms.actor += actor;
        terms.critic += gap * gap;
        terms.entropy += h_channel + h_power;
        terms.entropy_channel += h_channel;
        terms.mean_ratio += ratio;
        if (ratio - 1.0).abs() > cfg.epsilon {
            terms.clip_fraction += 1.0;
        }

        let logits: Vec<f64> = (0..probs.len())
            .map(|k| {
                let onehot = if k == s.channel { 1.0 } else { 0.0 };
                let dh = -probs[k] * (log_probs[k] + h_channel);
                scale * (-a * (onehot - probs[k]) - cfg.c2 * dh)
            })
            .collect();
        let heads = HeadGrads {
            logits,
            mu: scale * (-a * diff * inv_var),
            log_sigma: scale * (-a * (diff * diff * inv_var - 1.0) - cfg.c2),
            value: scale * (-2.0 * cfg.c1 * gap),
        };
        net::backward(params, &layout, &cache, &heads, &mut grad);
    }
    terms.actor *= scale;
    terms.critic *= scale;
    terms.entropy *= scale;
    terms.entropy_channel *= scale;
    terms.mean_ratio *= scale;
    terms.clip_fraction *= scale;
    terms.loss = -(terms.actor - cfg.c1 * terms.critic + cfg.c2 * terms.entropy);
    (terms, grad)
}

/// Forward-only evaluation of [`loss_and_gradient`]'s loss.
pub fn loss_value(params: &PolicyParams, batch: &[&TrainSample], cfg: &PpoConfig) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let total: f64 = batch
        .iter()
        .map(|s| {
            let out = net::forward(params, &s.features);
            let log_prob = net::log_softmax(&out.logits)[s.channel] + net::gaussian_log_prob(s.power_raw, out.mu, out.log_sigma);
            let actor = clipped_objective(log_prob, s.log_prob_old, s.advantage, cfg.epsilon);
            let gap = s.value_target - out.value;
            let entropy = net::categorical_entropy(&out.logits) + net::gaussian_entropy(out.log_sigma);
            -(actor - cfg.c1 * gap * gap + cfg.c2 * entropy)
        })
        .sum();
    total / batch.len() as f64
}

/// One Adam step on one minibatch.
pub fn gradient_step(params: &mut PolicyParams, adam: &mut Adam, batch: &[&TrainSample], cfg: &PpoConfig) -> LossTerms {
    let normalized: Vec<TrainSample>;
    let batch: Vec<&TrainSample> = if cfg.normalize_advantages {
        let mut adv: Vec<f64> = batch.iter().map(|s| s.advantage).collect();
        normalize_advantages(&mut adv);
        normalized = batch
            .iter()
            .zip(adv)
            .map(|(s, a)| TrainSample {
                advantage: a,
                ..(*s).clone()
            })
            .collect();
        normalized.iter().collect()
    } else {
        batch.to_vec()
    };
    let (terms, grad) = loss_and_gradient(params, &batch, cfg);
    net::adam_step(params, adam, &grad);
    terms
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct UpdateDiagnostics {
    pub terms: LossTerms,
    pub gradient_steps: usize,
    /// Set when the buffer was empty and nothing was done.
    pub skipped: bool,
}

/// Several shuffled passes of minibatch steps over a finished rollout.
pub fn update<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    adam: &mut Adam,
    samples: &[TrainSample],
    cfg: &PpoConfig,
    rng: &mut R,
) -> UpdateDiagnostics {
    if samples.is_empty() {
        log::warn!("ppo update skipped: empty rollout buffer");
        return UpdateDiagnostics {
            skipped: true,
            ..Default::default()
        };
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut sum = LossTerms::default();
    let mut steps = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let batch: Vec<&TrainSample> = chunk.iter().map(|&k| &samples[k]).collect();
            let t = gradient_step(params, adam, &batch, cfg);
            sum.actor += t.actor;
            sum.critic += t.critic;
            sum.entropy += t.entropy;
            sum.entropy_channel += t.entropy_channel;
            sum.mean_ratio += t.mean_ratio;
            sum.clip_fraction += t.clip_fraction;
            sum.loss += t.loss;
            steps += 1;
        }
    }
    let k = steps as f64;
    UpdateDiagnostics {
        terms: LossTerms {
            actor: sum.actor / k,
            critic: sum.critic / k,
            entropy: sum.entropy / k,
            entropy_channel: sum.entropy_channel / k,
            mean_ratio: sum.mean_ratio / k,
            clip_fraction: sum.clip_fraction / k,
            loss: sum.loss / k,
        },
        gradient_steps: steps,
        skipped: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{AdamConfig, Topology};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Literal double sum over the TD residuals.
    fn gae_double_sum(r: &[f64], v: &[f64], nv: &[f64], xi: f64, lambda: f64) -> Vec<f64> {
        let n = r.len();
        (0..n)
            .map(|t| {
                (0..n - t)
                    .map(|l| {
                        let delta = r[t + l] + xi * nv[t + l] - v[t + l];
                        (lambda * xi).powi(l as i32) * delta
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn gae_examples() {
        assert_eq!(compute_gae(&[1.0], &[0.0], &[0.0], 0.9, 0.98), vec![1.0]);
        // delta = [1, 1] with zero values.
        let a = compute_gae(&[1.0, 1.0], &[0.0, 0.0], &[0.0, 0.0], 0.9, 0.5);
        assert_relative_eq!(a[0], 1.45, epsilon = 1e-15);
        assert_eq!(a[1], 1.0);
    }

    #[test]
    fn gae_matches_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 20;
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..n + 1).map(|_| rng.random_range(-2.0..2.0)).collect();
        let nv = v[1..].to_vec();
        let fast = compute_gae(&r, &v[..n], &nv, 0.9, 0.98);
        let slow = gae_double_sum(&r, &v[..n], &nv, 0.9, 0.98);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn clip_examples() {
        assert_relative_eq!(clip_fn(0.2, 2.0), 2.4);
        assert_relative_eq!(clip_fn(0.2, -1.0), -0.8);
        assert_eq!(clip_fn(0.2, 0.0), 0.0);
        assert_relative_eq!(clipped_objective(2f64.ln(), 0.0, 1.0, 0.2), 1.2);
        assert_relative_eq!(clipped_objective(0.3, 0.3, 0.7, 0.2), 0.7);
        assert_relative_eq!(clipped_objective(0.5f64.ln(), 0.0, -1.0, 0.2), -0.8);
    }

    #[test]
    fn critic_examples() {
        assert_relative_eq!(critic_loss(1.0, 0.0, 0.5, 0.9), 0.25);
        assert_eq!(critic_loss(0.0, 2.0, 1.8, 0.9), 0.0);
    }

    proptest! {
        #[test]
        fn clipped_objective_bounded_by_unclipped(lp_new in -5.0f64..5.0, lp_old in -5.0f64..5.0, adv in -10.0f64..10.0, eps in 0.01f64..0.5) {
            let ratio = (lp_new - lp_old).exp();
            prop_assert!(clipped_objective(lp_new, lp_old, adv, eps) <= ratio * adv);
        }

        #[test]
        fn normalization_preserves_order(adv in proptest::collection::vec(-100.0f64..100.0, 2..40)) {
            let mut norm = adv.clone();
            normalize_advantages(&mut norm);
            for i in 0..adv.len() {
                for j in 0..adv.len() {
                    if adv[i] < adv[j] {
                        prop_assert!(norm[i] < norm[j]);
                    }
                }
            }
        }
    }

    fn synthetic_batch(topology: &Topology, n: usize, seed: u64) -> Vec<TrainSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| TrainSample {
                features: (0..topology.input).map(|_| rng.random_range(-1.0..1.0)).collect(),
                channel: rng.random_range(0..topology.n_channels),
                power_raw: rng.random_range(-1.5..1.5),
                log_prob_old: rng.random_range(-3.0..-1.0),
                advantage: rng.random_range(-1.0..1.0),
                value_target: rng.random_range(-2.0..2.0),
            })
            .collect()
    }

    fn small_topology() -> Topology {
        Topology::new(3, vec![8, 8], 8)
    }

    #[test]
    fn zero_coefficients_and_advantages_leave_params_unchanged() {
        let topo = small_topology();
        let params = PolicyParams::init(topo.clone(), &mut ChaCha8Rng::seed_from_u64(1));
        let mut batch = synthetic_batch(&topo, 16, 2);
        batch.iter_mut().for_each(|s| s.advantage = 0.0);
        let cfg = PpoConfig {
            c1: 0.0,
            c2: 0.0,
            ..Default::default()
        };
        let refs: Vec<&TrainSample> = batch.iter().collect();
        let (_, grad) = loss_and_gradient(&params, &refs, &cfg);
        assert!(grad.iter().all(|g| g.abs() < 1e-15));
        let mut p = params.clone();
        let mut adam = Adam::new(p.weights.len(), AdamConfig::with_lr(1e-3));
        gradient_step(&mut p, &mut adam, &refs, &cfg);
        for (a, b) in p.weights.iter().zip(&params.weights) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_learning_rate_is_exact_noop() {
        let topo = small_topology();
        let params = PolicyParams::init(topo.clone(), &mut ChaCha8Rng::seed_from_u64(3));
        let batch = synthetic_batch(&topo, 40, 4);
        let mut p = params.clone();
        let mut adam = Adam::new(p.weights.len(), AdamConfig::with_lr(0.0));
        let d = update(&mut p, &mut adam, &batch, &PpoConfig::default(), &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(d.gradient_steps, 4);
        assert_eq!(p, params);
    }

    #[test]
    fn empty_buffer_is_skipped() {
        let topo = small_topology();
        let mut p = PolicyParams::init(topo, &mut ChaCha8Rng::seed_from_u64(3));
        let before = p.clone();
        let mut adam = Adam::new(p.weights.len(), AdamConfig::with_lr(1e-3));
        let d = update(&mut p, &mut adam, &[], &PpoConfig::default(), &mut ChaCha8Rng::seed_from_u64(5));
        assert!(d.skipped);
        assert_eq!(p, before);
    }

    #[test]
    fn update_reduces_critic_term_on_frozen_batch() {
        let topo = small_topology();
        let mut p = PolicyParams::init(topo.clone(), &mut ChaCha8Rng::seed_from_u64(6));
        let batch = synthetic_batch(&topo, 64, 7);
        let refs: Vec<&TrainSample> = batch.iter().collect();
        let cfg = PpoConfig::default();
        let before = loss_and_gradient(&p, &refs, &cfg).0.critic;
        let mut adam = Adam::new(p.weights.len(), AdamConfig::with_lr(1e-2));
        update(&mut p, &mut adam, &batch, &cfg, &mut ChaCha8Rng::seed_from_u64(8));
        let after = loss_and_gradient(&p, &refs, &cfg).0.critic;
        assert!(after < before, "{after} >= {before}");
    }

    #[test]
    fn entropy_bonus_raises_channel_entropy() {
        let topo = small_topology();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = topo.n_weights();
        // Start from a sharply peaked policy.
        let w = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut p = PolicyParams::from_weights(topo.clone(), w).unwrap();
        let mut batch = synthetic_batch(&topo, 32, 10);
        batch.iter_mut().for_each(|s| s.advantage = 0.0);
        let cfg = PpoConfig {
            c2: 1.0,
            normalize_advantages: false,
            ..Default::default()
        };
        let obs = &batch[0].features;
        let before = net::categorical_entropy(&net::forward(&p, obs).logits);
        let mut adam = Adam::new(n, AdamConfig::with_lr(1e-2));
        update(&mut p, &mut adam, &batch, &cfg, &mut ChaCha8Rng::seed_from_u64(11));
        let after = net::categorical_entropy(&net::forward(&p, obs).logits);
        assert!(after > before, "{after} <= {before}");
    }

    #[test]
    fn duplicated_sample_gradient_under_sum_reduction() {
        let topo = small_topology();
        let p = PolicyParams::init(topo.clone(), &mut ChaCha8Rng::seed_from_u64(12));
        let batch = synthetic_batch(&topo, 1, 13);
        let cfg = PpoConfig::default();
        let (_, single) = loss_and_gradient(&p, &[&batch[0]], &cfg);
        let (_, double) = loss_and_gradient(&p, &[&batch[0], &batch[0]], &cfg);
        // Mean reduction: duplicating a sample leaves the gradient unchanged.
        for (a, b) in single.iter().zip(&double) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn finish_segments_episodes() {
        use crate::env::{Action, Observation};
        let obs = Observation::new(vec![1e-9; 3], 2, 0, 100);
        let mk = |reward: f64, done: bool| Transition {
            obs: obs.clone(),
            action: Action {
                channel: 1,
                power_raw: 0.1,
                power_w: 0.01,
            },
            reward,
            next_obs: obs.clone(),
            log_prob_channel: -1.0,
            log_prob_power: -0.5,
            value_estimate: 0.0,
            next_value_estimate: 0.0,
            done,
        };
        let mut buf = RolloutBuffer::new();
        buf.push(mk(1.0, false));
        buf.push(mk(1.0, true));
        buf.push(mk(5.0, true));
        let cfg = PpoConfig::default();
        let s = buf.finish(&cfg);
        assert_relative_eq!(s[0].advantage, 1.0 + 0.9 * 0.98, epsilon = 1e-12);
        assert_eq!(s[1].advantage, 1.0);
        assert_eq!(s[2].advantage, 5.0);
        assert_eq!(s[0].log_prob_old, -1.5);
        buf.clear();
        assert!(buf.is_empty());
    }
}
