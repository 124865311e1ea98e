//! Shared-trunk actor-critic network.
//!
//! ```text
//! obs -> tanh(512) -> tanh(256) -+-> N channel logits
//!                                +-> mu
//!                                +-> log sigma
//!                                +-> tanh(128) -> value
//! ```
//!
//! Parameters live in one flat vector so that federated averaging and the
//! optimizer treat the model as a plain point in R^d. Each linear layer is
//! stored as a row-major `out x in` weight block followed by its bias.

use std::f64::consts::{E, PI};
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::ScenarioConfig;
use crate::env::{Action, Observation};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub input: usize,
    pub trunk: Vec<usize>,
    pub n_channels: usize,
    pub critic_hidden: usize,
}

impl Topology {
    /// `N + 2` inputs, trunk 512/256, critic branch 128.
    pub fn standard(n_channels: usize) -> Self {
        Topology {
            input: n_channels + 2,
            trunk: vec![512, 256],
            n_channels,
            critic_hidden: 128,
        }
    }

    pub fn new(n_channels: usize, trunk: Vec<usize>, critic_hidden: usize) -> Self {
        Topology {
            input: n_channels + 2,
            trunk,
            n_channels,
            critic_hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.n_channels == 0 || self.critic_hidden == 0 || self.trunk.is_empty() {
            return Err(Error::Config("network layers must be non-empty".into()));
        }
        if self.trunk.contains(&0) {
            return Err(Error::Config("trunk widths must be positive".into()));
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        let mut offset = 0;
        let mut linear = |n_in: usize, n_out: usize| {
            let layer = Linear {
                w: offset,
                b: offset + n_in * n_out,
                n_in,
                n_out,
            };
            offset += n_in * n_out + n_out;
            layer
        };
        let mut trunk = Vec::with_capacity(self.trunk.len());
        let mut width = self.input;
        for &w in &self.trunk {
            trunk.push(linear(width, w));
            width = w;
        }
        let logits = linear(width, self.n_channels);
        let mu = linear(width, 1);
        let log_sigma = linear(width, 1);
        let critic = linear(width, self.critic_hidden);
        let value = linear(self.critic_hidden, 1);
        Layout {
            trunk,
            logits,
            mu,
            log_sigma,
            critic,
            value,
            n_weights: offset,
        }
    }

    pub fn n_weights(&self) -> usize {
        self.layout().n_weights
    }
}

/// Offsets of one linear layer inside the flat weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
    pub n_in: usize,
    pub n_out: usize,
}

impl Linear {
    fn apply(&self, theta: &[f64], x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let w = &theta[self.w..self.b];
        let b = &theta[self.b..self.b + self.n_out];
        for (row, &bias) in w.chunks_exact(self.n_in).zip(b) {
            out.push(bias + dot(row, x));
        }
    }

    /// Accumulates `scale * dz x^T` into the weight gradient and, when
    /// `dx` is given, adds `W^T dz` to it.
    fn backprop(&self, theta: &[f64], x: &[f64], dz: &[f64], grad: &mut [f64], dx: Option<&mut [f64]>) {
        let (gw, rest) = grad[self.w..].split_at_mut(self.b - self.w);
        let gb = &mut rest[..self.n_out];
        for (o, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gb[o] += d;
            for (g, &xi) in gw[o * self.n_in..(o + 1) * self.n_in].iter_mut().zip(x) {
                *g += d * xi;
            }
        }
        if let Some(dx) = dx {
            let w = &theta[self.w..self.b];
            for (o, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (g, &wi) in dx.iter_mut().zip(&w[o * self.n_in..(o + 1) * self.n_in]) {
                    *g += d * wi;
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub trunk: Vec<Linear>,
    pub logits: Linear,
    pub mu: Linear,
    pub log_sigma: Linear,
    pub critic: Linear,
    pub value: Linear,
    pub n_weights: usize,
}

/// Network weights together with the topology they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub topology: Topology,
    pub weights: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(topology: Topology) -> Self {
        let n = topology.n_weights();
        PolicyParams {
            topology,
            weights: vec![0.0; n],
        }
    }

    pub fn from_weights(topology: Topology, weights: Vec<f64>) -> Result<Self> {
        let expected = topology.n_weights();
        if weights.len() != expected {
            return Err(Error::WeightCount {
                expected,
                actual: weights.len(),
            });
        }
        Ok(PolicyParams { topology, weights })
    }

    /// Orthogonal init: gain sqrt(2) on hidden layers, 0.01 on the actor
    /// heads, 1.0 on the value head; zero biases.
    pub fn init<R: Rng + ?Sized>(topology: Topology, rng: &mut R) -> Self {
        let layout = topology.layout();
        let mut weights = vec![0.0; layout.n_weights];
        let hidden = std::f64::consts::SQRT_2;
        for layer in &layout.trunk {
            orthogonal_fill(&mut weights, layer, hidden, rng);
        }
        orthogonal_fill(&mut weights, &layout.logits, 0.01, rng);
        orthogonal_fill(&mut weights, &layout.mu, 0.01, rng);
        orthogonal_fill(&mut weights, &layout.log_sigma, 0.01, rng);
        orthogonal_fill(&mut weights, &layout.critic, hidden, rng);
        orthogonal_fill(&mut weights, &layout.value, 1.0, rng);
        PolicyParams { topology, weights }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    pub fn same_topology(&self, other: &PolicyParams) -> bool {
        self.topology == other.topology && self.weights.len() == other.weights.len()
    }

    /// Little-endian binary: magic, version, topology header, weight count,
    /// then every weight as an IEEE-754 double.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        let t = &self.topology;
        w.write_all(&(t.input as u32).to_le_bytes())?;
        w.write_all(&(t.n_channels as u32).to_le_bytes())?;
        w.write_all(&(t.critic_hidden as u32).to_le_bytes())?;
        w.write_all(&(t.trunk.len() as u32).to_le_bytes())?;
        for &width in &t.trunk {
            w.write_all(&(width as u32).to_le_bytes())?;
        }
        w.write_all(&(self.weights.len() as u64).to_le_bytes())?;
        for v in &self.weights {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let bad = |m: &str| Error::ModelFormat(m.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MODEL_MAGIC {
            return Err(bad("bad magic"));
        }
        let mut u32_field = || -> Result<usize> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| bad("truncated header"))?;
            Ok(u32::from_le_bytes(b) as usize)
        };
        if u32_field()? != MODEL_VERSION as usize {
            return Err(bad("unsupported version"));
        }
        let input = u32_field()?;
        let n_channels = u32_field()?;
        let critic_hidden = u32_field()?;
        let depth = u32_field()?;
        if depth > 64 {
            return Err(bad("implausible trunk depth"));
        }
        let trunk = (0..depth).map(|_| u32_field()).collect::<Result<Vec<_>>>()?;
        let topology = Topology {
            input,
            trunk,
            n_channels,
            critic_hidden,
        };
        topology.validate().map_err(|_| bad("invalid topology"))?;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8).map_err(|_| bad("truncated header"))?;
        let count = u64::from_le_bytes(b8) as usize;
        if count != topology.n_weights() {
            return Err(bad("weight count does not match topology"));
        }
        let mut weights = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut b8).map_err(|_| bad("truncated weights"))?;
            weights.push(f64::from_le_bytes(b8));
        }
        Ok(PolicyParams { topology, weights })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

const MODEL_MAGIC: &[u8; 8] = b"MFRLNET\0";
const MODEL_VERSION: u32 = 1;

fn orthogonal_fill<R: Rng + ?Sized>(weights: &mut [f64], layer: &Linear, gain: f64, rng: &mut R) {
    let (rows, cols) = (layer.n_out, layer.n_in);
    // Orthonormalize along the shorter side of the matrix.
    let (count, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
        for u in &basis {
            let p = dot(&v, u);
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
        let norm = dot(&v, &v).sqrt();
        if norm < 1e-10 {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        basis.push(v);
    }
    let w = &mut weights[layer.w..layer.b];
    for r in 0..rows {
        for c in 0..cols {
            let v = if rows <= cols { basis[r][c] } else { basis[c][r] };
            w[r * cols + c] = gain * v;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub logits: Vec<f64>,
    pub mu: f64,
    pub log_sigma: f64,
    pub value: f64,
}

impl ForwardOutput {
    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    pub fn channel_probs(&self) -> Vec<f64> {
        softmax(&self.logits)
    }
}

/// Activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `acts[0]` is the input; `acts[k + 1]` the output of trunk layer `k`.
    acts: Vec<Vec<f64>>,
    critic: Vec<f64>,
}

pub fn forward(params: &PolicyParams, features: &[f64]) -> ForwardOutput {
    forward_cached(params, &params.topology.layout(), features).0
}

pub fn forward_cached(params: &PolicyParams, layout: &Layout, features: &[f64]) -> (ForwardOutput, ForwardCache) {
    assert_eq!(features.len(), params.topology.input, "observation does not fit the network input");
    let theta = &params.weights;
    let mut acts = Vec::with_capacity(layout.trunk.len() + 1);
    acts.push(features.to_vec());
    for layer in &layout.trunk {
        let mut z = Vec::with_capacity(layer.n_out);
        layer.apply(theta, acts.last().expect("input pushed"), &mut z);
        z.iter_mut().for_each(|v| *v = v.tanh());
        acts.push(z);
    }
    let h = acts.last().expect("trunk is non-empty");
    let mut logits = Vec::with_capacity(layout.logits.n_out);
    layout.logits.apply(theta, h, &mut logits);
    let mut scratch = Vec::with_capacity(1);
    layout.mu.apply(theta, h, &mut scratch);
    let mu = scratch[0];
    layout.log_sigma.apply(theta, h, &mut scratch);
    let log_sigma = scratch[0];
    let mut critic = Vec::with_capacity(layout.critic.n_out);
    layout.critic.apply(theta, h, &mut critic);
    critic.iter_mut().for_each(|v| *v = v.tanh());
    layout.value.apply(theta, &critic, &mut scratch);
    let value = scratch[0];
    (
        ForwardOutput {
            logits,
            mu,
            log_sigma,
            value,
        },
        ForwardCache { acts, critic },
    )
}

/// Loss derivatives with respect to the four head outputs of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrads {
    pub logits: Vec<f64>,
    pub mu: f64,
    pub log_sigma: f64,
    pub value: f64,
}

/// Reverse-mode pass for one sample; accumulates `dLoss/dtheta` into `grad`.
pub fn backward(params: &PolicyParams, layout: &Layout, cache: &ForwardCache, heads: &HeadGrads, grad: &mut [f64]) {
    let theta = &params.weights;
    let h = cache.acts.last().expect("trunk is non-empty");
    let mut dh = vec![0.0; h.len()];

    let value_dz = [heads.value];
    let mut dcritic = vec![0.0; cache.critic.len()];
    layout.value.backprop(theta, &cache.critic, &value_dz, grad, Some(&mut dcritic));
    for (d, &a) in dcritic.iter_mut().zip(&cache.critic) {
        *d *= 1.0 - a * a;
    }
    layout.critic.backprop(theta, h, &dcritic, grad, Some(&mut dh));
    layout.logits.backprop(theta, h, &heads.logits, grad, Some(&mut dh));
    layout.mu.backprop(theta, h, &[heads.mu], grad, Some(&mut dh));
    layout.log_sigma.backprop(theta, h, &[heads.log_sigma], grad, Some(&mut dh));

    for (k, layer) in layout.trunk.iter().enumerate().rev() {
        let out = &cache.acts[k + 1];
        for (d, &a) in dh.iter_mut().zip(out) {
            *d *= 1.0 - a * a;
        }
        let input = &cache.acts[k];
        if k == 0 {
            layer.backprop(theta, input, &dh, grad, None);
        } else {
            let mut dprev = vec![0.0; input.len()];
            layer.backprop(theta, input, &dh, grad, Some(&mut dprev));
            dh = dprev;
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

pub fn categorical_entropy(logits: &[f64]) -> f64 {
    log_softmax(logits).iter().map(|lp| -lp.exp() * lp).sum()
}

pub fn gaussian_log_prob(x: f64, mu: f64, log_sigma: f64) -> f64 {
    let z = (x - mu) * (-log_sigma).exp();
    -0.5 * z * z - log_sigma - 0.5 * (2.0 * PI).ln()
}

pub fn gaussian_entropy(log_sigma: f64) -> f64 {
    0.5 * (2.0 * PI * E).ln() + log_sigma
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySample {
    pub action: Action,
    pub log_prob_channel: f64,
    pub log_prob_power: f64,
    pub entropy_channel: f64,
    pub entropy_power: f64,
}

/// Draws a channel from the categorical head and a raw power from the
/// Gaussian head. Log-probabilities are taken under the unclipped density.
pub fn sample_action<R: Rng + ?Sized>(out: &ForwardOutput, scenario: &ScenarioConfig, rng: &mut R) -> PolicySample {
    let log_probs = log_softmax(&out.logits);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut channel = log_probs.len() - 1;
    for (c, lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            channel = c;
            break;
        }
    }
    let z: f64 = StandardNormal.sample(rng);
    let power_raw = out.mu + out.sigma() * z;
    PolicySample {
        action: Action::from_raw(channel, power_raw, scenario),
        log_prob_channel: log_probs[channel],
        log_prob_power: gaussian_log_prob(power_raw, out.mu, out.log_sigma),
        entropy_channel: log_probs.iter().map(|lp| -lp.exp() * lp).sum(),
        entropy_power: gaussian_entropy(out.log_sigma),
    }
}

/// Deterministic action: most likely channel and the mean power.
pub fn greedy_action(out: &ForwardOutput, scenario: &ScenarioConfig) -> Action {
    let channel = out
        .logits
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (c, &l)| if l > best.1 { (c, l) } else { best })
        .0;
    Action::from_raw(channel, out.mu, scenario)
}

/// Convenience for callers holding an [`Observation`].
pub fn forward_obs(params: &PolicyParams, obs: &Observation) -> ForwardOutput {
    forward(params, &obs.features)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected adaptive-moment state. Always descends; callers negate
/// objectives they want to maximize.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(n: usize, config: AdamConfig) -> Self {
        Adam {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for k in 0..params.len() {
            let g = grad[k];
            self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * g;
            self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * g * g;
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            params[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Applies one Adam step to `params`.
pub fn adam_step(params: &mut PolicyParams, state: &mut Adam, gradient: &[f64]) {
    state.step(&mut params.weights, gradient);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ScenarioKind;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> Topology {
        Topology {
            input: 6,
            trunk: vec![8],
            n_channels: 3,
            critic_hidden: 4,
        }
    }

    fn random_params(topology: Topology, seed: u64) -> PolicyParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = topology.n_weights();
        let w = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        PolicyParams::from_weights(topology, w).unwrap()
    }

    /// Straight-line re-implementation with explicit index arithmetic.
    fn reference_forward(p: &PolicyParams, x: &[f64]) -> (Vec<f64>, f64, f64, f64) {
        let t = &p.topology;
        let w = &p.weights;
        let mut off = 0;
        let mut dense = |x: &[f64], n_out: usize, act: bool| -> Vec<f64> {
            let n_in = x.len();
            let mut y = vec![0.0; n_out];
            for o in 0..n_out {
                let mut s = w[off + n_in * n_out + o];
                for i in 0..n_in {
                    s += w[off + o * n_in + i] * x[i];
                }
                y[o] = if act { s.tanh() } else { s };
            }
            off += n_in * n_out + n_out;
            y
        };
        let mut h = x.to_vec();
        for &width in &t.trunk {
            h = dense(&h, width, true);
        }
        let logits = dense(&h, t.n_channels, false);
        let mu = dense(&h, 1, false)[0];
        let ls = dense(&h, 1, false)[0];
        let c = dense(&h, t.critic_hidden, true);
        let v = dense(&c, 1, false)[0];
        (logits, mu, ls, v)
    }

    #[test]
    fn standard_topology_size() {
        let t = Topology::standard(10);
        let expect = 12 * 512 + 512 + 512 * 256 + 256 + 256 * 10 + 10 + 257 + 257 + 256 * 128 + 128 + 129;
        assert_eq!(t.n_weights(), expect);
    }

    #[test]
    fn zero_weights_give_zero_outputs() {
        let p = PolicyParams::zeros(toy());
        let out = forward(&p, &[0.3, -1.0, 2.0, 0.1, 0.0, 5.0]);
        assert!(out.logits.iter().all(|&l| l == 0.0));
        assert_eq!(out.value, 0.0);
        assert_eq!(out.sigma(), 1.0);
        let probs = out.channel_probs();
        assert!(probs.iter().all(|&q| (q - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn forward_matches_reference() {
        let topo = Topology {
            input: 5,
            trunk: vec![7, 6],
            n_channels: 4,
            critic_hidden: 3,
        };
        let p = random_params(topo, 3);
        let x = [0.2, -0.4, 0.9, 1.3, -0.05];
        let out = forward(&p, &x);
        let (logits, mu, ls, v) = reference_forward(&p, &x);
        for (a, b) in out.logits.iter().zip(&logits) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert!((out.mu - mu).abs() <= 1e-12);
        assert!((out.log_sigma - ls).abs() <= 1e-12);
        assert!((out.value - v).abs() <= 1e-12);
        assert_eq!(out, forward(&p, &x));
    }

    #[test]
    fn softmax_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let logits: Vec<f64> = (0..10).map(|_| rng.random_range(-30.0..30.0)).collect();
            let p = softmax(&logits);
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(p.iter().all(|&q| q > 0.0));
        }
    }

    #[test]
    fn analytic_entropies_and_densities() {
        assert_relative_eq!(categorical_entropy(&[0.0; 10]), 10f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(gaussian_entropy(0.0), 1.4189385332046727, epsilon = 1e-12);
        let ls = 0.7f64;
        assert_relative_eq!(
            gaussian_log_prob(1.5, 1.5, ls),
            -(ls.exp() * (2.0 * PI).sqrt()).ln(),
            epsilon = 1e-12
        );
        let out = ForwardOutput {
            logits: vec![0.0; 10],
            mu: 0.0,
            log_sigma: 0.0,
            value: 0.0,
        };
        let s = sample_action(&out, &ScenarioConfig::preset(ScenarioKind::UrbanMicro), &mut ChaCha8Rng::seed_from_u64(1));
        assert_relative_eq!(s.entropy_channel, 2.302585092994046, epsilon = 1e-12);
        assert_relative_eq!(s.entropy_power, 1.4189385332046727, epsilon = 1e-12);
        assert_relative_eq!(s.log_prob_channel, -(10f64.ln()), epsilon = 1e-12);
    }

    #[test]
    fn sampling_follows_probabilities() {
        let out = ForwardOutput {
            logits: vec![0.0, 1.0, 2.0],
            mu: 0.25,
            log_sigma: -1.0,
            value: 0.0,
        };
        let scenario = ScenarioConfig::preset(ScenarioKind::UrbanMicro);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 60_000;
        let mut counts = [0usize; 3];
        let mut raw_sum = 0.0;
        for _ in 0..n {
            let s = sample_action(&out, &scenario, &mut rng);
            counts[s.action.channel] += 1;
            raw_sum += s.action.power_raw;
        }
        let p = softmax(&out.logits);
        for c in 0..3 {
            assert!((counts[c] as f64 / n as f64 - p[c]).abs() < 0.01);
        }
        assert!((raw_sum / n as f64 - 0.25).abs() < 0.01);
        let g = greedy_action(&out, &scenario);
        assert_eq!(g.channel, 2);
        assert_eq!(g.power_raw, 0.25);
    }

    #[test]
    fn head_gradients_match_finite_differences() {
        let topo = Topology {
            input: 6,
            trunk: vec![8, 5],
            n_channels: 3,
            critic_hidden: 4,
        };
        let p = random_params(topo, 21);
        let layout = p.topology.layout();
        let x = [0.1, -0.3, 0.8, 0.5, -1.2, 0.4];
        // Scalar test function: weighted sum of every head output.
        let heads = HeadGrads {
            logits: vec![0.3, -0.7, 1.1],
            mu: -0.4,
            log_sigma: 0.9,
            value: 1.3,
        };
        let f = |p: &PolicyParams| {
            let o = forward(p, &x);
            dot(&o.logits, &heads.logits) + heads.mu * o.mu + heads.log_sigma * o.log_sigma + heads.value * o.value
        };
        let (_, cache) = forward_cached(&p, &layout, &x);
        let mut grad = vec![0.0; layout.n_weights];
        backward(&p, &layout, &cache, &heads, &mut grad);
        let h = 1e-6;
        for k in 0..grad.len() {
            let mut plus = p.clone();
            plus.weights[k] += h;
            let mut minus = p.clone();
            minus.weights[k] -= h;
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            let denom = grad[k].abs().max(fd.abs()).max(1e-6);
            assert!((grad[k] - fd).abs() / denom < 1e-6, "coordinate {k}: {} vs {fd}", grad[k]);
        }
    }

    #[test]
    fn zero_head_grads_give_zero_gradient() {
        let p = random_params(toy(), 2);
        let layout = p.topology.layout();
        let (_, cache) = forward_cached(&p, &layout, &[0.5; 6]);
        let heads = HeadGrads {
            logits: vec![0.0; 3],
            mu: 0.0,
            log_sigma: 0.0,
            value: 0.0,
        };
        let mut grad = vec![0.0; layout.n_weights];
        backward(&p, &layout, &cache, &heads, &mut grad);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn init_gains() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = PolicyParams::init(Topology::new(4, vec![16, 8], 6), &mut rng);
        let layout = p.topology.layout();
        // Rows of the first layer (16 x 6) have orthonormal columns scaled by sqrt(2).
        let l = &layout.trunk[0];
        let w = &p.weights[l.w..l.b];
        for a in 0..l.n_in {
            for b in 0..l.n_in {
                let s: f64 = (0..l.n_out).map(|r| w[r * l.n_in + a] * w[r * l.n_in + b]).sum();
                let expect = if a == b { 2.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-10);
            }
        }
        let heads = &p.weights[layout.logits.w..layout.logits.b];
        let norm: f64 = heads.iter().map(|v| v * v).sum::<f64>();
        assert!((norm - 4.0 * 1e-4).abs() < 1e-12);
        assert!(p.weights[layout.logits.b..layout.logits.b + 4].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn adam_first_step_and_zero_gradient() {
        let mut p = vec![0.0; 4];
        let mut adam = Adam::new(4, AdamConfig::with_lr(1e-3));
        adam.step(&mut p, &[1.0; 4]);
        for v in &p {
            assert!((v + 1e-3).abs() < 1e-10);
        }
        let before = p.clone();
        let mut fresh = Adam::new(4, AdamConfig::with_lr(1e-3));
        fresh.step(&mut p, &[0.0; 4]);
        assert_eq!(p, before);
    }

    #[test]
    fn adam_two_step_recurrence() {
        let lr = 0.01;
        let mut p = vec![0.0];
        let mut adam = Adam::new(1, AdamConfig::with_lr(lr));
        adam.step(&mut p, &[1.0]);
        let after_one = p[0];
        adam.step(&mut p, &[3.0]);
        // m2 = 0.9*0.1 + 0.1*3 = 0.39, v2 = 0.999*0.001 + 0.001*9 = 0.009999.
        let m_hat = 0.39 / (1.0 - 0.81);
        let v_hat: f64 = 0.009999 / (1.0 - 0.998001);
        let expected = after_one - lr * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p[0] - expected).abs() < 1e-14);
        assert!(((after_one - p[0]) / lr - 0.91776).abs() < 1e-4);

        let mut q = vec![0.0];
        let mut same = Adam::new(1, AdamConfig::with_lr(lr));
        same.step(&mut q, &[1.0]);
        same.step(&mut q, &[1.0]);
        assert!((q[0] + 2.0 * lr / (1.0 + 1e-8)).abs() < 1e-14);
    }

    #[test]
    fn model_file_round_trip_and_rejection() {
        let p = random_params(toy(), 4);
        let mut bytes = Vec::new();
        p.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..8], b"MFRLNET\0");
        assert_eq!(PolicyParams::read_from(bytes.as_slice()).unwrap(), p);
        let mut corrupt = bytes.clone();
        corrupt[0] = b'X';
        assert!(PolicyParams::read_from(corrupt.as_slice()).is_err());
        assert!(PolicyParams::read_from(&bytes[..bytes.len() - 3]).is_err());
    }
}
