//! Benchmark variants and exact allocation oracles.
//!
//! Without interference, the energy efficiency of a UE depends only on its
//! own channel and power, so the centralized optimum separates: the best
//! power for every (UE, subchannel) pair first, then a maximum-weight
//! assignment of UEs to distinct subchannels.

use serde::{Deserialize, Serialize};

use crate::channel::{self, ScenarioConfig};
use crate::env::{credited_ee, EnvConfig};
use crate::fed::{self, AdaptOutcome, Checkpoint, EpisodeMetrics, FedConfig, Weighting};
use crate::meta::TaskSpec;
use crate::net::{PolicyParams, Topology};
use crate::ppo::PpoConfig;
use crate::rng::{self, STREAM_INIT};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Meta initialization with federated averaging.
    #[serde(rename = "MFRL")]
    Mfrl,
    /// Meta initialization, no averaging.
    #[serde(rename = "MRL")]
    Mrl,
    /// Random initialization with federated averaging.
    #[serde(rename = "FRL")]
    Frl,
    /// Random initialization, no averaging.
    #[serde(rename = "MARL")]
    Marl,
    /// MFRL stopped halfway through adaptation and run frozen afterwards.
    #[serde(rename = "MFRL_early")]
    MfrlEarly,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Mfrl, Variant::Mrl, Variant::Frl, Variant::Marl, Variant::MfrlEarly];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Mfrl => "MFRL",
            Variant::Mrl => "MRL",
            Variant::Frl => "FRL",
            Variant::Marl => "MARL",
            Variant::MfrlEarly => "MFRL_early",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(name))
    }

    pub fn uses_meta_init(self) -> bool {
        matches!(self, Variant::Mfrl | Variant::Mrl | Variant::MfrlEarly)
    }

    pub fn uses_averaging(self) -> bool {
        matches!(self, Variant::Mfrl | Variant::Frl | Variant::MfrlEarly)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantConfig {
    /// Adaptation settings; `weighting` is the rule used by averaging variants.
    pub fed: FedConfig,
    pub ppo: PpoConfig,
    pub env: EnvConfig,
    /// Topology of randomly initialized variants.
    pub topology: Topology,
}

#[derive(Debug, Clone)]
pub struct VariantRun {
    pub variant: Variant,
    pub metrics: Vec<EpisodeMetrics>,
    /// Models to evaluate: final local models, or the halfway checkpoint for MFRL_early.
    pub models: Vec<PolicyParams>,
    pub checkpoints: Vec<Checkpoint>,
    pub averaging_events: Vec<usize>,
}

/// The adaptation settings a variant runs with.
pub fn variant_fed_config(variant: Variant, base: &FedConfig) -> FedConfig {
    let mut fed = base.clone();
    if !variant.uses_averaging() {
        fed.weighting = Weighting::None;
    } else if fed.weighting == Weighting::None {
        fed.weighting = Weighting::SuccessWeighted;
    }
    if variant == Variant::MfrlEarly {
        let half = fed.n_episodes / 2;
        fed.freeze_after = Some(half);
        if !fed.checkpoint_episodes.contains(&half) {
            fed.checkpoint_episodes.push(half);
        }
    }
    fed
}

/// Initial parameters of a variant: the meta model or a seeded random init.
pub fn variant_init(variant: Variant, cfg: &VariantConfig, meta_model: Option<&PolicyParams>, seed: u64) -> Result<PolicyParams> {
    if variant.uses_meta_init() {
        meta_model
            .cloned()
            .ok_or_else(|| Error::MissingMetaModel(variant.name().to_string()))
    } else {
        Ok(PolicyParams::init(cfg.topology.clone(), &mut rng::stream(seed, STREAM_INIT)))
    }
}

pub fn run_variant(
    variant: Variant,
    task: &TaskSpec,
    cfg: &VariantConfig,
    meta_model: Option<&PolicyParams>,
    seed: u64,
) -> Result<VariantRun> {
    let init = variant_init(variant, cfg, meta_model, seed)?;
    let fed_cfg = variant_fed_config(variant, &cfg.fed);
    let AdaptOutcome {
        models,
        metrics,
        checkpoints,
        averaging_events,
    } = fed::adapt(&init, task, &fed_cfg, &cfg.ppo, cfg.env, seed)?;
    let models = if variant == Variant::MfrlEarly {
        let half = fed_cfg.freeze_after.expect("set for MFRL_early");
        checkpoints
            .iter()
            .find(|c| c.episode == half)
            .map(|c| c.models.clone())
            .unwrap_or(models)
    } else {
        models
    };
    Ok(VariantRun {
        variant,
        metrics,
        models,
        checkpoints,
        averaging_events,
    })
}

/// `points` powers evenly spaced in dBm over the scenario's range, in watts.
pub fn power_grid(scenario: &ScenarioConfig, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![scenario.p_max_w()];
    }
    (0..points)
        .map(|k| {
            let dbm = scenario.p_min_dbm + (scenario.p_max_dbm - scenario.p_min_dbm) * k as f64 / (points - 1) as f64;
            channel::dbm_to_w(dbm)
        })
        .collect()
}

/// Best credited efficiency of one (UE, subchannel) pair and the power achieving it.
///
/// Efficiency falls monotonically with power, so besides the grid the only
/// other candidate is the smallest power clearing the SNR floor.
pub fn pair_best(scenario: &ScenarioConfig, noise_w: &[f64], gain: f64, channel: usize, grid: &[f64]) -> (f64, f64) {
    let mut candidates = grid.to_vec();
    let floor = scenario.gamma_min_lin() * noise_w[channel] / gain * (1.0 + 1e-12);
    if floor > scenario.p_min_w() && floor < scenario.p_max_w() {
        candidates.push(floor);
    }
    candidates
        .into_iter()
        .map(|p| (p, credited_ee(scenario, noise_w, gain, channel, p)))
        .fold((f64::NAN, f64::NEG_INFINITY), |best, (p, ee)| if ee > best.1 { (p, ee) } else { best })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub assignment: Vec<usize>,
    pub powers: Vec<f64>,
    pub sum_ee: f64,
}

/// Per-pair best efficiency and power matrices.
pub fn pair_tables(gains: &[Vec<f64>], grid: &[f64], scenario: &ScenarioConfig) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let noise = scenario.noise_powers_w();
    let mut ee = Vec::with_capacity(gains.len());
    let mut pw = Vec::with_capacity(gains.len());
    for row in gains {
        let (p, e): (Vec<f64>, Vec<f64>) = row
            .iter()
            .enumerate()
            .map(|(n, &h)| pair_best(scenario, &noise, h, n, grid))
            .unzip();
        ee.push(e);
        pw.push(p);
    }
    (ee, pw)
}

/// Row-order sum of the chosen entries.
pub fn assignment_value(matrix: &[Vec<f64>], assignment: &[usize]) -> f64 {
    assignment.iter().enumerate().map(|(i, &c)| matrix[i][c]).sum()
}

/// Exhaustive search over injective assignments and grid powers.
pub fn brute_force_optimum(gains: &[Vec<f64>], power_grid: &[f64], scenario: &ScenarioConfig) -> Result<OracleSolution> {
    let n = scenario.n_subchannels();
    let i = gains.len();
    if i == 0 || i > n || n > 6 || power_grid.len() > 32 || power_grid.is_empty() {
        return Err(Error::OracleTooLarge {
            ues: i,
            subchannels: n,
            grid: power_grid.len(),
        });
    }
    let (ee, pw) = pair_tables(gains, power_grid, scenario);
    let assignment = enumerate_best(&ee);
    Ok(solution(&ee, &pw, assignment))
}

/// Same optimum via the Hungarian method; valid for any `I <= N`.
pub fn hungarian_optimum(gains: &[Vec<f64>], power_grid: &[f64], scenario: &ScenarioConfig) -> Result<OracleSolution> {
    if gains.is_empty() || gains.len() > scenario.n_subchannels() {
        return Err(Error::TooManyUes {
            ues: gains.len(),
            subchannels: scenario.n_subchannels(),
        });
    }
    let (ee, pw) = pair_tables(gains, power_grid, scenario);
    let assignment = hungarian_assignment(&ee);
    Ok(solution(&ee, &pw, assignment))
}

/// Exhaustive search when the instance is small enough, Hungarian otherwise.
pub fn oracle_optimum(gains: &[Vec<f64>], power_grid: &[f64], scenario: &ScenarioConfig) -> Result<OracleSolution> {
    match brute_force_optimum(gains, power_grid, scenario) {
        Err(Error::OracleTooLarge { .. }) => hungarian_optimum(gains, power_grid, scenario),
        other => other,
    }
}

fn solution(ee: &[Vec<f64>], pw: &[Vec<f64>], assignment: Vec<usize>) -> OracleSolution {
    let powers = assignment.iter().enumerate().map(|(i, &c)| pw[i][c]).collect();
    let sum_ee = assignment_value(ee, &assignment);
    OracleSolution {
        assignment,
        powers,
        sum_ee,
    }
}

/// Maximum-sum injective assignment by depth-first enumeration.
pub fn enumerate_best(matrix: &[Vec<f64>]) -> Vec<usize> {
    fn go(m: &[Vec<f64>], row: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, best: &mut (f64, Vec<usize>)) {
        if row == m.len() {
            let v = assignment_value(m, cur);
            if v > best.0 {
                *best = (v, cur.clone());
            }
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                cur.push(c);
                go(m, row + 1, used, cur, best);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let cols = matrix.first().map_or(0, |r| r.len());
    let mut best = (f64::NEG_INFINITY, Vec::new());
    go(matrix, 0, &mut vec![false; cols], &mut Vec::new(), &mut best);
    best.1
}

/// Maximum-sum assignment of rows to distinct columns (`rows <= cols`).
///
/// Shortest augmenting path Hungarian method with row and column
/// potentials, O(rows^2 * cols), run on negated values.
pub fn hungarian_assignment(matrix: &[Vec<f64>]) -> Vec<usize> {
    let n = matrix.len();
    if n == 0 {
        return Vec::new();
    }
    let m = matrix[0].len();
    assert!(n <= m, "more rows than columns");
    let cost = |i: usize, j: usize| -matrix[i - 1][j - 1];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ScenarioKind;
    use crate::env::{score_joint_action, Action};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_scenario() -> ScenarioConfig {
        ScenarioConfig::preset(ScenarioKind::UrbanMicro).with_bandwidths_hz(vec![0.36e6, 0.72e6, 1.44e6])
    }

    fn random_gains(rng: &mut ChaCha8Rng, i: usize, n: usize) -> Vec<Vec<f64>> {
        (0..i)
            .map(|_| (0..n).map(|_| 10f64.powf(rng.random_range(-12.0..-8.0))).collect())
            .collect()
    }

    #[test]
    fn hungarian_small_cases() {
        let diag = vec![vec![9.0, 1.0, 2.0], vec![0.5, 8.0, 1.0], vec![1.0, 2.0, 7.0]];
        assert_eq!(hungarian_assignment(&diag), vec![0, 1, 2]);
        let anti = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        let a = hungarian_assignment(&anti);
        assert_eq!(a, vec![1, 0]);
        assert_eq!(assignment_value(&anti, &a), 4.0);
    }

    #[test]
    fn hungarian_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let m: Vec<Vec<f64>> = (0..5).map(|_| (0..8).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
            let h = hungarian_assignment(&m);
            let e = enumerate_best(&m);
            assert_eq!(assignment_value(&m, &h), assignment_value(&m, &e));
        }
    }

    #[test]
    fn single_ue_picks_best_channel() {
        let s = toy_scenario();
        let grid = power_grid(&s, 25);
        let gains = vec![vec![2e-9, 1e-9, 5e-10]];
        let sol = brute_force_optimum(&gains, &grid, &s).unwrap();
        let (ee, _) = pair_tables(&gains, &grid, &s);
        let best = (0..3).max_by(|&a, &b| ee[0][a].total_cmp(&ee[0][b])).unwrap();
        assert_eq!(sol.assignment, vec![best]);
        assert_eq!(sol.sum_ee, ee[0][best]);
    }

    #[test]
    fn symmetric_ues_are_interchangeable() {
        let s = toy_scenario();
        let grid = power_grid(&s, 25);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let row = random_gains(&mut rng, 1, 3).remove(0);
        let other = random_gains(&mut rng, 1, 3).remove(0);
        let a = brute_force_optimum(&[row.clone(), row.clone(), other.clone()], &grid, &s).unwrap();
        let b = brute_force_optimum(&[other, row.clone(), row], &grid, &s).unwrap();
        assert!((a.sum_ee - b.sum_ee).abs() <= 1e-9 * a.sum_ee);
    }

    #[test]
    fn brute_force_agrees_with_hungarian() {
        let s = toy_scenario();
        let grid = power_grid(&s, 25);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let gains = random_gains(&mut rng, 2, 3);
            let a = brute_force_optimum(&gains, &grid, &s).unwrap();
            let b = hungarian_optimum(&gains, &grid, &s).unwrap();
            assert_eq!(a.sum_ee, b.sum_ee);
        }
    }

    #[test]
    fn oracle_bounds_any_joint_action() {
        let s = toy_scenario();
        let noise = s.noise_powers_w();
        let grid = power_grid(&s, 25);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let gains = random_gains(&mut rng, 2, 3);
            let sol = brute_force_optimum(&gains, &grid, &s).unwrap();
            let actions: Vec<Action> = (0..2)
                .map(|_| Action::from_raw(rng.random_range(0..3), rng.random_range(-1.5..1.5), &s))
                .collect();
            let rows: Vec<&[f64]> = gains.iter().map(|r| r.as_slice()).collect();
            let (_, stats) = score_joint_action(&s, &noise, &rows, &actions, 1.0);
            assert!(sol.sum_ee >= stats.sum_ee());
        }
    }

    #[test]
    fn oracle_size_guard() {
        let s = ScenarioConfig::preset(ScenarioKind::UrbanMicro);
        let grid = power_grid(&s, 25);
        assert!(matches!(
            brute_force_optimum(&[vec![1e-9; 10]], &grid, &s),
            Err(Error::OracleTooLarge { .. })
        ));
        assert!(hungarian_optimum(&[vec![1e-9; 10]], &grid, &s).is_ok());
    }

    #[test]
    fn grid_spans_power_range() {
        let s = toy_scenario();
        let g = power_grid(&s, 25);
        assert_eq!(g.len(), 25);
        assert!((g[0] - 1e-3).abs() < 1e-15);
        assert!((g[24] - s.p_max_w()).abs() < 1e-12);
        assert!((g[1] / g[0] - 10f64.powf(0.1)).abs() < 1e-12);
    }

    #[test]
    fn variant_switches() {
        let base = FedConfig {
            n_episodes: 10,
            weighting: Weighting::SuccessWeighted,
            ..Default::default()
        };
        assert_eq!(variant_fed_config(Variant::Marl, &base).weighting, Weighting::None);
        assert_eq!(variant_fed_config(Variant::Mrl, &base).weighting, Weighting::None);
        assert_eq!(variant_fed_config(Variant::Frl, &base).weighting, Weighting::SuccessWeighted);
        let early = variant_fed_config(Variant::MfrlEarly, &base);
        assert_eq!(early.freeze_after, Some(5));
        assert!(early.checkpoint_episodes.contains(&5));
        for v in Variant::ALL {
            assert_eq!(Variant::from_name(v.name()), Some(v));
        }
    }
}
