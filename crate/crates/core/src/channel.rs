//! Single-cell uplink radio model.
//!
//! The BS sits at the center of a square deployment area. Each UE sees, on
//! every subchannel `n`, a linear power gain
//!
//! ```text
//! h[i][n] = 10^(-PL[i][n] / 10) * shadowing[i][n] * fading[i][n]
//! ```
//!
//! where `PL` is the NLOS urban pathloss net of both antenna gains,
//! `shadowing` is log-normal and `fading` is unit-mean exponential
//! (Rayleigh power). Fading is redrawn on the fast cadence; geometry,
//! pathloss and shadowing on the slow one.

use std::f64::consts::{LN_10, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Bandwidths of the ten default subchannels, in MHz.
pub const DEFAULT_BANDWIDTHS_MHZ: [f64; 10] = [0.18, 0.18, 0.36, 0.36, 0.36, 0.72, 0.72, 0.72, 1.44, 1.44];

/// Subcarriers per resource block.
pub const SUBCARRIERS_PER_RB: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    IndoorOffice,
    UrbanMicro,
    UrbanMacro,
    RuralMacro,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::IndoorOffice,
        ScenarioKind::UrbanMicro,
        ScenarioKind::UrbanMacro,
        ScenarioKind::RuralMacro,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::IndoorOffice => "indoor_office",
            ScenarioKind::UrbanMicro => "urban_micro",
            ScenarioKind::UrbanMacro => "urban_macro",
            ScenarioKind::RuralMacro => "rural_macro",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Physical constants of one deployment scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario_kind: ScenarioKind,
    pub area_side_m: f64,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
    pub bs_antenna_gain_db: f64,
    pub ue_antenna_gain_db: f64,
    pub bs_noise_figure_db: f64,
    pub ue_noise_figure_db: f64,
    pub subchannel_bandwidth_hz: Vec<f64>,
    pub carrier_freq_ghz: Vec<f64>,
    pub noise_psd_dbm_hz: f64,
    pub p_max_dbm: f64,
    pub p_min_dbm: f64,
    pub gamma_min_db: f64,
    pub shadowing_sigma_db: f64,
    /// Draw shadowing per (UE, subchannel) instead of once per UE.
    pub per_subchannel_shadowing: bool,
    pub max_speed_mps: f64,
    pub large_scale_update_period_steps: u64,
    pub fast_fading_update_period_steps: u64,
    /// Duration of one environment step.
    pub step_duration_s: f64,
}

impl ScenarioConfig {
    /// Built-in defaults for a scenario kind.
    pub fn preset(kind: ScenarioKind) -> Self {
        let (area_side_m, bs_height_m, noise_psd_dbm_hz) = match kind {
            ScenarioKind::IndoorOffice => (20.0, 3.0, -160.0),
            ScenarioKind::UrbanMicro => (100.0, 10.0, -170.0),
            ScenarioKind::UrbanMacro => (500.0, 25.0, -180.0),
            ScenarioKind::RuralMacro => (1000.0, 35.0, -185.0),
        };
        let subchannel_bandwidth_hz: Vec<f64> = DEFAULT_BANDWIDTHS_MHZ.iter().map(|mhz| mhz * 1e6).collect();
        let n = subchannel_bandwidth_hz.len();
        ScenarioConfig {
            scenario_kind: kind,
            area_side_m,
            bs_height_m,
            ue_height_m: 1.5,
            bs_antenna_gain_db: 8.0,
            ue_antenna_gain_db: 3.0,
            bs_noise_figure_db: 5.0,
            ue_noise_figure_db: 9.0,
            subchannel_bandwidth_hz,
            carrier_freq_ghz: vec![6.0; n],
            noise_psd_dbm_hz,
            p_max_dbm: 24.0,
            p_min_dbm: 0.0,
            gamma_min_db: 5.0,
            shadowing_sigma_db: 7.8,
            per_subchannel_shadowing: true,
            max_speed_mps: 1.0,
            large_scale_update_period_steps: 100,
            fast_fading_update_period_steps: 1,
            step_duration_s: 1e-3,
        }
    }

    /// Replaces the subchannel plan, keeping every carrier at the first
    /// configured frequency.
    pub fn with_bandwidths_hz(mut self, bandwidths: Vec<f64>) -> Self {
        let f = self.carrier_freq_ghz.first().copied().unwrap_or(6.0);
        self.carrier_freq_ghz = vec![f; bandwidths.len()];
        self.subchannel_bandwidth_hz = bandwidths;
        self
    }

    pub fn n_subchannels(&self) -> usize {
        self.subchannel_bandwidth_hz.len()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let n = self.subchannel_bandwidth_hz.len();
        if n == 0 {
            return fail("at least one subchannel is required".into());
        }
        if self.carrier_freq_ghz.len() != n {
            return fail(format!(
                "{} carrier frequencies for {} subchannels",
                self.carrier_freq_ghz.len(),
                n
            ));
        }
        if self.subchannel_bandwidth_hz.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return fail("subchannel bandwidths must be positive".into());
        }
        if self.carrier_freq_ghz.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return fail("carrier frequencies must be positive".into());
        }
        if !(self.p_min_dbm < self.p_max_dbm) {
            return fail(format!(
                "p_min_dbm ({}) must be below p_max_dbm ({})",
                self.p_min_dbm, self.p_max_dbm
            ));
        }
        if !self.gamma_min_db.is_finite() {
            return fail("gamma_min_db must be finite".into());
        }
        if !(self.area_side_m > 0.0) || !(self.shadowing_sigma_db >= 0.0) {
            return fail("area_side_m must be positive and shadowing_sigma_db non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.max_speed_mps) {
            return fail("max_speed_mps must lie in [0, 1]".into());
        }
        if self.large_scale_update_period_steps == 0 || self.fast_fading_update_period_steps == 0 {
            return fail("update periods must be at least one step".into());
        }
        Ok(())
    }

    pub fn p_max_w(&self) -> f64 {
        dbm_to_w(self.p_max_dbm)
    }

    pub fn p_min_w(&self) -> f64 {
        dbm_to_w(self.p_min_dbm)
    }

    pub fn gamma_min_lin(&self) -> f64 {
        db_to_lin(self.gamma_min_db)
    }

    /// Combined transmit and receive antenna gain folded into the link loss.
    pub fn antenna_gain_db(&self) -> f64 {
        self.bs_antenna_gain_db + self.ue_antenna_gain_db
    }

    /// Receiver noise power of every subchannel, in watts.
    pub fn noise_powers_w(&self) -> Vec<f64> {
        self.subchannel_bandwidth_hz
            .iter()
            .map(|&bw| noise_power_w(bw, self.noise_psd_dbm_hz, self.bs_noise_figure_db))
            .collect()
    }
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// NLOS urban pathloss in dB for a carrier in GHz at a 3-D distance in meters.
pub fn pathloss_db(f_ghz: f64, d_m: f64) -> Result<f64> {
    if !(d_m >= 1.0) {
        return Err(Error::DistanceTooShort(d_m));
    }
    Ok(32.4 + 20.0 * f_ghz.log10() + 30.0 * d_m.log10())
}

/// Linear power gain from a link loss in dB and linear shadowing and fading factors.
pub fn channel_gain(pl_db: f64, shadow_lin: f64, fading_lin: f64) -> f64 {
    10f64.powf(-pl_db / 10.0) * shadow_lin * fading_lin
}

/// Thermal noise power over `bw_hz` for a PSD in dBm/Hz and a receiver noise figure.
pub fn noise_power_w(bw_hz: f64, psd_dbm_hz: f64, noise_figure_db: f64) -> f64 {
    bw_hz * 10f64.powf((psd_dbm_hz + noise_figure_db - 30.0) / 10.0)
}

pub fn snr(assigned: bool, gain_lin: f64, p_w: f64, noise_w: f64) -> f64 {
    if assigned {
        gain_lin * p_w / noise_w
    } else {
        0.0
    }
}

/// Uplink energy efficiency in bits per joule; zero for an unassigned UE.
pub fn energy_efficiency(bw_hz: f64, p_w: f64, gamma_lin: f64, assigned: bool) -> Result<f64> {
    if !assigned {
        return Ok(0.0);
    }
    if p_w <= 0.0 {
        return Err(Error::ZeroPower);
    }
    Ok(bw_hz / p_w * (1.0 + gamma_lin).log2())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeState {
    pub position: [f64; 3],
    pub speed_mps: f64,
    pub heading_rad: f64,
}

impl UeState {
    /// Uniform placement over the square with a uniform speed and heading.
    pub fn random<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Self {
        let half = cfg.area_side_m / 2.0;
        UeState {
            position: [
                rng.random_range(-half..=half),
                rng.random_range(-half..=half),
                cfg.ue_height_m,
            ],
            speed_mps: rng.random_range(0.0..=cfg.max_speed_mps),
            heading_rad: rng.random_range(0.0..2.0 * PI),
        }
    }

    /// 3-D distance to the BS at the origin, floored at 1 m.
    pub fn distance_to_bs(&self, cfg: &ScenarioConfig) -> f64 {
        let [x, y, z] = self.position;
        let dz = z - cfg.bs_height_m;
        (x * x + y * y + dz * dz).sqrt().max(1.0)
    }

    /// Moves for `dt_s` seconds, reflecting off the edges of the square.
    fn travel(&mut self, cfg: &ScenarioConfig, dt_s: f64) {
        let half = cfg.area_side_m / 2.0;
        let step = self.speed_mps * dt_s;
        let mut dx = step * self.heading_rad.cos();
        let mut dy = step * self.heading_rad.sin();
        let (x, flip_x) = reflect(self.position[0] + dx, half);
        let (y, flip_y) = reflect(self.position[1] + dy, half);
        if flip_x {
            dx = -dx;
        }
        if flip_y {
            dy = -dy;
        }
        self.position[0] = x;
        self.position[1] = y;
        if flip_x || flip_y {
            self.heading_rad = dy.atan2(dx).rem_euclid(2.0 * PI);
        }
    }
}

fn reflect(mut v: f64, half: f64) -> (f64, bool) {
    let mut flipped = false;
    // A single step never exceeds the square, but loop in case of huge dt.
    while v > half || v < -half {
        v = if v > half { 2.0 * half - v } else { -2.0 * half - v };
        flipped = !flipped;
    }
    (v, flipped)
}

/// Row-major `ues x subchannels` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize) -> Self {
        Grid {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// Large- and small-scale channel decomposition for every (UE, subchannel).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    /// Pathloss net of antenna gains, in dB.
    pub pathloss_db: Grid,
    pub shadowing_lin: Grid,
    pub fading_power_lin: Grid,
    pub gain_lin: Grid,
    pub step_counter: u64,
}

impl ChannelState {
    /// Fresh realization for the current UE positions.
    pub fn new<R: Rng + ?Sized>(cfg: &ScenarioConfig, ues: &[UeState], rng: &mut R) -> Self {
        let (i, n) = (ues.len(), cfg.n_subchannels());
        let mut state = ChannelState {
            pathloss_db: Grid::new(i, n),
            shadowing_lin: Grid::new(i, n),
            fading_power_lin: Grid::new(i, n),
            gain_lin: Grid::new(i, n),
            step_counter: 0,
        };
        state.update_large_scale(cfg, ues, rng);
        state.redraw_fading(rng);
        state.refresh_gains();
        state
    }

    /// Advances one environment step: fading on the fast cadence, mobility,
    /// pathloss and shadowing on the slow one.
    pub fn advance<R: Rng + ?Sized>(&mut self, cfg: &ScenarioConfig, ues: &mut [UeState], rng: &mut R) {
        self.step_counter += 1;
        if self.step_counter % cfg.large_scale_update_period_steps == 0 {
            let dt = cfg.large_scale_update_period_steps as f64 * cfg.step_duration_s;
            for ue in ues.iter_mut() {
                ue.travel(cfg, dt);
                ue.heading_rad = rng.random_range(0.0..2.0 * PI);
            }
            self.update_large_scale(cfg, ues, rng);
        }
        if self.step_counter % cfg.fast_fading_update_period_steps == 0 {
            self.redraw_fading(rng);
        }
        self.refresh_gains();
    }

    pub fn n_ues(&self) -> usize {
        self.gain_lin.rows()
    }

    fn update_large_scale<R: Rng + ?Sized>(&mut self, cfg: &ScenarioConfig, ues: &[UeState], rng: &mut R) {
        let n = cfg.n_subchannels();
        for (i, ue) in ues.iter().enumerate() {
            let d = ue.distance_to_bs(cfg);
            let shared = sample_shadowing(cfg.shadowing_sigma_db, rng);
            for (c, &f) in cfg.carrier_freq_ghz.iter().enumerate() {
                let pl = pathloss_db(f, d).expect("distance is floored at 1 m") - cfg.antenna_gain_db();
                self.pathloss_db.set(i, c, pl);
                let shadow = if cfg.per_subchannel_shadowing && c > 0 {
                    sample_shadowing(cfg.shadowing_sigma_db, rng)
                } else {
                    shared
                };
                self.shadowing_lin.set(i, c, shadow);
            }
            debug_assert_eq!(self.pathloss_db.cols(), n);
        }
    }

    fn redraw_fading<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for v in self.fading_power_lin.data.iter_mut() {
            *v = sample_fading(rng);
        }
    }

    fn refresh_gains(&mut self) {
        for k in 0..self.gain_lin.data.len() {
            self.gain_lin.data[k] = channel_gain(
                self.pathloss_db.data[k],
                self.shadowing_lin.data[k],
                self.fading_power_lin.data[k],
            );
        }
    }
}

/// Log-normal shadowing factor with a dB-domain standard deviation.
pub fn sample_shadowing<R: Rng + ?Sized>(sigma_db: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (z * sigma_db * LN_10 / 10.0).exp()
}

/// Unit-mean exponential power of a Rayleigh amplitude. Never exactly zero.
pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let v: f64 = Exp1.sample(rng);
    v.max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pathloss_cases() {
        assert_relative_eq!(pathloss_db(1.0, 100.0).unwrap(), 92.4, epsilon = 1e-12);
        assert!((pathloss_db(6.0, 100.0).unwrap() - 107.9630).abs() < 1e-3);
        assert!((pathloss_db(6.0, 1.0).unwrap() - 47.9630).abs() < 1e-3);
        assert!(matches!(pathloss_db(6.0, 0.5), Err(Error::DistanceTooShort(_))));
    }

    #[test]
    fn gain_noise_snr_ee_cases() {
        assert_relative_eq!(channel_gain(100.0, 1.0, 1.0), 1e-10, max_relative = 1e-12);
        assert_eq!(channel_gain(0.0, 1.0, 1.0), 1.0);
        assert_relative_eq!(channel_gain(92.4, 2.0, 0.5), 5.754399373371566e-10, max_relative = 1e-12);

        assert_relative_eq!(noise_power_w(1.0, -170.0, 0.0), 1e-20, max_relative = 1e-12);
        assert_relative_eq!(noise_power_w(0.18e6, -170.0, 0.0), 1.8e-15, max_relative = 1e-12);
        assert_relative_eq!(noise_power_w(1.44e6, -160.0, 5.0), 4.553679830642466e-13, max_relative = 1e-12);

        assert_eq!(snr(false, 3.0, 2.0, 1.0), 0.0);
        assert_relative_eq!(snr(true, 1e-10, 0.1, 1.8e-15), 5555.555555555556, max_relative = 1e-12);
        assert_eq!(snr(true, 1.0, 1.0, 1.0), 1.0);

        assert_eq!(energy_efficiency(1e6, 0.1, 10.0, false).unwrap(), 0.0);
        let ee = energy_efficiency(0.18e6, 0.1, 5555.56, true).unwrap();
        assert!((ee / 2.2392e7 - 1.0).abs() < 1e-3);
        assert_eq!(energy_efficiency(1.0, 1.0, 1.0, true).unwrap(), 1.0);
        assert!(matches!(energy_efficiency(1.0, 0.0, 1.0, true), Err(Error::ZeroPower)));
    }

    #[test]
    fn presets_validate() {
        for kind in ScenarioKind::ALL {
            let cfg = ScenarioConfig::preset(kind);
            cfg.validate().unwrap();
            assert_eq!(cfg.n_subchannels(), 10);
            assert_eq!(ScenarioKind::from_name(kind.name()), Some(kind));
        }
        let mut bad = ScenarioConfig::preset(ScenarioKind::UrbanMicro);
        bad.p_min_dbm = 30.0;
        assert!(bad.validate().is_err());
        let mut bad = ScenarioConfig::preset(ScenarioKind::UrbanMicro);
        bad.carrier_freq_ghz.pop();
        assert!(bad.validate().is_err());
    }

    fn fixture(seed: u64) -> (ScenarioConfig, Vec<UeState>, ChannelState, ChaCha8Rng) {
        let cfg = ScenarioConfig::preset(ScenarioKind::UrbanMicro);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ues: Vec<UeState> = (0..3).map(|_| UeState::random(&cfg, &mut rng)).collect();
        let state = ChannelState::new(&cfg, &ues, &mut rng);
        (cfg, ues, state, rng)
    }

    fn assert_decomposition(state: &ChannelState) {
        for (k, &g) in state.gain_lin.values().iter().enumerate() {
            let expect = 10f64.powf(-state.pathloss_db.values()[k] / 10.0)
                * state.shadowing_lin.values()[k]
                * state.fading_power_lin.values()[k];
            assert!(g > 0.0 && g.is_finite());
            assert!(((g - expect) / expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn advance_cadence() {
        let (cfg, mut ues, mut state, mut rng) = fixture(7);
        let pl0 = state.pathloss_db.clone();
        let fading0 = state.fading_power_lin.clone();
        state.advance(&cfg, &mut ues, &mut rng);
        assert_eq!(state.step_counter, 1);
        assert_eq!(state.pathloss_db, pl0);
        assert_ne!(state.fading_power_lin, fading0);
        assert_decomposition(&state);

        let positions: Vec<_> = ues.iter().map(|u| u.position).collect();
        let shadow = state.shadowing_lin.clone();
        for _ in 1..99 {
            state.advance(&cfg, &mut ues, &mut rng);
        }
        assert_eq!(state.step_counter, 99);
        assert_eq!(state.pathloss_db, pl0);
        assert_eq!(state.shadowing_lin, shadow);
        state.advance(&cfg, &mut ues, &mut rng);
        assert_eq!(state.step_counter, 100);
        let moved: Vec<_> = ues.iter().map(|u| u.position).collect();
        assert_ne!(moved, positions);
        assert_ne!(state.pathloss_db, pl0);
        assert_ne!(state.shadowing_lin, shadow);
        assert_decomposition(&state);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let (cfg, mut ues_a, mut a, mut rng_a) = fixture(11);
        let (_, mut ues_b, mut b, mut rng_b) = fixture(11);
        for _ in 0..250 {
            a.advance(&cfg, &mut ues_a, &mut rng_a);
            b.advance(&cfg, &mut ues_b, &mut rng_b);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ues_stay_inside_square() {
        let mut cfg = ScenarioConfig::preset(ScenarioKind::IndoorOffice);
        cfg.area_side_m = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ues: Vec<UeState> = (0..4).map(|_| UeState::random(&cfg, &mut rng)).collect();
        let mut state = ChannelState::new(&cfg, &ues, &mut rng);
        for _ in 0..20_000 {
            state.advance(&cfg, &mut ues, &mut rng);
        }
        for ue in &ues {
            assert!(ue.position[0].abs() <= 1.0 && ue.position[1].abs() <= 1.0);
            assert!((0.0..=1.0).contains(&ue.speed_mps));
        }
    }

    #[test]
    fn shared_shadowing_option() {
        let mut cfg = ScenarioConfig::preset(ScenarioKind::UrbanMicro);
        cfg.per_subchannel_shadowing = false;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ues = vec![UeState::random(&cfg, &mut rng)];
        let state = ChannelState::new(&cfg, &ues, &mut rng);
        let row = state.shadowing_lin.row(0);
        assert!(row.iter().all(|&s| s == row[0]));
    }

    #[test]
    fn fading_has_unit_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 200_000;
        let mean = (0..n).map(|_| sample_fading(&mut rng)).sum::<f64>() / n as f64;
        assert!((0.99..=1.01).contains(&mean), "mean {mean}");
    }

    #[test]
    fn shadowing_log_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let sigma_db = 7.8;
        let n = 200_000;
        let logs: Vec<f64> = (0..n).map(|_| sample_shadowing(sigma_db, &mut rng).ln()).collect();
        let mean = logs.iter().sum::<f64>() / n as f64;
        let var = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target = sigma_db * LN_10 / 10.0;
        assert!(mean.abs() < 0.02 * target, "mean {mean}");
        assert!((var.sqrt() / target - 1.0).abs() < 0.02);
    }

    proptest! {
        #[test]
        fn pathloss_monotone(f in 0.5f64..100.0, d in 1.0f64..5000.0, df in 1e-6f64..10.0, dd in 1e-6f64..1000.0) {
            let base = pathloss_db(f, d).unwrap();
            prop_assert!(pathloss_db(f, d + dd).unwrap() > base);
            prop_assert!(pathloss_db(f + df, d).unwrap() > base);
        }
    }
}
