//! The experiment verbs behind the command line: meta-training, adaptation
//! of a benchmark variant, frozen-policy evaluation and the oracle sweep.
//!
//! Every verb is a pure function of `(config, seed)` and writes CSV files
//! plus SVG charts drawn from the same rows.
//!
//! CSV schemas (version 1):
//!
//! - `meta_reward.csv`: `epoch, task{k}_ues{I}..., sum_reward`
//! - `adapt_metrics_{variant}.csv`: `episode, reward, entropy_channel,
//!   entropy_power, sum_ee, collision_rate, eta_ue{i}..., actor, critic,
//!   clip_fraction, averaged`
//! - `eval_ee.csv`: `variant, distribution, n_ues, mean_sum_ee,
//!   oracle_sum_ee, oracle_gap, collision_rate`
//! - `oracle.csv`: `distribution, n_ues, oracle_sum_ee, assignment`
//!
//! Energy efficiencies are in bits/J, averaged over evaluation steps.

use std::fs;
use std::path::{Path, PathBuf};

use crate::baselines::{self, Variant, VariantRun};
use crate::channel::ScenarioKind;
use crate::config::{derive_seed, ExperimentConfig};
use crate::env::{Env, EnvConfig};
use crate::meta::{self, TaskSpec};
use crate::net::{self, PolicyParams};
use crate::plot::{self, Series};
use crate::rng::{self, STREAM_ENV, STREAM_EVAL, STREAM_INIT};
use crate::{Error, Result};

const CSV_FLOAT_NAN: &str = "nan";

/// Shortest round-trip representation, so equal values print identically.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        CSV_FLOAT_NAN.to_string()
    } else {
        format!("{x}")
    }
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone)]
pub struct MetaTrainOutput {
    pub model_path: PathBuf,
    pub csv_path: PathBuf,
    pub outcome: meta::MetaOutcome,
}

pub fn cmd_meta_train(cfg: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<MetaTrainOutput> {
    cfg.validate()?;
    ensure_dir(out_dir)?;
    let tasks = cfg.meta_tasks(seed)?;
    let initial = PolicyParams::init(cfg.topology(), &mut rng::stream(seed, STREAM_INIT));
    let outcome = meta::meta_train(initial, &tasks, &cfg.meta_config(), seed)?;

    let model_path = out_dir.join("meta_model.bin");
    outcome.params.save(&model_path)?;

    let mut header = vec!["epoch".to_string()];
    header.extend(tasks.iter().enumerate().map(|(k, t)| format!("task{k}_ues{}", t.n_ues)));
    header.push("sum_reward".into());
    let rows: Vec<Vec<String>> = outcome
        .epochs
        .iter()
        .map(|e| {
            let mut r = vec![e.epoch.to_string()];
            r.extend(e.task_rewards.iter().map(|&x| fmt_f64(x)));
            r.push(fmt_f64(e.sum_reward));
            r
        })
        .collect();
    let csv_path = out_dir.join("meta_reward.csv");
    write_csv(&csv_path, &header, &rows)?;
    let svg = plot::line_chart(
        "Meta-training reward",
        "epoch",
        "summed task reward",
        &[Series {
            label: "sum",
            points: outcome.epochs.iter().map(|e| (e.epoch as f64, e.sum_reward)).collect(),
        }],
    );
    write_text(&out_dir.join("meta_reward.svg"), &svg)?;
    Ok(MetaTrainOutput {
        model_path,
        csv_path,
        outcome,
    })
}

/// Saves one model per UE as `ue{i}.bin` inside `dir`.
pub fn save_models(dir: &Path, models: &[PolicyParams]) -> Result<()> {
    ensure_dir(dir)?;
    for (i, m) in models.iter().enumerate() {
        m.save(&dir.join(format!("ue{i}.bin")))?;
    }
    Ok(())
}

/// Loads `ue0.bin`, `ue1.bin`, ... until the first missing index.
pub fn load_models(dir: &Path) -> Result<Vec<PolicyParams>> {
    let mut models = Vec::new();
    loop {
        let p = dir.join(format!("ue{}.bin", models.len()));
        if !p.exists() {
            break;
        }
        models.push(PolicyParams::load(&p)?);
    }
    if models.is_empty() {
        return Err(Error::NoModels);
    }
    Ok(models)
}

pub fn models_dir(out_dir: &Path, variant: Variant) -> PathBuf {
    out_dir.join(format!("models_{}", variant.name()))
}

pub fn adapt_metrics_header(n_ues: usize) -> Vec<String> {
    let mut h: Vec<String> = ["episode", "reward", "entropy_channel", "entropy_power", "sum_ee", "collision_rate"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..n_ues).map(|i| format!("eta_ue{i}")));
    h.extend(["actor", "critic", "clip_fraction", "averaged"].iter().map(|s| s.to_string()));
    h
}

pub fn cmd_adapt(
    cfg: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
    variant: Variant,
    scenario: Option<ScenarioKind>,
    meta_model: Option<&Path>,
) -> Result<VariantRun> {
    let mut cfg = cfg.clone();
    if let Some(kind) = scenario {
        cfg.scenario.kind = kind;
    }
    cfg.validate()?;
    ensure_dir(out_dir)?;
    let meta = if variant.uses_meta_init() {
        let path = meta_model.map(Path::to_path_buf).unwrap_or_else(|| out_dir.join("meta_model.bin"));
        if !path.exists() {
            return Err(Error::MissingMetaModel(format!("{} ({})", variant.name(), path.display())));
        }
        let m = PolicyParams::load(&path)?;
        if m.topology != cfg.topology() {
            return Err(Error::TopologyMismatch);
        }
        Some(m)
    } else {
        None
    };
    let task = cfg.adapt_task(seed)?;
    let run = baselines::run_variant(variant, &task, &cfg.variant_config(), meta.as_ref(), seed)?;

    let rows: Vec<Vec<String>> = run
        .metrics
        .iter()
        .map(|m| {
            let mut r = vec![
                m.episode.to_string(),
                fmt_f64(m.reward),
                fmt_f64(m.entropy_channel),
                fmt_f64(m.entropy_power),
                fmt_f64(m.sum_ee),
                fmt_f64(m.collision_rate),
            ];
            r.extend(m.eta.iter().map(|&x| fmt_f64(x)));
            r.extend([fmt_f64(m.actor), fmt_f64(m.critic), fmt_f64(m.clip_fraction), (m.averaged as u8).to_string()]);
            r
        })
        .collect();
    let name = variant.name();
    write_csv(
        &out_dir.join(format!("adapt_metrics_{name}.csv")),
        &adapt_metrics_header(task.n_ues),
        &rows,
    )?;
    let svg = plot::line_chart(
        &format!("{name} adaptation"),
        "episode",
        "reward",
        &[Series {
            label: name,
            points: run.metrics.iter().map(|m| (m.episode as f64, m.reward)).collect(),
        }],
    );
    write_text(&out_dir.join(format!("adapt_reward_{name}.svg")), &svg)?;
    let svg = plot::line_chart(
        &format!("{name} policy entropy"),
        "episode",
        "categorical entropy",
        &[Series {
            label: name,
            points: run.metrics.iter().map(|m| (m.episode as f64, m.entropy_channel)).collect(),
        }],
    );
    write_text(&out_dir.join(format!("adapt_entropy_{name}.svg")), &svg)?;

    save_models(&models_dir(out_dir, variant), &run.models)?;
    for c in &run.checkpoints {
        save_models(&out_dir.join(format!("checkpoint_{name}_ep{}", c.episode)), &c.models)?;
    }
    Ok(run)
}

/// Averages over the steps of one frozen-policy evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalStats {
    pub mean_sum_ee: f64,
    pub oracle_sum_ee: f64,
    pub collision_rate: f64,
}

/// Runs frozen policies for `n_steps` with fading updates; UE `i` uses
/// `models[i % models.len()]`. The oracle is solved on the same gains each
/// step.
pub fn evaluate_policies(
    models: &[PolicyParams],
    task: &TaskSpec,
    env_cfg: EnvConfig,
    n_steps: usize,
    stochastic: bool,
    grid_points: usize,
    policy_seed: u64,
) -> Result<EvalStats> {
    if models.is_empty() {
        return Err(Error::NoModels);
    }
    let n = task.scenario.n_subchannels();
    if models.iter().any(|m| m.topology.n_channels != n) {
        return Err(Error::TopologyMismatch);
    }
    let mut env_rng = rng::stream(task.seed, STREAM_ENV);
    let mut policy_rng = rng::stream(policy_seed, STREAM_EVAL);
    let (mut env, mut obs) = Env::reset(task, env_cfg, &mut env_rng)?;
    let grid = baselines::power_grid(&task.scenario, grid_points);
    let (mut ee, mut oracle, mut collisions) = (0.0, 0.0, 0usize);
    for _ in 0..n_steps {
        let gains: Vec<Vec<f64>> = (0..task.n_ues).map(|i| env.channel().gain_lin.row(i).to_vec()).collect();
        oracle += baselines::oracle_optimum(&gains, &grid, &task.scenario)?.sum_ee;
        let actions: Vec<_> = obs
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let out = net::forward_obs(&models[i % models.len()], o);
                if stochastic {
                    net::sample_action(&out, &task.scenario, &mut policy_rng).action
                } else {
                    net::greedy_action(&out, &task.scenario)
                }
            })
            .collect();
        let step = env.joint_step(&actions, &mut env_rng)?;
        ee += step.stats.sum_ee();
        if step.stats.collision {
            collisions += 1;
        }
        obs = step.next_obs;
    }
    let s = n_steps.max(1) as f64;
    Ok(EvalStats {
        mean_sum_ee: ee / s,
        oracle_sum_ee: oracle / s,
        collision_rate: collisions as f64 / s,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub variant: String,
    pub distribution: usize,
    pub n_ues: usize,
    pub stats: EvalStats,
}

/// Seed of the `d`-th evaluation user distribution; shared by all variants.
pub fn distribution_seed(seed: u64, d: usize) -> u64 {
    derive_seed(seed, 1_000_000 + d as u64)
}

/// Evaluates each `(label, models)` pair on the same random user
/// distributions; with `sweep_ues` set, on every listed UE count as well.
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
    variants: &[(String, Vec<PolicyParams>)],
) -> Result<Vec<EvalRow>> {
    cfg.validate()?;
    ensure_dir(out_dir)?;
    let scenario = cfg.scenario()?;
    let ev = &cfg.evaluate;
    let mut rows = Vec::new();
    for (label, models) in variants {
        let counts: Vec<usize> = if ev.sweep_ues.is_empty() {
            vec![models.len()]
        } else {
            ev.sweep_ues.clone()
        };
        for &n_ues in &counts {
            for d in 0..ev.n_distributions {
                let task = TaskSpec::new(n_ues, scenario.clone(), distribution_seed(seed, d));
                let stats = evaluate_policies(
                    models,
                    &task,
                    cfg.env,
                    ev.n_steps,
                    ev.stochastic,
                    ev.oracle_grid_points,
                    task.seed,
                )?;
                rows.push(EvalRow {
                    variant: label.clone(),
                    distribution: d,
                    n_ues,
                    stats,
                });
            }
        }
    }
    let header: Vec<String> = [
        "variant",
        "distribution",
        "n_ues",
        "mean_sum_ee",
        "oracle_sum_ee",
        "oracle_gap",
        "collision_rate",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.variant.clone(),
                r.distribution.to_string(),
                r.n_ues.to_string(),
                fmt_f64(r.stats.mean_sum_ee),
                fmt_f64(r.stats.oracle_sum_ee),
                fmt_f64(r.stats.oracle_sum_ee - r.stats.mean_sum_ee),
                fmt_f64(r.stats.collision_rate),
            ]
        })
        .collect();
    write_csv(&out_dir.join("eval_ee.csv"), &header, &table)?;

    let mut bars: Vec<(String, f64)> = Vec::new();
    for (label, _) in variants {
        let sel: Vec<&EvalRow> = rows.iter().filter(|r| &r.variant == label).collect();
        let mean = sel.iter().map(|r| r.stats.mean_sum_ee).sum::<f64>() / sel.len().max(1) as f64;
        bars.push((label.clone(), mean));
    }
    if !rows.is_empty() {
        let first = &variants[0].0;
        let sel: Vec<&EvalRow> = rows.iter().filter(|r| &r.variant == first).collect();
        bars.push(("oracle".into(), sel.iter().map(|r| r.stats.oracle_sum_ee).sum::<f64>() / sel.len() as f64));
    }
    write_text(&out_dir.join("eval_ee.svg"), &plot::bar_chart("Evaluated sum EE", "bits/J", &bars))?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub distribution: usize,
    pub n_ues: usize,
    pub solution: baselines::OracleSolution,
}

/// Centralized optimum on the initial gains of each user distribution, for
/// every UE count in `evaluate.sweep_ues` (or the adaptation UE count).
pub fn cmd_oracle(cfg: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<Vec<OracleRow>> {
    cfg.validate()?;
    ensure_dir(out_dir)?;
    let scenario = cfg.scenario()?;
    let grid = baselines::power_grid(&scenario, cfg.evaluate.oracle_grid_points);
    let counts = if cfg.evaluate.sweep_ues.is_empty() {
        vec![cfg.adapt.n_ues]
    } else {
        cfg.evaluate.sweep_ues.clone()
    };
    let mut rows = Vec::new();
    for &n_ues in &counts {
        for d in 0..cfg.evaluate.n_distributions {
            let task = TaskSpec::new(n_ues, scenario.clone(), distribution_seed(seed, d));
            let (env, _) = Env::reset(&task, cfg.env, &mut rng::stream(task.seed, STREAM_ENV))?;
            let gains: Vec<Vec<f64>> = (0..n_ues).map(|i| env.channel().gain_lin.row(i).to_vec()).collect();
            let solution = baselines::oracle_optimum(&gains, &grid, &scenario)?;
            rows.push(OracleRow {
                distribution: d,
                n_ues,
                solution,
            });
        }
    }
    let header: Vec<String> = ["distribution", "n_ues", "oracle_sum_ee", "assignment"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let a: Vec<String> = r.solution.assignment.iter().map(|c| c.to_string()).collect();
            vec![
                r.distribution.to_string(),
                r.n_ues.to_string(),
                fmt_f64(r.solution.sum_ee),
                a.join(" "),
            ]
        })
        .collect();
    write_csv(&out_dir.join("oracle.csv"), &header, &table)?;
    let points: Vec<(f64, f64)> = counts
        .iter()
        .map(|&i| {
            let sel: Vec<_> = rows.iter().filter(|r| r.n_ues == i).collect();
            (i as f64, sel.iter().map(|r| r.solution.sum_ee).sum::<f64>() / sel.len().max(1) as f64)
        })
        .collect();
    let svg = plot::line_chart(
        "Oracle sum EE",
        "number of UEs",
        "bits/J",
        &[Series {
            label: "oracle",
            points,
        }],
    );
    write_text(&out_dir.join("oracle.svg"), &svg)?;
    Ok(rows)
}
