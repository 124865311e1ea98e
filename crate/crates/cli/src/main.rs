use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use mfrl::baselines::Variant;
use mfrl::channel::ScenarioKind;
use mfrl::config::ExperimentConfig;
use mfrl::experiment;

#[derive(Parser)]
#[command(name = "mfrl", version, about = "Meta-federated RL for uplink channel and power allocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-train the shared initialization on the meta tasks.
    MetaTrain(Common),
    /// Fine-tune one benchmark variant in the target scenario.
    Adapt {
        #[command(flatten)]
        common: Common,
        /// MFRL, MRL, FRL, MARL or MFRL_early.
        #[arg(long, default_value = "MFRL")]
        variant: String,
        /// indoor_office, urban_micro, urban_macro or rural_macro.
        #[arg(long)]
        scenario: Option<String>,
        /// Defaults to `<out-dir>/meta_model.bin`.
        #[arg(long)]
        meta_model: Option<PathBuf>,
    },
    /// Evaluate frozen models on random user distributions.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Variants whose `models_<variant>` directories under out-dir are evaluated.
        #[arg(long, value_delimiter = ',', default_value = "MFRL,MRL,FRL,MARL,MFRL_early")]
        variants: Vec<String>,
        /// Extra model directories, evaluated under their directory name.
        #[arg(long, value_delimiter = ',')]
        models: Vec<PathBuf>,
    },
    /// Centralized optimum on random user distributions.
    Oracle(Common),
}

fn load(common: &Common) -> Result<(ExperimentConfig, u64)> {
    let cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let seed = common.seed.unwrap_or(cfg.run.seed);
    Ok((cfg, seed))
}

fn dir_label(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::MetaTrain(common) => {
            let (cfg, seed) = load(&common)?;
            let out = experiment::cmd_meta_train(&cfg, seed, &common.out_dir)?;
            let last = out.outcome.epochs.last().map_or(f64::NAN, |e| e.sum_reward);
            println!("meta model: {} (final summed reward {last:.4})", out.model_path.display());
        }
        Command::Adapt {
            common,
            variant,
            scenario,
            meta_model,
        } => {
            let (cfg, seed) = load(&common)?;
            let variant = Variant::from_name(&variant).ok_or_else(|| anyhow!("unknown variant `{variant}`"))?;
            let scenario = scenario
                .map(|s| ScenarioKind::from_name(&s).ok_or_else(|| anyhow!("unknown scenario `{s}`")))
                .transpose()?;
            let run = experiment::cmd_adapt(&cfg, seed, &common.out_dir, variant, scenario, meta_model.as_deref())?;
            if let Some(m) = run.metrics.last() {
                println!("{variant}: {} episodes, final reward {:.4}", run.metrics.len(), m.reward);
            }
        }
        Command::Evaluate {
            common,
            variants,
            models,
        } => {
            let (cfg, seed) = load(&common)?;
            let mut sets = Vec::new();
            for name in &variants {
                let v = Variant::from_name(name).ok_or_else(|| anyhow!("unknown variant `{name}`"))?;
                let dir = experiment::models_dir(&common.out_dir, v);
                if dir.exists() {
                    let m = experiment::load_models(&dir).with_context(|| format!("loading {}", dir.display()))?;
                    sets.push((v.name().to_string(), m));
                } else {
                    log::warn!("no models for {v} in {}", dir.display());
                }
            }
            for dir in &models {
                let m = experiment::load_models(dir).with_context(|| format!("loading {}", dir.display()))?;
                sets.push((dir_label(dir), m));
            }
            if sets.is_empty() {
                return Err(anyhow!("nothing to evaluate; run `adapt` first or pass --models"));
            }
            let rows = experiment::cmd_evaluate(&cfg, seed, &common.out_dir, &sets)?;
            for (label, _) in &sets {
                let sel: Vec<_> = rows.iter().filter(|r| &r.variant == label).collect();
                let mean = sel.iter().map(|r| r.stats.mean_sum_ee).sum::<f64>() / sel.len().max(1) as f64;
                println!("{label}: mean sum EE {mean:.6e} bits/J");
            }
        }
        Command::Oracle(common) => {
            let (cfg, seed) = load(&common)?;
            let rows = experiment::cmd_oracle(&cfg, seed, &common.out_dir)?;
            println!("{} oracle rows written", rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
