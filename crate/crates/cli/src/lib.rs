//! Command-line driver: argument parsing, run-directory management, and
//! report printing around the `mtcc` library.
//!
//! Every run writes into its output directory:
//! - `manifest.txt`: the fully resolved configuration, seed, and versions,
//!   sufficient to replay the run
//! - `checkpoint.json` (training subcommands)
//! - `curve.csv` (training subcommands)
//! - `eval_report.csv` (`eval`)
//!
//! File contents are deterministic: repeating a run with the same seed and
//! config reproduces them byte for byte.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use mtcc::a2c::train_single;
use mtcc::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT_VERSION};
use mtcc::config::{kv_to_string, read_kv_file, RunConfig};
use mtcc::curve::{write_curve, CurveRow};
use mtcc::distill::{train_distill_multitask, train_distill_single, DistillStats};
use mtcc::env::{ALL_VARIANTS, SCALED_VARIANTS};
use mtcc::eval::{EvalMode, EvalReport};
use mtcc::trainers::{evaluate_matrix, train_vanilla_multitask, transfer_and_finetune, MultiTaskSchedule};

#[derive(Parser)]
#[command(
    name = "mtcc",
    version,
    about = "Multi-task continuous-control training, distillation, and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args)]
pub struct CommonOpts {
    /// Config file: one `key = value` per line, `#` comments
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed from the config file
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: `runs/<subcommand>`)
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum Command {
    /// List the registered environment variants
    Envs {
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Train a single-task actor-critic from scratch
    Train {
        /// Environment variant name
        #[arg(long)]
        env: String,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Vanilla multi-task training with per-environment heads
    Multitask {
        /// Comma-separated variant names (default: the six scaled variants)
        #[arg(long, value_delimiter = ',')]
        envs: Option<Vec<String>>,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Distill teacher checkpoints into a student network
    Distill {
        /// Teacher checkpoint path; repeat once per environment
        #[arg(long = "teacher", required = true)]
        teachers: Vec<PathBuf>,
        /// Comma-separated variant names, one per teacher
        /// (default for --multi-task: the six scaled variants)
        #[arg(long, value_delimiter = ',')]
        envs: Option<Vec<String>>,
        /// Multi-task student: one head per environment, rollouts sampled
        /// from the student (p_student forced to 1)
        #[arg(long)]
        multi_task: bool,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Transfer a single-task checkpoint and fine-tune on a target env
    Finetune {
        /// Source checkpoint path
        #[arg(long)]
        source: PathBuf,
        /// Target environment variant
        #[arg(long)]
        target_env: String,
        /// Fine-tune every layer instead of only the final ones
        #[arg(long)]
        full_network: bool,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Evaluate a checkpoint over full-episode rollouts
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated variant names (default: the checkpoint's own envs)
        #[arg(long, value_delimiter = ',')]
        envs: Option<Vec<String>>,
        /// Rollouts per environment (default 20)
        #[arg(long)]
        n_rollouts: Option<usize>,
        /// Use the Gaussian mean instead of sampling
        #[arg(long)]
        eval_deterministic: bool,
        #[command(flatten)]
        opts: CommonOpts,
    },
}

pub fn run<I, T>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    match cli.command {
        Command::Envs { opts: _ } => {
            for name in ALL_VARIANTS {
                println!("{name}");
            }
            Ok(())
        }
        Command::Train { env, opts } => {
            let (config, out_dir) = prepare(&opts, "train")?;
            let mut manifest = manifest_base(&config, "train");
            manifest.insert("envs".into(), env.clone());
            write_manifest(&manifest, &out_dir)?;

            let started = Instant::now();
            let (ckpt, curve) = train_single(&env, &config.train)?;
            finish_training_run(&out_dir, &ckpt, &curve, started)?;
            Ok(())
        }
        Command::Multitask { envs, opts } => {
            let (config, out_dir) = prepare(&opts, "multitask")?;
            let envs = envs.unwrap_or_else(default_multitask_envs);
            let mut manifest = manifest_base(&config, "multitask");
            manifest.insert("envs".into(), envs.join(","));
            write_manifest(&manifest, &out_dir)?;

            let schedule = MultiTaskSchedule::new(envs, config.steps_per_visit, config.train.total_env_steps);
            let started = Instant::now();
            let (ckpt, curve) = train_vanilla_multitask(&schedule, &config.train)?;
            finish_training_run(&out_dir, &ckpt, &curve, started)?;
            Ok(())
        }
        Command::Distill {
            teachers,
            envs,
            multi_task,
            opts,
        } => {
            let (config, out_dir) = prepare(&opts, "distill")?;
            let envs = match envs {
                Some(envs) => envs,
                None if multi_task => default_multitask_envs(),
                None => anyhow::bail!("--envs is required for single-task distillation"),
            };
            let mut manifest = manifest_base(&config, if multi_task { "distill-multitask" } else { "distill" });
            manifest.insert("envs".into(), envs.join(","));
            manifest.insert(
                "teachers".into(),
                teachers.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(","),
            );
            write_manifest(&manifest, &out_dir)?;

            let loaded: Vec<Checkpoint> = teachers
                .iter()
                .map(|p| load_checkpoint(p).with_context(|| format!("loading teacher {}", p.display())))
                .collect::<anyhow::Result<_>>()?;

            let started = Instant::now();
            let (ckpt, curve, stats) = if multi_task {
                train_distill_multitask(&envs, &loaded, &config.distill)?
            } else {
                if envs.len() != 1 || loaded.len() != 1 {
                    anyhow::bail!("single-task distillation takes exactly one --teacher and one env");
                }
                train_distill_single(&envs[0], &loaded[0], &config.distill)?
            };
            write_distill_stats(&stats, &out_dir)?;
            for head in &stats.per_env {
                println!(
                    "{}: mean KL {} -> {}",
                    head.env_name, head.initial_kl, head.final_kl
                );
            }
            finish_training_run(&out_dir, &ckpt, &curve, started)?;
            Ok(())
        }
        Command::Finetune {
            source,
            target_env,
            full_network,
            opts,
        } => {
            let (config, out_dir) = prepare(&opts, "finetune")?;
            let mut manifest = manifest_base(&config, "finetune");
            manifest.insert("envs".into(), target_env.clone());
            manifest.insert("source".into(), source.display().to_string());
            manifest.insert("full_network".into(), full_network.to_string());
            write_manifest(&manifest, &out_dir)?;

            let source_ckpt = load_checkpoint(&source).with_context(|| format!("loading {}", source.display()))?;
            let started = Instant::now();
            let (ckpt, curve) = transfer_and_finetune(&source_ckpt, &target_env, &config.train, full_network)?;
            finish_training_run(&out_dir, &ckpt, &curve, started)?;
            Ok(())
        }
        Command::Eval {
            checkpoint,
            envs,
            n_rollouts,
            eval_deterministic,
            opts,
        } => {
            let (config, out_dir) = prepare(&opts, "eval")?;
            let ckpt = load_checkpoint(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            let envs = envs.unwrap_or_else(|| ckpt.env_names.clone());
            let n_rollouts = n_rollouts.unwrap_or(config.train.eval_rollouts);
            let mode = if eval_deterministic {
                EvalMode::MeanAction
            } else {
                EvalMode::Stochastic
            };

            let mut manifest = manifest_base(&config, "eval");
            manifest.insert("envs".into(), envs.join(","));
            manifest.insert("checkpoint".into(), checkpoint.display().to_string());
            manifest.insert("eval_deterministic".into(), eval_deterministic.to_string());
            manifest.insert("n_rollouts".into(), n_rollouts.to_string());
            write_manifest(&manifest, &out_dir)?;

            let reports = evaluate_matrix(&ckpt, &envs, n_rollouts, config.train.seed, mode)?;
            write_eval_report(&reports, &out_dir)?;
            for r in &reports {
                println!(
                    "{:<12} {:>10.2} +- {:>8.2}  (n={})",
                    r.env_name, r.mean_return, r.std_return, r.n_rollouts
                );
            }
            Ok(())
        }
    }
}

fn default_multitask_envs() -> Vec<String> {
    SCALED_VARIANTS.iter().map(|s| s.to_string()).collect()
}

/// Resolves defaults -> config file -> --seed, and creates the out dir.
fn prepare(opts: &CommonOpts, subcommand: &str) -> anyhow::Result<(RunConfig, PathBuf)> {
    let mut config = RunConfig::default();
    if let Some(path) = &opts.config {
        let kv = read_kv_file(path).with_context(|| format!("reading config {}", path.display()))?;
        config.apply_kv(&kv)?;
    }
    if let Some(seed) = opts.seed {
        config.set_seed(seed);
    }
    let out_dir = opts
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(subcommand));
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    Ok((config, out_dir))
}

fn manifest_base(config: &RunConfig, subcommand: &str) -> BTreeMap<String, String> {
    let mut manifest = config.to_kv();
    manifest.insert("subcommand".into(), subcommand.into());
    manifest.insert("app_version".into(), env!("CARGO_PKG_VERSION").into());
    manifest.insert(
        "checkpoint_format_version".into(),
        CHECKPOINT_FORMAT_VERSION.to_string(),
    );
    manifest
}

fn write_manifest(manifest: &BTreeMap<String, String>, out_dir: &Path) -> anyhow::Result<()> {
    std::fs::write(out_dir.join("manifest.txt"), kv_to_string(manifest))?;
    Ok(())
}

fn finish_training_run(
    out_dir: &Path,
    ckpt: &Checkpoint,
    curve: &[CurveRow],
    started: Instant,
) -> anyhow::Result<()> {
    save_checkpoint(ckpt, &out_dir.join("checkpoint.json"))?;
    write_curve(curve, &out_dir.join("curve.csv"))?;
    if let Some(last) = curve.last() {
        println!(
            "final eval: {} at {} steps: {:.2} +- {:.2}",
            last.env_name, last.env_steps, last.mean_return, last.std_return
        );
    }
    println!(
        "wrote {} ({} curve rows) in {:.1}s",
        out_dir.join("checkpoint.json").display(),
        curve.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn write_distill_stats(stats: &DistillStats, out_dir: &Path) -> anyhow::Result<()> {
    let mut text = String::from("env,initial_kl,final_kl\n");
    for head in &stats.per_env {
        text.push_str(&format!("{},{},{}\n", head.env_name, head.initial_kl, head.final_kl));
    }
    std::fs::write(out_dir.join("distill_kl.csv"), text)?;
    Ok(())
}

fn write_eval_report(reports: &[EvalReport], out_dir: &Path) -> anyhow::Result<()> {
    let mut text = String::from("env,n_rollouts,mean_return,std_return\n");
    for r in reports {
        text.push_str(&format!(
            "{},{},{},{}\n",
            r.env_name, r.n_rollouts, r.mean_return, r.std_return
        ));
    }
    std::fs::write(out_dir.join("eval_report.csv"), text)?;
    Ok(())
}
