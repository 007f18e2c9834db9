use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mdne_cli::{
    cmd_embed_node, cmd_eval, cmd_sweep, cmd_train, exit_code_for, parse_config, parse_grid,
    EvalArgs, EvalTask,
};
use mdne_core::trainer::SweepObjective;

#[derive(Parser)]
#[command(
    name = "mdne",
    about = "Attributed-network embedding experiments: train, evaluate, embed, sweep"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a config file; writes checkpoint, embeddings, and
    /// the training report.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override the seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Evaluate a checkpoint or embeddings file on one task.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint (.ckpt) or embeddings (.tsv) produced by train.
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        task: String,
        /// Comma-separated k values for reconstruct.
        #[arg(long, default_value = "1000,5000")]
        k: String,
        /// Holdout ratio for linkpred / attrpred.
        #[arg(long, default_value_t = 0.05)]
        ratio: f64,
        /// Test fraction for classify.
        #[arg(long, default_value_t = 0.1)]
        test_ratio: f64,
        /// Split seed; must match the training holdout seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Embed a node from its raw modality vectors (either may be missing).
    EmbedNode {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        structure: Option<PathBuf>,
        #[arg(long)]
        attributes: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Hyperparameter sweep over a grid file; coordinate-wise, ranked CSV out.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        /// Objective task: reconstruct, linkpred, attrpred, or classify.
        #[arg(long, default_value = "reconstruct")]
        task: String,
        #[arg(long, default_value = "1000")]
        k: String,
        #[arg(long, default_value_t = 0.05)]
        ratio: f64,
        #[arg(long, default_value_t = 0.1)]
        test_ratio: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
}

fn parse_ks(raw: &str) -> anyhow::Result<Vec<usize>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| anyhow::anyhow!(mdne_cli::ConfigError(format!("bad k value {s:?}"))))
        })
        .collect()
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            threads,
        } => {
            mdne_core::tensor::set_threads(threads);
            let mut cfg = parse_config(&config)?;
            if let Some(seed) = seed {
                cfg.train.seed = seed;
                cfg.train.rbm.seed = seed;
            }
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            cmd_train(&cfg)?;
        }
        Command::Eval {
            config,
            artifact,
            task,
            k,
            ratio,
            test_ratio,
            seed,
            out,
            threads,
        } => {
            mdne_core::tensor::set_threads(threads);
            let mut cfg = parse_config(&config)?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            let args = EvalArgs {
                artifact,
                task: task.parse::<EvalTask>()?,
                ks: parse_ks(&k)?,
                ratio,
                test_ratio,
                seed: seed.unwrap_or(cfg.train.seed),
            };
            let path = cmd_eval(&cfg, &args)?;
            eprintln!("metrics written to {}", path.display());
        }
        Command::EmbedNode {
            checkpoint,
            structure,
            attributes,
            threads,
        } => {
            mdne_core::tensor::set_threads(threads);
            let line = cmd_embed_node(&checkpoint, structure.as_deref(), attributes.as_deref())?;
            println!("{line}");
        }
        Command::Sweep {
            config,
            grid,
            task,
            k,
            ratio,
            test_ratio,
            seed,
            out,
            threads,
        } => {
            mdne_core::tensor::set_threads(threads);
            let mut cfg = parse_config(&config)?;
            if let Some(seed) = seed {
                cfg.train.seed = seed;
                cfg.train.rbm.seed = seed;
            }
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            let grid = parse_grid(&grid)?;
            let ks = parse_ks(&k)?;
            let objective = match task.parse::<EvalTask>()? {
                EvalTask::Reconstruct => SweepObjective::ReconstructionPrecision {
                    k: ks.first().copied().unwrap_or(1000),
                },
                EvalTask::LinkPred => SweepObjective::LinkAuc { ratio },
                EvalTask::AttrPred => SweepObjective::AttributeAuc { ratio },
                EvalTask::Classify => SweepObjective::ClassificationMicroF1 { test_ratio },
            };
            let path = cmd_sweep(&cfg, &grid, &objective)?;
            eprintln!("sweep results written to {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err) as u8)
        }
    }
}
