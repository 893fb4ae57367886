use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use art_core::config::{PipelineConfig, SEED_ENV};
use art_core::pipeline::{self, AdaptiveInputs, EvalInputs};
use art_core::Result;

#[derive(Parser)]
#[command(name = "art", version, about = "Adaptive relation tuning pipeline")]
struct Cli {
    /// Pipeline config file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides ART_SEED and the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Inputs {
    /// Relation annotations, one JSON triplet per line.
    #[arg(long)]
    annotations: PathBuf,
    /// Predicate vocabulary, `predicate<TAB>category` per line.
    #[arg(long)]
    vocab: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Split annotations into train / pool / validation.
    Partition {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render question / positive / negative instruction instances.
    GenInstructions {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Balanced initialization round over the pool.
    SampleBalanced {
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// One adaptive round driven by model predictions on the pool.
    SampleAdaptive {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        records: PathBuf,
        /// JSON object mapping each predicate to its validation recall.
        #[arg(long)]
        recalls: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recall metrics for a set of predictions.
    Eval {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        records: PathBuf,
        /// Score only the validation split of this partition.
        #[arg(long)]
        partition: Option<PathBuf>,
        /// Also write per-predicate recall for the next adaptive round.
        #[arg(long)]
        recalls_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Deterministic mock predictions for instruction instances.
    MockPredict {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-loop comparison of sampling strategies on a synthetic pool.
    Simulate {
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cfg.resolve_seed(cli.seed, std::env::var(SEED_ENV).ok().as_deref())?;

    match cli.command {
        Command::Partition { inputs, out } => {
            let part = pipeline::cmd_partition(&inputs.annotations, &inputs.vocab, &cfg, &out)?;
            println!(
                "train {} pool {} val {}",
                part.train().len(),
                part.pool().len(),
                part.val().len()
            );
        }
        Command::GenInstructions { inputs, out } => {
            let n = pipeline::cmd_gen_instructions(&inputs.annotations, &inputs.vocab, &cfg, &out)?.len();
            println!("{n} instances");
        }
        Command::SampleBalanced { partition, out } => {
            let s = pipeline::cmd_sample_balanced(&partition, &cfg, &out)?;
            println!("budget {} selected {} shortfall {}", s.budget, s.selected, s.shortfall);
        }
        Command::SampleAdaptive {
            inputs,
            partition,
            records,
            recalls,
            out,
        } => {
            let report = pipeline::cmd_sample_adaptive(
                &AdaptiveInputs {
                    partition: &partition,
                    records: &records,
                    recalls: &recalls,
                    annotations: &inputs.annotations,
                    vocab: &inputs.vocab,
                },
                &cfg,
                &out,
            )?;
            let selected: usize = report.iter().map(|r| r.selected).sum();
            println!("selected {selected} across {} predicates", report.len());
        }
        Command::Eval {
            inputs,
            records,
            partition,
            recalls_out,
            out,
        } => {
            let report = pipeline::cmd_eval(
                &EvalInputs {
                    annotations: &inputs.annotations,
                    vocab: &inputs.vocab,
                    records: &records,
                    partition: partition.as_deref(),
                    recalls_out: recalls_out.as_deref(),
                },
                &cfg,
                &out,
            )?;
            for (k, m) in &report.at_k {
                println!(
                    "@{k}: R {:.4} mR {:.4} gR {:.4} gmR {:.4}",
                    m.recall, m.mean_recall, m.generalized_recall, m.generalized_mean_recall
                );
            }
        }
        Command::MockPredict { inputs, instances, out } => {
            let n = pipeline::cmd_mock_predict(&instances, &inputs.annotations, &inputs.vocab, &cfg, &out)?.len();
            println!("{n} records");
        }
        Command::Simulate { out } => {
            let summary = pipeline::cmd_simulate(&cfg, &out)?;
            for s in &summary.strategies {
                let mr = s
                    .mean_recall
                    .iter()
                    .map(|(k, v)| format!("mR@{k} {v:.4}"))
                    .collect::<Vec<_>>()
                    .join(" ");
                println!("{}: train {} tail share {:.4} {mr}", s.strategy, s.train_size, s.tail_share);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
