//! `metairl`: demonstrations, meta-training, adaptation, baselines and evaluation.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::UsageError;

#[derive(Parser, Debug)]
#[command(name = "metairl", version, about = "Meta-learned adversarial IRL for highway lane changes")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// TOML run configuration; overrides the profile.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Built-in configuration used when no --config is given.
    #[arg(long, global = true, value_enum, default_value_t = Profile::Full)]
    pub profile: Profile,

    /// Output directory for every artifact.
    #[arg(long, global = true, env = "METAAIRL_OUT_DIR")]
    pub out_dir: Option<PathBuf>,

    /// Base seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for parallel tasks and episodes (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    Desk,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Scratch,
    Pretrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Sample,
    Greedy,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the effective configuration as TOML.
    ShowConfig,

    /// Generate expert demonstrations for one or more styles.
    GenDemos {
        /// Style to generate (repeatable; default: the training styles).
        #[arg(long = "style")]
        styles: Vec<String>,
        /// Demonstrations per style (default: demos_per_task).
        #[arg(long)]
        count: Option<usize>,
        /// Output file; only valid with a single style.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Meta-train over the training styles.
    MetaTrain {
        /// Total meta iterations (default: from the configuration).
        #[arg(long)]
        iterations: Option<usize>,
        /// Comma-separated training styles (default: from the configuration).
        #[arg(long, value_delimiter = ',')]
        tasks: Option<Vec<String>>,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Skip the online test on the test style.
        #[arg(long)]
        no_online: bool,
    },

    /// Adapt a meta-trained checkpoint to a style for each demo budget.
    Adapt {
        /// Meta checkpoint (default: the newest one in the output directory).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Target style (default: the test style).
        #[arg(long)]
        style: Option<String>,
        /// Comma-separated demo budgets (default: from the configuration).
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<usize>>,
        /// Adaptation iterations (default: from the configuration).
        #[arg(long)]
        iterations: Option<usize>,
        /// Demonstration file of the target style.
        #[arg(long)]
        demos: Option<PathBuf>,
    },

    /// Train a baseline AIRL model for each demo budget.
    TrainAirl {
        #[arg(long, value_enum)]
        baseline: Baseline,
        /// Target style (default: the test style).
        #[arg(long)]
        style: Option<String>,
        /// Comma-separated demo budgets (default: from the configuration).
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<usize>>,
        /// Iterations on the target demos (default: the adaptation iterations).
        #[arg(long)]
        iterations: Option<usize>,
        /// Pooled pretraining iterations (default: meta iterations x tasks x inner iterations).
        #[arg(long)]
        pretrain_iterations: Option<usize>,
        /// Demonstration file of the target style.
        #[arg(long)]
        demos: Option<PathBuf>,
    },

    /// Evaluate a checkpoint (or the rule-based expert) on a style.
    Evaluate {
        /// Checkpoint to evaluate.
        #[arg(long, required_unless_present = "oracle", conflicts_with = "oracle")]
        checkpoint: Option<PathBuf>,
        /// Evaluate the rule-based expert instead of a model.
        #[arg(long)]
        oracle: bool,
        /// Style to evaluate on (default: the test style).
        #[arg(long)]
        style: Option<String>,
        /// Episodes (default: from the configuration).
        #[arg(long)]
        episodes: Option<usize>,
        /// Action selection (default: from the configuration).
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Name used in the report (default: the checkpoint file stem).
        #[arg(long)]
        label: Option<String>,
    },

    /// Compare models on a style against the expert's kinematics.
    Compare {
        /// Model as NAME=CHECKPOINT (repeatable).
        #[arg(long = "model", required = true)]
        models: Vec<String>,
        /// Style to compare on (default: the test style).
        #[arg(long)]
        style: Option<String>,
        /// Episodes per model (default: from the configuration).
        #[arg(long)]
        episodes: Option<usize>,
        /// Action selection (default: from the configuration).
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Expert reference demonstrations (default: freshly generated).
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Report file stem under the reports directory.
        #[arg(long, default_value = "comparison")]
        name: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = commands::Context::new(&cli.global)?;
    match cli.command {
        Command::ShowConfig => {
            print!("{}", ctx.config.to_toml());
            Ok(())
        }
        Command::GenDemos { styles, count, out } => commands::gen_demos(&ctx, styles, count, out),
        Command::MetaTrain {
            iterations,
            tasks,
            resume,
            no_online,
        } => commands::meta_train(&ctx, iterations, tasks, resume, no_online),
        Command::Adapt {
            checkpoint,
            style,
            budgets,
            iterations,
            demos,
        } => commands::adapt(&ctx, checkpoint, style, budgets, iterations, demos),
        Command::TrainAirl {
            baseline,
            style,
            budgets,
            iterations,
            pretrain_iterations,
            demos,
        } => commands::train_airl(
            &ctx,
            baseline,
            style,
            budgets,
            iterations,
            pretrain_iterations,
            demos,
        ),
        Command::Evaluate {
            checkpoint,
            oracle,
            style,
            episodes,
            mode,
            label,
        } => commands::evaluate(&ctx, checkpoint, oracle, style, episodes, mode, label),
        Command::Compare {
            models,
            style,
            episodes,
            mode,
            reference,
            name,
        } => commands::compare(&ctx, models, style, episodes, mode, reference, name),
    }
}
