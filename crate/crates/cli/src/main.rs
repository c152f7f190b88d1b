use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use dqlids_cli::commands::{self, print_metrics, print_tallies, SWEEP_SUMMARY};
use dqlids_cli::{report, RunConfig, Split};

/// Deep Q-learning intrusion detection on NSL-KDD style data.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: RunFlags,
}

/// Each flag overrides the matching key of the `--config` file.
#[derive(Args)]
struct RunFlags {
    /// `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    train_file: Option<PathBuf>,
    #[arg(long, global = true)]
    test_file: Option<PathBuf>,
    /// `attack_name,category` file replacing the bundled mapping
    #[arg(long, global = true)]
    taxonomy: Option<PathBuf>,
    /// Output directory [default: out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    episodes: Option<usize>,
    /// Iterations (windows) per episode
    #[arg(long, global = true)]
    iterations: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// Discount factor
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Initial exploration rate
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    epsilon_decay: Option<f64>,
    #[arg(long, global = true)]
    epsilon_floor: Option<f64>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// ordinal or one-hot
    #[arg(long, global = true)]
    encoding: Option<String>,
    /// Shuffle training rows with the run seed
    #[arg(long, global = true)]
    shuffle: bool,
    /// adam or sgd
    #[arg(long, global = true)]
    optimizer: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    reward_correct: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    reward_incorrect: Option<f64>,
    /// strict or lenient handling of unseen symbolic values
    #[arg(long, global = true)]
    unknown_category: Option<String>,
}

impl RunFlags {
    fn pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let show = |v: Option<f64>| v.map(|v| v.to_string());
        push("train_file", path(&self.train_file));
        push("test_file", path(&self.test_file));
        push("taxonomy", path(&self.taxonomy));
        push("out", path(&self.out));
        push("episodes", self.episodes.map(|v| v.to_string()));
        push("iterations", self.iterations.map(|v| v.to_string()));
        push("batch_size", self.batch_size.map(|v| v.to_string()));
        push("gamma", show(self.gamma));
        push("epsilon", show(self.epsilon));
        push("epsilon_decay", show(self.epsilon_decay));
        push("epsilon_floor", show(self.epsilon_floor));
        push("lr", show(self.lr));
        push("seed", self.seed.map(|v| v.to_string()));
        push("encoding", self.encoding.clone());
        push("shuffle", self.shuffle.then(|| "true".to_string()));
        push("optimizer", self.optimizer.clone());
        push("reward_correct", show(self.reward_correct));
        push("reward_incorrect", show(self.reward_incorrect));
        push("unknown_category", self.unknown_category.clone());
        out
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Encode the raw files into snapshots plus normalization stats
    Preprocess,
    /// Train a Q-network; writes the checkpoint and history CSVs
    Train,
    /// Score a checkpoint; writes metrics.json and confusion.csv
    Evaluate {
        /// Checkpoint to load [default: <out>/model.ckpt]
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Which encoded split to score
        #[arg(long, value_enum, default_value = "test")]
        on: SplitArg,
    },
    /// Train and evaluate every gamma x episode-count combination
    Sweep {
        /// Comma-separated discount factors
        #[arg(long, value_delimiter = ',', required = true)]
        gammas: Vec<f64>,
        /// Comma-separated episode counts
        #[arg(long, value_delimiter = ',', required = true)]
        episode_counts: Vec<usize>,
        /// Runs trained concurrently
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Render report.md from the output directory
    Report,
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = RunConfig::resolve(cli.flags.config.as_deref(), &cli.flags.pairs())?;
    match cli.command {
        Command::Preprocess => {
            let prepared = commands::preprocess(&cfg)?;
            print_tallies("train", &prepared.train);
            if let Some(test) = &prepared.test {
                print_tallies("test", test);
            }
        }
        Command::Train => {
            let outcome = commands::train(&cfg)?;
            println!(
                "trained {} episodes ({} iterations) in {:.1}s; checkpoint in {}",
                outcome.history.episodes.len(),
                outcome.history.iterations.len(),
                outcome.history.total_wall_clock_seconds(),
                cfg.out.display()
            );
        }
        Command::Evaluate { checkpoint, on } => {
            let split = match on {
                SplitArg::Train => Split::Train,
                SplitArg::Test => Split::Test,
            };
            let report = commands::evaluate(&cfg, checkpoint.as_deref(), split)?;
            print_metrics(&report);
        }
        Command::Sweep {
            gammas,
            episode_counts,
            jobs,
        } => {
            let rows = commands::sweep(&cfg, &gammas, &episode_counts, jobs)?;
            commands::write_sweep_summary(&rows, &mut std::io::stdout())?;
            let failed = rows.iter().filter(|r| !r.succeeded()).count();
            if failed > 0 {
                eprintln!(
                    "{failed} of {} sweep runs failed; see {}",
                    rows.len(),
                    cfg.out.join(SWEEP_SUMMARY).display()
                );
                return Ok(false);
            }
        }
        Command::Report => {
            let path = report::report(&cfg.out)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
