use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use graft::cli::{self, GenSpec};
use graft::config::RunConfig;
use graft::error::Error;

#[derive(Parser)]
#[command(name = "graft", version, about = "Cross-graph pre-training with a signal curriculum")]
struct Cli {
    /// Run configuration (JSON). Flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Parallel seed workers for experiments.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// error, warn, info, debug, or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-train on the configured source/target bundles.
    Pretrain,
    /// Fine-tune a pre-training checkpoint for node classification.
    Finetune {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Train only the classification head.
        #[arg(long)]
        freeze: bool,
    },
    /// Evaluate a fine-tuned classifier on a named split.
    Eval {
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Sweep the curriculum thresholds over a grid.
    Sweep {
        #[arg(long, value_delimiter = ',', required = true)]
        l1: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        l2: Vec<f64>,
    },
    /// Measure wall-time scaling against growing synthetic targets.
    Scale {
        #[arg(long, value_delimiter = ',', default_values_t = [500usize, 1000, 2000, 4000])]
        sizes: Vec<usize>,
        /// Expected average degree of the generated targets (p = density/n).
        #[arg(long, default_value_t = 10.0)]
        density: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [3usize])]
        levels: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
    },
    /// Generate synthetic graph bundles.
    Gen {
        #[command(subcommand)]
        kind: GenCommand,
    },
    /// Re-render plots and summaries from a results directory.
    Report {
        #[arg(long)]
        results: PathBuf,
    },
    /// Temporal snapshot mode over chronological bundles.
    Temporal {
        #[arg(long, value_delimiter = ',', required = true)]
        snapshots: Vec<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GenCommand {
    /// Erdos-Renyi graph with standard-normal features.
    Er {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 8)]
        dim: usize,
    },
    /// Stochastic-block-model source/target pair with shared centroids.
    Sbm {
        #[arg(long, value_delimiter = ',', required = true)]
        blocks_source: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        blocks_target: Vec<usize>,
        #[arg(long, default_value_t = 0.15)]
        p_in: f64,
        #[arg(long, default_value_t = 0.02)]
        p_out: f64,
        #[arg(long, default_value_t = 0.5)]
        noise: f64,
        #[arg(long, default_value_t = 8)]
        dim: usize,
    },
    /// Chronological SBM snapshots with drifting edges.
    Snapshots {
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        blocks: Vec<usize>,
        #[arg(long, default_value_t = 0.3)]
        p_in: f64,
        #[arg(long, default_value_t = 0.05)]
        p_out: f64,
        #[arg(long, default_value_t = 0.3)]
        noise: f64,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long, default_value_t = 0.3)]
        drift: f64,
    },
}

fn effective_config(args: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    // Precedence: flags beat the file, the file beats defaults.
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(jobs) = args.jobs {
        cfg.jobs = jobs;
    }
    Ok(cfg)
}

fn run(args: &Cli) -> Result<(), Error> {
    let cfg = effective_config(args)?;
    match &args.command {
        Command::Pretrain => cli::cmd_pretrain(&cfg),
        Command::Finetune { checkpoint, freeze } => cli::cmd_finetune(&cfg, checkpoint, *freeze),
        Command::Eval { classifier, split } => cli::cmd_eval(&cfg, classifier, split),
        Command::Sweep { l1, l2 } => cli::cmd_sweep(&cfg, l1, l2),
        Command::Scale { sizes, density, levels, episodes } => {
            cli::cmd_scale(&cfg, sizes, *density, levels, *episodes)
        }
        Command::Gen { kind } => {
            let spec = match kind {
                GenCommand::Er { n, p, dim } => GenSpec::Er { n: *n, p: *p, dim: *dim },
                GenCommand::Sbm { blocks_source, blocks_target, p_in, p_out, noise, dim } => {
                    GenSpec::Sbm {
                        blocks_source: blocks_source.clone(),
                        blocks_target: blocks_target.clone(),
                        p_in: *p_in,
                        p_out: *p_out,
                        noise: *noise,
                        dim: *dim,
                    }
                }
                GenCommand::Snapshots { count, blocks, p_in, p_out, noise, dim, drift } => {
                    GenSpec::Snapshots {
                        count: *count,
                        blocks: blocks.clone(),
                        p_in: *p_in,
                        p_out: *p_out,
                        noise: *noise,
                        dim: *dim,
                        drift: *drift,
                    }
                }
            };
            cli::cmd_gen(&spec, cfg.train.seed, &cfg.out)
        }
        Command::Report { results } => cli::cmd_report(results, &cfg.out),
        Command::Temporal { snapshots } => cli::cmd_temporal(&cfg, snapshots),
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    env_logger::Builder::new().parse_filters(&args.log_level).init();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let class = match &e {
                Error::Config(_) => "config",
                Error::Format(_) | Error::Integrity(_) => "data",
                Error::Numerical(_) => "numerical",
                _ => "other",
            };
            let violations: Vec<String> = match &e {
                Error::Config(msg) => msg.split("; ").map(|s| s.to_string()).collect(),
                _ => vec![e.to_string()],
            };
            let json = serde_json::json!({
                "error": class,
                "message": e.to_string(),
                "violations": violations,
                "exit_code": e.exit_code(),
            });
            eprintln!("{json}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
