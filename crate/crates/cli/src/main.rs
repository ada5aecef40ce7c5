use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dwcl::trainer::RunMode;
use dwcl::weights::{Mechanism, WeightMode};
use dwcl_cli::{cmd_ablate, cmd_bench, cmd_eval, cmd_synth, cmd_train, BenchConfig, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "dwcl", version, about = "Dual-weighted contrastive multi-view clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-view dataset from a JSON spec.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Pretrain, fine-tune and cluster one configuration.
    Train(RunArgs),
    /// Run every mechanism × weight-mode arm and aggregate over seeds.
    Ablate(RunArgs),
    /// Time the contrastive objective for both mechanisms as V grows.
    Bench {
        /// Optional JSON bench config; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "runs/bench")]
        out: PathBuf,
        /// Comma-separated view counts.
        #[arg(long, value_delimiter = ',')]
        views: Option<Vec<usize>>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute the final clustering and metrics from a checkpoint.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_mechanism)]
    mechanism: Option<Mechanism>,
    #[arg(long, value_parser = parse_weights)]
    weights: Option<WeightMode>,
    /// `dwcl` or `bsv`.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<RunMode>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        RunConfig::load(
            &self.config,
            &Overrides {
                seed: self.seed,
                out: self.out.clone(),
                mechanism: self.mechanism,
                weights: self.weights,
                mode: self.mode,
                repeats: self.repeats,
                jobs: self.jobs,
            },
        )
    }
}

fn parse_mechanism(s: &str) -> Result<Mechanism, String> {
    s.parse().map_err(|e: dwcl::Error| e.to_string())
}

fn parse_weights(s: &str) -> Result<WeightMode, String> {
    s.parse().map_err(|e: dwcl::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<RunMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "dwcl" => Ok(RunMode::Dwcl),
        "bsv" => Ok(RunMode::Bsv),
        _ => Err(format!("unknown mode {s:?} (expected dwcl or bsv)")),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { config, out, seed } => {
            let ds = cmd_synth(&config, &out, seed)?;
            println!("wrote {} ({} samples, {} views) to {}", ds.name, ds.n(), ds.n_views(), out.display());
        }
        Command::Train(args) => {
            let cfg = args.load()?;
            for run in cmd_train(&cfg)? {
                let r = &run.report;
                println!(
                    "{} seed {}: ACC {} NMI {} -> {}",
                    r.mode.name(),
                    r.config.seed,
                    fmt_metric(r.acc),
                    fmt_metric(r.nmi),
                    run.dir.display()
                );
            }
        }
        Command::Ablate(args) => {
            let cfg = args.load()?;
            let summaries = cmd_ablate(&cfg)?;
            for s in &summaries {
                match &s.failure {
                    Some(e) => println!("{:<28} failed: {e}", s.arm.label()),
                    None => {
                        let (m, sd) = dwcl_cli::mean_std(&s.acc);
                        println!("{:<28} ACC {:.2}±{:.2}%", s.arm.label(), 100.0 * m, 100.0 * sd);
                    }
                }
            }
            println!("summary: {}", cfg.out.join("summary.csv").display());
            if summaries.iter().all(|s| s.failed()) {
                bail!("every ablation arm failed");
            }
        }
        Command::Bench { config, out, views, repeats, seed } => {
            let mut cfg = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str(&text).context("parsing bench config")?
                }
                None => BenchConfig::default(),
            };
            if let Some(v) = views {
                cfg.views = v;
            }
            if let Some(r) = repeats {
                cfg.repeats = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let res = cmd_bench(&cfg, &out)?;
            for r in &res.rows {
                println!("{:<10} V={:<3} pairs={:<4} {:.6}s", r.mechanism.name(), r.views, r.pairs, r.median);
            }
            println!(
                "growth exponent: bestother {:.2}, pairwise {:.2}",
                res.bestother_exponent, res.pairwise_exponent
            );
        }
        Command::Eval { run, checkpoint } => {
            let cfg = run.load()?;
            let res = cmd_eval(&cfg, checkpoint.as_deref())?;
            println!("ACC {} NMI {}", fmt_metric(res.scores.acc), fmt_metric(res.scores.nmi));
        }
    }
    Ok(())
}

fn fmt_metric(m: Option<f64>) -> String {
    m.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
