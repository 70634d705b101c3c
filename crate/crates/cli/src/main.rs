mod commands;
mod config;
mod dataset;
mod output;
mod plot;
mod stats;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand, ValueEnum};
use commands::{Ctx, EvalArgs};
use config::{PriorSource, RunConfig};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "hoi", version, about = "Synthetic hand-object reconstruction pipeline")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Run directory (dataset/, priors/, model/, eval/, occlusion/ live under it).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorArg {
    Sphere,
    Library,
    #[value(name = "self")]
    SelfPrior,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset.
    SynthGen,
    /// Build priors; align them to training objects and store transforms and correspondences.
    Register {
        #[arg(long, value_enum)]
        prior: Option<PriorArg>,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Train the refiner and write parameters plus the per-epoch loss trace.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        priors: Option<PathBuf>,
    },
    /// Score refined objects and IK hands against ground truth.
    Eval {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        priors: Option<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Remove each cloud's centroid before scoring.
        #[arg(long)]
        centered: bool,
        /// Object F-score thresholds in mm, comma separated.
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
        /// Hand F-score thresholds in mm, comma separated.
        #[arg(long, value_delimiter = ',')]
        hand_thresholds: Option<Vec<f64>>,
        /// Score the placed priors without refinement.
        #[arg(long)]
        prior_only: bool,
        /// Use ground truth as the prediction (sanity check of the scoring path).
        #[arg(long)]
        inject_gt: bool,
        /// Evaluate training samples too.
        #[arg(long)]
        all_splits: bool,
    },
    /// Median object chamfer per occlusion decile, as a table and an SVG plot.
    OcclusionReport {
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(anyhow!("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let ctx = Ctx {
        out: cfg.out.clone(),
        cfg,
    };
    match cli.command {
        Command::SynthGen => commands::synth_gen(&ctx),
        Command::Register { prior, dataset } => {
            let source = prior.map(|p| match p {
                PriorArg::Sphere => PriorSource::Sphere,
                PriorArg::Library => PriorSource::Library,
                PriorArg::SelfPrior => PriorSource::SelfPrior,
            });
            commands::register(&ctx, source, dataset.as_deref())
        }
        Command::Train { dataset, priors } => commands::train(&ctx, dataset.as_deref(), priors.as_deref()),
        Command::Eval {
            dataset,
            priors,
            params,
            centered,
            thresholds,
            hand_thresholds,
            prior_only,
            inject_gt,
            all_splits,
        } => commands::eval(
            &ctx,
            &EvalArgs {
                dataset,
                priors,
                params,
                centered,
                thresholds,
                hand_thresholds,
                prior_only,
                inject_gt,
                all_splits,
            },
        ),
        Command::OcclusionReport { report } => commands::occlusion_report(&ctx, report.as_deref()),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
