use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use srw_core::cli::{cmd_doors, cmd_eval, cmd_filter, cmd_generate, cmd_stats, RunConfig};
use srw_core::config::Thresholds;
use srw_core::Error;

#[derive(Parser, Debug)]
#[command(name = "srw", version, about = "Labelled room wireframe annotation and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Input root directory.
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Output root directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Seed for door sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    /// Apply line NMS to predictions before scoring.
    #[arg(long, global = true)]
    nms: bool,

    /// Line NMS radius.
    #[arg(long, global = true, default_value_t = 3.0)]
    gamma: f64,

    /// Endpoint-to-junction matching radius in the 128x128 frame.
    #[arg(long, global = true, default_value_t = 10.0)]
    tau: f64,

    /// sAP thresholds, comma separated.
    #[arg(long, global = true, value_delimiter = ',', default_value = "5,10,15")]
    beta: Vec<f64>,

    /// jAP thresholds, comma separated.
    #[arg(long, global = true, value_delimiter = ',', default_value = "0.5,1,2")]
    theta: Vec<f64>,

    /// Closed-door ratio threshold.
    #[arg(long, global = true, default_value_t = 0.3)]
    door_ratio: f64,

    /// Samples per door polygon.
    #[arg(long, global = true, default_value_t = 100)]
    door_samples: usize,

    /// Maximum junction-to-plane distance in millimetres.
    #[arg(long, global = true, default_value_t = 1.0)]
    max_residual: f64,

    /// Skip ground-truth views that have no prediction.
    #[arg(long, global = true)]
    allow_missing: bool,

    /// Also write the label-free evaluation report.
    #[arg(long, global = true)]
    nonsemantic: bool,

    /// Ground-truth directory for eval (default: <input>/gt).
    #[arg(long, global = true)]
    gt: Option<PathBuf>,

    /// Prediction directory for eval (default: <input>/pred).
    #[arg(long, global = true)]
    pred: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Check plane planarity and topology of every scene.
    Filter,
    /// Classify doors as open or closed from semantic masks.
    Doors,
    /// Write ground-truth wireframes for every view.
    Generate,
    /// Score predicted wireframes against ground truth.
    Eval,
    /// Summarize scene contents.
    Stats,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    let (Some(input), Some(output)) = (cli.input.clone(), cli.output.clone()) else {
        eprintln!("error: --input and --output are required");
        return ExitCode::from(2);
    };
    let cfg = RunConfig {
        seed: cli.seed,
        workers: cli.workers,
        thresholds: Thresholds {
            max_plane_residual_mm: cli.max_residual,
            door_closed_ratio: cli.door_ratio,
            door_samples: cli.door_samples,
            tau: cli.tau,
            gamma: cli.gamma,
            betas: cli.beta.clone(),
            thetas: cli.theta.clone(),
        },
        nms: cli.nms,
        allow_missing: cli.allow_missing,
        nonsemantic: cli.nonsemantic,
        gt: cli.gt.clone(),
        pred: cli.pred.clone(),
        ..RunConfig::new(input, output)
    };

    let result = match cli.command {
        Command::Filter => cmd_filter(&cfg),
        Command::Doors => cmd_doors(&cfg),
        Command::Generate => cmd_generate(&cfg),
        Command::Eval => cmd_eval(&cfg),
        Command::Stats => cmd_stats(&cfg),
    };
    match result {
        Ok(summary) if summary.ok() => ExitCode::SUCCESS,
        Ok(summary) => {
            log::error!("{} of the items failed; see the errors log in the output directory", summary.errors);
            ExitCode::from(1)
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
