use std::path::PathBuf;
use std::process::ExitCode;

use aerosynth_cli::config::RunConfig;
use aerosynth_cli::pipeline::{run_stages, Stage};
use clap::{Parser, Subcommand};

/// Synthetic aerial photogrammetry point clouds with automatic labels.
#[derive(Parser, Debug)]
#[command(name = "aerosynth", version)]
struct Cli {
    /// JSON run config; the bundled 200 x 200 m demo when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, overriding the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// With `all`: run only the named stage (repeatable).
    #[arg(long = "stage", global = true, value_name = "NAME")]
    stages: Vec<String>,
    /// Accept parameters outside the surveyed ranges.
    #[arg(long, global = true)]
    unsafe_params: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Terrain, roads, buildings and placed objects as one labeled mesh.
    GenScene,
    /// Crosshatch survey over the terrain, with wind jitter.
    PlanFlight,
    /// Depth and label images for every camera.
    Render,
    /// Simulated photogrammetry cloud.
    Reconstruct,
    /// Label transfer from the proxy cloud and ground connectivity.
    Annotate,
    /// Downsampling, class mappings, tiles and histograms.
    Postprocess,
    /// Segmentation scores of a prediction against ground truth.
    Eval {
        /// Ground-truth cloud (.ply or .txt).
        #[arg(long, requires = "pred")]
        gt: Option<PathBuf>,
        /// Predicted cloud with the same points.
        #[arg(long, requires = "gt")]
        pred: Option<PathBuf>,
    },
    /// Every stage in order.
    All,
    /// Print the normalized config and exit.
    Config,
}

fn validation_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let mut cfg = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => return validation_error(e),
        },
        None => RunConfig::demo(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    let stages: Vec<Stage> = match &cli.command {
        Command::GenScene => vec![Stage::GenScene],
        Command::PlanFlight => vec![Stage::PlanFlight],
        Command::Render => vec![Stage::Render],
        Command::Reconstruct => vec![Stage::Reconstruct],
        Command::Annotate => vec![Stage::Annotate],
        Command::Postprocess => vec![Stage::Postprocess],
        Command::Eval { gt, pred } => {
            if gt.is_some() {
                cfg.eval.gt = gt.clone();
                cfg.eval.pred = pred.clone();
            }
            vec![Stage::Eval]
        }
        Command::All if cli.stages.is_empty() => Stage::ALL.to_vec(),
        Command::All => {
            let mut v = Vec::new();
            for name in &cli.stages {
                match Stage::from_name(name) {
                    Some(s) => v.push(s),
                    None => return validation_error(format!("unknown stage `{name}`")),
                }
            }
            v
        }
        Command::Config => Vec::new(),
    };
    if let Err(e) = cfg.validate(cli.unsafe_params) {
        return validation_error(e);
    }
    if matches!(cli.command, Command::Config) {
        println!("{}", cfg.to_json());
        return ExitCode::SUCCESS;
    }
    if let Some(n) = cfg.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return validation_error(e);
        }
    }
    let out = cfg.output_dir.clone();
    match run_stages(&cfg, &out, &stages) {
        Ok(m) => {
            if let Some(a) = &m.audit {
                log::info!(
                    "{} points, {} fine classes, {:.3}% unlabeled, manifest at {}",
                    a.points,
                    a.fine_classes_present,
                    100.0 * a.unlabeled_fraction,
                    out.join("manifest.json").display()
                );
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: stage {} failed: {:#}", f.stage.name(), f.error);
            eprintln!("manifest so far: {}", out.join("manifest.json").display());
            ExitCode::from(2)
        }
    }
}
