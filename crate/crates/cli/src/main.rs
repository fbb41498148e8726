use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dcmmd::cli_io::commands::{self, PERF_LENGTHS};
use dcmmd::cli_io::{exit_code, DetectorSpec, ExperimentConfig, Suite, ThresholdSetting};
use dcmmd::{Error, Result};

/// Latent-dynamics-aware change detection on prediction-error streams.
#[derive(Parser)]
#[command(name = "dcmmd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Scenario preset, used when no config is given.
    #[arg(long)]
    preset: Option<String>,
    /// Detector kind to run; repeatable. Overrides the config's list.
    #[arg(long = "detector")]
    detectors: Vec<String>,
    /// Threshold, or `calibrate:<target MTFA>`.
    #[arg(long)]
    b: Option<ThresholdSetting>,
    /// Block length.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::for_preset(name),
            (None, None) => return Err(Error::InvalidInput("pass --config or --preset".into())),
        };
        if !self.detectors.is_empty() {
            c.detectors = self.detectors.iter().map(|d| DetectorSpec::from_name(d)).collect::<Result<_>>()?;
        }
        if let Some(b) = self.b {
            c.b = b;
        }
        if let Some(m) = self.m {
            c.m = m;
        }
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(runs) = self.runs {
            c.n_runs = runs;
        }
        if let Some(out) = &self.out {
            c.out.clone_from(out);
        }
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a simulated error stream.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Number of samples.
        #[arg(long, default_value_t = 10_000)]
        length: u64,
        /// Include the latent mode column.
        #[arg(long)]
        modes: bool,
        /// Switch to the post-change model at this step.
        #[arg(long)]
        changepoint: Option<u64>,
    },
    /// Fit the two-state model to an error log.
    Fit {
        input: PathBuf,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Accepted for uniformity; fitting is deterministic.
        #[arg(long)]
        seed: Option<u64>,
        /// Accepted for uniformity; fitting runs no simulation.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Stream an error log through the configured detectors.
    Detect {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Calibrate thresholds and report WADD, MTFA and AUROC.
    Calibrate {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep the delay/false-alarm trade-off.
    Frontier {
        #[command(flatten)]
        common: Common,
        /// MTFA targets, comma separated.
        #[arg(long, value_delimiter = ',')]
        targets: Vec<f64>,
    },
    /// Run an experiment suite: unknown_post, heavy_tail or bound.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "unknown_post")]
        suite: Suite,
    },
    /// Regress per-step latency on stream length.
    Perf {
        #[command(flatten)]
        common: Common,
        /// Stream lengths, comma separated.
        #[arg(long, value_delimiter = ',')]
        lengths: Vec<u64>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
}

fn run(cmd: Command) -> Result<Vec<PathBuf>> {
    match cmd {
        Command::Simulate { common, length, modes, changepoint } => {
            commands::simulate(&common.config()?.resolve()?, length, modes, changepoint)
        }
        Command::Fit { input, out, max_iters, tol, .. } => commands::fit(&input, &out, max_iters, tol),
        Command::Detect { input, common } => commands::detect(&common.config()?.resolve()?, &input),
        Command::Calibrate { common } => commands::calibrate(&common.config()?.resolve()?),
        Command::Frontier { common, targets } => {
            let mut c = common.config()?;
            if !targets.is_empty() {
                c.mtfa_targets = Some(targets);
            }
            commands::frontier(&c.resolve()?)
        }
        Command::Bench { common, suite } => commands::bench(&common.config()?.resolve()?, suite),
        Command::Perf { common, lengths, reps } => {
            let lengths = if lengths.is_empty() { PERF_LENGTHS.to_vec() } else { lengths };
            commands::perf(&common.config()?.resolve()?, &lengths, reps)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
