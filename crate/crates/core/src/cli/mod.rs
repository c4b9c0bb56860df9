//! The `pointpose` command line: convert, segment, synth, train, eval,
//! predict, export.
//!
//! Exit codes: 0 success, 1 runtime or pipeline failure, 2 usage or config
//! error. `PP_THREADS` caps the worker pool.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{ConfigError, RunConfig};

use crate::error::Error;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.0)
    }
}

#[derive(Debug, Parser)]
#[command(name = "pointpose", version, about = "3D human pose estimation from depth-image point clouds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Config file plus `--set key=value` overrides.
#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert NumPy depth/joint arrays into a PGM + CSV manifest dataset.
    Convert {
        /// Depth array, shape [frames, height, width] or [height, width].
        #[arg(long)]
        depth: PathBuf,
        /// Joint array, shape [frames, joints, 3], camera coordinates.
        #[arg(long)]
        joints: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Multiplier taking depth values to millimeters.
        #[arg(long, default_value_t = 1000.0)]
        depth_scale: f64,
        /// Multiplier taking joint values to meters.
        #[arg(long, default_value_t = 1.0)]
        joint_scale: f64,
        /// Negate joint y (for y-up sources).
        #[arg(long)]
        flip_y: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Segment one depth frame and write the normalized body cloud as PLY.
    Segment {
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Render a synthetic dataset (PGM frames, joint CSVs, manifest, config).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run one training stage and write a checkpoint and a log.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        stage: u8,
        /// Starting checkpoint; required for stage 2.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Log file (default: the checkpoint path with a `.log` extension).
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Evaluate a checkpoint on a manifest: mAP report and CSV.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        /// CSV output (default: the checkpoint path with a `.eval.csv` extension).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Predict camera-space joints for one depth frame.
    Predict {
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        /// Joint CSV, or a PLY path (the CSV then goes next to it).
        #[arg(long)]
        out: PathBuf,
        /// Also write the body cloud with the predicted skeleton.
        #[arg(long)]
        ply: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write per-frame body clouds with skeletons (and predictions) for a manifest.
    Export {
        #[arg(long)]
        manifest: PathBuf,
        /// Overlay predictions from this checkpoint instead of ground truth.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

impl ConfigArgs {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        for o in &self.overrides {
            cfg.set(o)?;
        }
        Ok(cfg)
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("PP_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("PP_THREADS must be a positive integer, got `{value}`")))?;
    // A second call in the same process (tests) finds the pool already built.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Convert {
            depth,
            joints,
            out,
            depth_scale,
            joint_scale,
            flip_y,
            cfg,
        } => commands::convert(&depth, &joints, &out, depth_scale, joint_scale, flip_y, cfg.load()?),
        Command::Segment { depth, out, cfg } => commands::segment(&depth, &out, cfg.load()?),
        Command::Synth { out, frames, seed, cfg } => commands::synth(&out, frames, seed, cfg.load()?),
        Command::Train {
            manifest,
            stage,
            init,
            out,
            log,
            cfg,
        } => commands::train(&manifest, stage, init.as_deref(), &out, log, cfg.load()?),
        Command::Eval { manifest, ckpt, out, cfg } => commands::eval(&manifest, &ckpt, out, cfg.load()?),
        Command::Predict {
            depth,
            ckpt,
            out,
            ply,
            cfg,
        } => commands::predict(&depth, &ckpt, &out, ply.as_deref(), cfg.load()?).map(|_| ()),
        Command::Export { manifest, ckpt, out, cfg } => commands::export(&manifest, ckpt.as_deref(), &out, cfg.load()?),
    }
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub use commands::{predict_frame, PredictOutput};
