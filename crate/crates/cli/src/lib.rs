//! Command-line front end: argument parsing, configuration and the
//! dataset → reconstruction → evaluation commands.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use diffsar::sarcam::AspectPose;
use diffsar::{Error, ErrorClass, Result};

use crate::commands::TrainOptions;
use crate::config::{Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "diffsar",
    version,
    about = "Differentiable SAR rendering and mesh reconstruction"
)]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render an aspect-angle dataset of one mesh
    DatasetGen {
        #[arg(long)]
        mesh: PathBuf,
        /// object id recorded in the manifest (default: file stem)
        #[arg(long)]
        object: Option<String>,
    },
    /// Fit a mesh to a dataset
    Reconstruct {
        /// manifest file or dataset directory
        #[arg(long)]
        manifest: PathBuf,
        /// ground-truth mesh for the metric report
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Compare two meshes, optionally with L2* between two images
    Eval {
        pred: PathBuf,
        truth: PathBuf,
        #[arg(long, requires = "pred_image")]
        label_image: Option<PathBuf>,
        #[arg(long, requires = "label_image")]
        pred_image: Option<PathBuf>,
    },
    /// Render one image of a mesh
    Render {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        azimuth: f64,
        #[arg(long)]
        elevation: f64,
        #[arg(long, default_value = "render")]
        name: String,
    },
    /// Finite-difference check of every differentiable primitive
    Gradcheck {
        /// run every registered case
        #[arg(long, conflicts_with = "filter")]
        all: bool,
        /// run cases whose name contains this string
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = 5)]
        configs: usize,
    },
    /// Train the learned shader on a dataset
    TrainShader {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = TrainOptions::default().epochs)]
        epochs: usize,
        #[arg(long, default_value_t = TrainOptions::default().hidden)]
        hidden: usize,
        /// every k-th pose is held out for validation
        #[arg(long, default_value_t = TrainOptions::default().holdout)]
        holdout: usize,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Validation => 2,
        ErrorClass::Numeric => 3,
        ErrorClass::Io => 4,
    }
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

/// Runs a parsed command line. `env_config` is the value of
/// `DIFFSAR_CONFIG`, passed in so callers control the environment.
/// Returns the text to print on success.
pub fn run(cli: &Cli, env_config: Option<&Path>) -> Result<String> {
    let cfg = RunConfig::resolve(cli.overrides.config.as_deref(), env_config, &cli.overrides)?;
    match &cli.command {
        Command::DatasetGen { mesh, object } => {
            let (path, m) = commands::dataset_gen(&cfg, mesh, object.as_deref())?;
            Ok(format!(
                "wrote {} images and {}",
                m.records.len(),
                path.display()
            ))
        }
        Command::Reconstruct { manifest, truth } => json(&commands::reconstruct_cmd(
            &cfg,
            manifest,
            truth.as_deref(),
        )?),
        Command::Eval {
            pred,
            truth,
            label_image,
            pred_image,
        } => {
            let images = label_image.as_deref().zip(pred_image.as_deref());
            commands::eval(pred, truth, &cfg.voxel, images, cfg.spacing)?.to_json()
        }
        Command::Render {
            mesh,
            azimuth,
            elevation,
            name,
        } => {
            let pose = AspectPose::with_default_standoff(*azimuth, *elevation)?;
            json(&commands::render(&cfg, mesh, &pose, name)?)
        }
        Command::Gradcheck {
            all,
            filter,
            configs,
        } => {
            let filter = if *all { None } else { filter.as_deref() };
            let (report, text) = commands::gradcheck(filter, *configs, cfg.seed)?;
            if let Err(e) = commands::gradcheck_verdict(&report, filter.is_none()) {
                eprint!("{text}");
                return Err(e);
            }
            Ok(text.trim_end().to_string())
        }
        Command::TrainShader {
            manifest,
            epochs,
            hidden,
            holdout,
        } => {
            let opts = TrainOptions {
                epochs: *epochs,
                hidden: *hidden,
                holdout: *holdout,
            };
            json(&commands::train_shader_cmd(&cfg, manifest, &opts)?)
        }
    }
}
