//! Run configuration: defaults, JSON file, command-line overrides.
//!
//! Every field is optional in the file; missing fields take the default.
//! Resolution order per field is flag, then file, then default. The file is
//! the `--config` path if given, else the `DIFFSAR_CONFIG` variable.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use diffsar::metrics::VoxelOptions;
use diffsar::optimize::{ReconSchedule, RenderSetup};
use diffsar::sarcam::AspectPose;
use diffsar::shade::{LearnedShader, NoiseConfig, PedfConfig, Shader, ShaderParams};
use diffsar::{Error, Result};

pub const CONFIG_ENV: &str = "DIFFSAR_CONFIG";

/// Evenly spaced elevation and azimuth samples, both ends inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AspectGrid {
    pub elevations: usize,
    pub elevation_min: f64,
    pub elevation_max: f64,
    pub azimuths: usize,
    pub azimuth_min: f64,
    pub azimuth_max: f64,
}

impl Default for AspectGrid {
    fn default() -> Self {
        Self {
            elevations: 6,
            elevation_min: 10.0,
            elevation_max: 60.0,
            azimuths: 36,
            azimuth_min: 0.0,
            azimuth_max: 350.0,
        }
    }
}

fn spaced(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

impl AspectGrid {
    pub fn len(&self) -> usize {
        self.elevations * self.azimuths
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Poses ordered elevation-major: index e·azimuths + a.
    pub fn poses(&self) -> Result<Vec<AspectPose>> {
        if self.is_empty() {
            return Err(Error::Validation(
                "aspect grid counts must be positive".into(),
            ));
        }
        let mut out = Vec::with_capacity(self.len());
        for el in spaced(self.elevations, self.elevation_min, self.elevation_max) {
            for az in spaced(self.azimuths, self.azimuth_min, self.azimuth_max) {
                out.push(AspectPose::with_default_standoff(az, el)?);
            }
        }
        Ok(out)
    }
}

/// `k` indices spread evenly over `0..n`.
pub fn subset_indices(n: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(Error::Validation(format!(
            "--views must be in 1..={n}, got {k}"
        )));
    }
    Ok((0..k).map(|i| i * n / k).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ShaderChoice {
    Analytic {
        #[serde(default)]
        params: ShaderParams,
    },
    Learned {
        weights: PathBuf,
    },
}

impl Default for ShaderChoice {
    fn default() -> Self {
        ShaderChoice::Analytic {
            params: ShaderParams::default(),
        }
    }
}

impl ShaderChoice {
    /// Relative weight paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<Shader> {
        match self {
            ShaderChoice::Analytic { params } => {
                params.validate()?;
                Ok(Shader::Analytic(*params))
            }
            ShaderChoice::Learned { weights } => Ok(Shader::Learned(Box::new(
                LearnedShader::load(&base.join(weights))?,
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub height: usize,
    pub width: usize,
    /// meters per pixel in range and cross-range
    pub spacing: f64,
    pub grid: AspectGrid,
    /// poses sampled evenly from the grid; all when absent
    pub views: Option<usize>,
    /// blend radii rendered per pose by dataset-gen
    pub sigmas: Vec<f64>,
    pub seed: u64,
    pub noise: NoiseConfig,
    pub pedf: PedfConfig,
    pub shader: ShaderChoice,
    pub schedule: ReconSchedule,
    /// mesh snapshot interval in iterations; 0 disables
    pub checkpoint_every: usize,
    pub voxel: VoxelOptions,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            height: 128,
            width: 128,
            spacing: 0.075,
            grid: AspectGrid::default(),
            views: None,
            sigmas: vec![RenderSetup::default().raster.sigma],
            seed: 0,
            noise: NoiseConfig::default(),
            pedf: PedfConfig::default(),
            shader: ShaderChoice::default(),
            schedule: ReconSchedule::default(),
            checkpoint_every: 270,
            voxel: VoxelOptions::default(),
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            std::io::Error::new(e.kind(), format!("config {}: {e}", path.display()))
        })?;
        let cfg: Self = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    /// Picks the file (explicit path over the environment value), then
    /// applies flag overrides and validates.
    pub fn resolve(
        explicit: Option<&Path>,
        env: Option<&Path>,
        overrides: &Overrides,
    ) -> Result<Self> {
        let mut cfg = match explicit.or(env) {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        overrides.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || !(self.spacing > 0.0 && self.spacing.is_finite())
        {
            return Err(Error::Validation(format!(
                "image needs positive size and spacing, got {}x{} at {}",
                self.height, self.width, self.spacing
            )));
        }
        if self.grid.is_empty() {
            return Err(Error::Validation(
                "aspect grid counts must be positive".into(),
            ));
        }
        if let Some(k) = self.views {
            subset_indices(self.grid.len(), k)?;
        }
        if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::Validation(format!(
                "sigmas must be a nonempty list of values >= 0, got {:?}",
                self.sigmas
            )));
        }
        self.noise.validate()?;
        self.pedf.validate()?;
        if self.schedule.levels.is_empty() {
            return Err(Error::Validation(
                "schedule needs at least one level".into(),
            ));
        }
        if self.voxel.resolution == 0 {
            return Err(Error::Validation(
                "voxel resolution must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Render geometry for this config at the given blend radius.
    pub fn render_setup(&self, sigma: f64) -> Result<RenderSetup> {
        let mut s = RenderSetup::new(self.height, self.width, self.spacing)?;
        s.raster.sigma = sigma;
        s.pedf = self.pedf;
        s.raster.validate()?;
        Ok(s)
    }

    /// Grid poses, thinned to `views` when set.
    pub fn poses(&self) -> Result<Vec<AspectPose>> {
        let all = self.grid.poses()?;
        match self.views {
            None => Ok(all),
            Some(k) => Ok(subset_indices(all.len(), k)?
                .into_iter()
                .map(|i| all[i])
                .collect()),
        }
    }
}

/// Flags shared by every command. Each one overrides its config field.
#[derive(Args, Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    /// JSON run config (overrides DIFFSAR_CONFIG)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub height: Option<usize>,
    #[arg(long, global = true)]
    pub width: Option<usize>,
    #[arg(long, global = true)]
    pub spacing: Option<f64>,
    /// sample k poses evenly from the aspect grid
    #[arg(long, global = true)]
    pub views: Option<usize>,
    #[arg(long, global = true)]
    pub elevations: Option<usize>,
    #[arg(long, global = true)]
    pub azimuths: Option<usize>,
    /// comma-separated blend radii rendered per pose
    #[arg(long, global = true, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
    /// turn noise augmentation off
    #[arg(long, global = true)]
    pub no_noise: bool,
    /// use a learned shader with these weights
    #[arg(long, global = true)]
    pub shader_weights: Option<PathBuf>,
    #[arg(long, global = true)]
    pub iterations_l1: Option<usize>,
    #[arg(long, global = true)]
    pub iterations_l2: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true)]
    pub checkpoint_every: Option<usize>,
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    /// translation window n of the starred metrics
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        fn set<T: Clone>(field: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *field = v.clone();
            }
        }
        set(&mut cfg.seed, &self.seed);
        set(&mut cfg.height, &self.height);
        set(&mut cfg.width, &self.width);
        set(&mut cfg.spacing, &self.spacing);
        if self.views.is_some() {
            cfg.views = self.views;
        }
        set(&mut cfg.grid.elevations, &self.elevations);
        set(&mut cfg.grid.azimuths, &self.azimuths);
        set(&mut cfg.sigmas, &self.sigmas);
        if self.no_noise {
            cfg.noise = NoiseConfig::off();
        }
        if let Some(w) = &self.shader_weights {
            cfg.shader = ShaderChoice::Learned { weights: w.clone() };
        }
        if let (Some(n), Some(level)) = (self.iterations_l1, cfg.schedule.levels.get_mut(0)) {
            level.iterations = n;
        }
        if let (Some(n), Some(level)) = (self.iterations_l2, cfg.schedule.levels.get_mut(1)) {
            level.iterations = n;
        }
        set(&mut cfg.schedule.lr, &self.lr);
        set(&mut cfg.checkpoint_every, &self.checkpoint_every);
        set(&mut cfg.voxel.resolution, &self.resolution);
        set(&mut cfg.voxel.window, &self.window);
        set(&mut cfg.out, &self.out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_is_216_poses_elevation_major() {
        let p = AspectGrid::default().poses().unwrap();
        assert_eq!(p.len(), 216);
        let (az, el) = (p[37].azimuth_deg, p[37].elevation_deg);
        assert!((az - 10.0).abs() < 1e-12 && (el - 20.0).abs() < 1e-12);
        assert!(
            (p[215].azimuth_deg - 350.0).abs() < 1e-12
                && (p[215].elevation_deg - 60.0).abs() < 1e-12
        );
    }

    #[test]
    fn one_by_one_grid_is_one_pose() {
        let g = AspectGrid {
            elevations: 1,
            azimuths: 1,
            ..Default::default()
        };
        assert_eq!(g.poses().unwrap().len(), 1);
    }

    #[test]
    fn subset_is_even_and_bounded() {
        assert_eq!(
            subset_indices(216, 36).unwrap(),
            (0..36).map(|i| 6 * i).collect::<Vec<_>>()
        );
        assert_eq!(subset_indices(10, 3).unwrap(), vec![0, 3, 6]);
        assert!(subset_indices(5, 0).is_err() && subset_indices(5, 6).is_err());
    }

    #[test]
    fn empty_file_is_the_default() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"heigth": 3}"#).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig {
            shader: ShaderChoice::Learned {
                weights: "w.json".into(),
            },
            views: Some(12),
            ..RunConfig::default()
        };
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
