//! Dataset manifests: one JSON file describing every rendered image.
//! Paths inside are relative to the manifest's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use diffsar::geometry::{read_obj_file, TriangleMesh};
use diffsar::sarcam::AspectPose;
use diffsar::shade::{NoiseBranch, NoiseConfig, PedfConfig, SarImage};
use diffsar::{Error, Result};

use crate::config::ShaderChoice;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub index: usize,
    pub object: String,
    /// display-remapped 8-bit image
    pub png: PathBuf,
    /// linear magnitudes after noise, lossless
    pub sarf: PathBuf,
    pub azimuth: f64,
    pub elevation: f64,
    pub standoff: f64,
    pub sigma: f64,
    pub branch: NoiseBranch,
    pub seed: u64,
    /// remap threshold T used for the PNG
    pub threshold: f64,
}

impl ManifestRecord {
    pub fn pose(&self) -> Result<AspectPose> {
        AspectPose::new(self.azimuth, self.elevation, self.standoff)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub object: String,
    /// copy of the source mesh
    pub mesh: PathBuf,
    pub height: usize,
    pub width: usize,
    pub spacing: f64,
    pub shader: ShaderChoice,
    pub noise: NoiseConfig,
    pub pedf: PedfConfig,
    pub seed: u64,
    pub records: Vec<ManifestRecord>,
}

/// A manifest together with the directory its paths resolve against.
#[derive(Clone, Debug)]
pub struct LoadedManifest {
    pub manifest: DatasetManifest,
    pub base: PathBuf,
}

fn missing(what: String) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, what))
}

impl DatasetManifest {
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

impl LoadedManifest {
    /// Reads a manifest file (or `manifest.json` inside a directory) and
    /// checks every referenced file and pose.
    pub fn load(path: &Path) -> Result<LoadedManifest> {
        let file = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = std::fs::read_to_string(&file).map_err(|e| {
            std::io::Error::new(e.kind(), format!("manifest {}: {e}", file.display()))
        })?;
        let manifest: DatasetManifest = serde_json::from_str(&text)?;
        let base = file.parent().map(Path::to_path_buf).unwrap_or_default();
        let loaded = LoadedManifest { manifest, base };
        loaded.check()?;
        Ok(loaded)
    }

    fn check(&self) -> Result<()> {
        let m = &self.manifest;
        if m.records.is_empty() {
            return Err(Error::Validation("manifest has no records".into()));
        }
        if !self.base.join(&m.mesh).is_file() {
            return Err(missing(format!(
                "manifest mesh {} is missing",
                m.mesh.display()
            )));
        }
        for (row, r) in m.records.iter().enumerate() {
            r.pose()
                .map_err(|e| Error::Validation(format!("manifest row {row}: {e}")))?;
            for p in [&r.png, &r.sarf] {
                if !self.base.join(p).is_file() {
                    return Err(missing(format!(
                        "manifest row {row} (index {}, azimuth {}, elevation {}): image {} is missing",
                        r.index,
                        r.azimuth,
                        r.elevation,
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<TriangleMesh> {
        read_obj_file(&self.base.join(&self.manifest.mesh))
    }

    /// Linear label image of one record.
    pub fn label(&self, record: &ManifestRecord) -> Result<SarImage> {
        let img = SarImage::read_sarf_file(&self.base.join(&record.sarf), self.manifest.spacing)?;
        if img.height != self.manifest.height || img.width != self.manifest.width {
            return Err(Error::Shape(format!(
                "manifest row {}: image is {}x{}, manifest says {}x{}",
                record.index, img.height, img.width, self.manifest.height, self.manifest.width
            )));
        }
        Ok(img)
    }
}
