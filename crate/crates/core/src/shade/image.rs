use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PedfConfig;
use crate::error::{at_path, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ImageScale {
    /// linear magnitude, ≥ 0
    Linear,
    /// display remap in [0, 1], with the threshold that produced it
    Remapped { threshold: f64 },
}

/// Row-major H×W magnitude image; row 0 is far range.
#[derive(Clone, Debug, PartialEq)]
pub struct SarImage {
    pub height: usize,
    pub width: usize,
    /// meters per pixel
    pub spacing: f64,
    pub scale: ImageScale,
    data: Vec<f64>,
}

impl SarImage {
    pub fn linear(height: usize, width: usize, spacing: f64, data: Vec<f64>) -> Result<Self> {
        Self::check_dims(height, width, data.len())?;
        if let Some(bad) = data.iter().find(|&&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::Validation(format!(
                "linear magnitudes must be finite and >= 0, got {bad}"
            )));
        }
        Ok(Self {
            height,
            width,
            spacing,
            scale: ImageScale::Linear,
            data,
        })
    }

    pub fn remapped(
        height: usize,
        width: usize,
        spacing: f64,
        threshold: f64,
        data: Vec<f64>,
    ) -> Result<Self> {
        Self::check_dims(height, width, data.len())?;
        if let Some(bad) = data.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::Validation(format!(
                "remapped values must lie in [0, 1], got {bad}"
            )));
        }
        Ok(Self {
            height,
            width,
            spacing,
            scale: ImageScale::Remapped { threshold },
            data,
        })
    }

    fn check_dims(h: usize, w: usize, n: usize) -> Result<()> {
        if h * w != n || n == 0 {
            return Err(Error::Shape(format!(
                "{h}×{w} image needs {} values, got {n}",
                h * w
            )));
        }
        Ok(())
    }

    pub fn zeros(height: usize, width: usize, spacing: f64) -> Self {
        Self {
            height,
            width,
            spacing,
            scale: ImageScale::Linear,
            data: vec![0.0; height * width],
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_remapped(&self) -> bool {
        matches!(self.scale, ImageScale::Remapped { .. })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn mean_nonzero(&self) -> Option<f64> {
        let nz: Vec<f64> = self.data.iter().copied().filter(|&x| x > 0.0).collect();
        (!nz.is_empty()).then(|| nz.iter().sum::<f64>() / nz.len() as f64)
    }

    /// Remaps a linear image with its own threshold.
    pub fn remap(&self, cfg: &PedfConfig) -> Result<SarImage> {
        self.remap_with(cfg, cfg.threshold(&self.data))
    }

    pub fn remap_with(&self, cfg: &PedfConfig, threshold: f64) -> Result<SarImage> {
        if self.is_remapped() {
            return Err(Error::Contract("image is already remapped".into()));
        }
        cfg.validate()?;
        let data = self
            .data
            .iter()
            .map(|&x| cfg.remap(x, threshold))
            .collect::<Result<_>>()?;
        SarImage::remapped(self.height, self.width, self.spacing, threshold, data)
    }

    pub fn unremap(&self, cfg: &PedfConfig) -> Result<SarImage> {
        let ImageScale::Remapped { threshold } = self.scale else {
            return Err(Error::Contract("image is not remapped".into()));
        };
        let data = self
            .data
            .iter()
            .map(|&y| cfg.inverse(y, threshold))
            .collect::<Result<_>>()?;
        SarImage::linear(self.height, self.width, self.spacing, data)
    }

    /// 8-bit grayscale PNG of a remapped image.
    pub fn write_png(&self, path: &Path) -> Result<()> {
        if !self.is_remapped() {
            return Err(Error::Contract("PNG output needs a remapped image".into()));
        }
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|&y| (y * 255.0).round() as u8)
            .collect();
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .ok_or_else(|| Error::Shape("PNG buffer size mismatch".into()))?;
        img.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    /// Reads an 8-bit PNG as a remapped image with the given threshold.
    pub fn read_png(path: &Path, spacing: f64, threshold: f64) -> Result<SarImage> {
        let img = image::open(path)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => at_path(path)(io),
                other => other.into(),
            })?
            .into_luma8();
        let (w, h) = img.dimensions();
        let data = img
            .into_raw()
            .into_iter()
            .map(|b| b as f64 / 255.0)
            .collect();
        SarImage::remapped(h as usize, w as usize, spacing, threshold, data)
    }

    /// `SARF H W\n` followed by H·W little-endian f64 values.
    pub fn write_sarf<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "SARF {} {}", self.height, self.width)?;
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    /// Reads a linear-magnitude SARF stream.
    pub fn read_sarf<R: Read>(mut input: R, spacing: f64) -> Result<SarImage> {
        let mut all = Vec::new();
        input.read_to_end(&mut all)?;
        let nl = all
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Parse {
                line: 1,
                msg: "missing SARF header".into(),
            })?;
        let header = String::from_utf8_lossy(&all[..nl]);
        let f: Vec<&str> = header.split_whitespace().collect();
        let bad = || Error::Parse {
            line: 1,
            msg: format!("bad SARF header {header:?}"),
        };
        if f.len() != 3 || f[0] != "SARF" {
            return Err(bad());
        }
        let h: usize = f[1].parse().map_err(|_| bad())?;
        let w: usize = f[2].parse().map_err(|_| bad())?;
        let body = &all[nl + 1..];
        if body.len() != h * w * 8 {
            return Err(Error::Shape(format!(
                "SARF body has {} bytes, expected {}",
                body.len(),
                h * w * 8
            )));
        }
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        SarImage::linear(h, w, spacing, data)
    }

    pub fn write_sarf_file(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(at_path(path))?);
        self.write_sarf(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn read_sarf_file(path: &Path, spacing: f64) -> Result<SarImage> {
        Self::read_sarf(
            std::io::BufReader::new(std::fs::File::open(path).map_err(at_path(path))?),
            spacing,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sarf_roundtrip_is_exact() {
        let img = SarImage::linear(2, 3, 0.075, vec![0.0, 1.5, 1e-300, 7.25, 0.1, 3.0]).unwrap();
        let mut buf = Vec::new();
        img.write_sarf(&mut buf).unwrap();
        assert!(buf.starts_with(b"SARF 2 3\n"));
        assert_eq!(buf.len(), 9 + 48);
        assert_eq!(SarImage::read_sarf(buf.as_slice(), 0.075).unwrap(), img);
    }

    #[test]
    fn png_roundtrip_quantizes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let img = SarImage::remapped(2, 2, 0.075, 1.0, vec![0.0, 0.5, 0.25, 1.0]).unwrap();
        img.write_png(&path).unwrap();
        let back = SarImage::read_png(&path, 0.075, 1.0).unwrap();
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0);
        }
    }

    #[test]
    fn validation() {
        assert!(SarImage::linear(2, 2, 0.1, vec![0.0, -1.0, 0.0, 0.0]).is_err());
        assert!(SarImage::remapped(1, 2, 0.1, 1.0, vec![0.0, 1.5]).is_err());
        assert!(SarImage::linear(2, 2, 0.1, vec![0.0; 3]).is_err());
        let lin = SarImage::zeros(2, 2, 0.1);
        assert!(lin.write_png(Path::new("/nonexistent.png")).is_err());
        let r = lin.remap(&PedfConfig::default()).unwrap();
        assert!(matches!(
            r.remap(&PedfConfig::default()),
            Err(Error::Contract(_))
        ));
    }
}
