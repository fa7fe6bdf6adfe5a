//! Piecewise linear/logarithmic display remap.
//!
//! Below the threshold T the map is linear, reaching `knee` at T. Above it,
//! the remaining range [knee, 1] spans `dynamic_range_db` decibels of
//! magnitude; anything brighter clips to 1.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PedfConfig {
    /// T = factor · mean nonzero magnitude
    pub threshold_factor: f64,
    pub dynamic_range_db: f64,
    /// output value at T
    pub knee: f64,
}

impl Default for PedfConfig {
    fn default() -> Self {
        Self {
            threshold_factor: 3.0,
            dynamic_range_db: 30.0,
            knee: 0.25,
        }
    }
}

impl PedfConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.threshold_factor > 0.0
            && self.dynamic_range_db > 0.0
            && self.knee > 0.0
            && self.knee < 1.0;
        if !ok {
            return Err(Error::Validation(format!("invalid remap config {self:?}")));
        }
        Ok(())
    }

    /// Threshold from an image: factor × mean of its nonzero magnitudes, or
    /// the factor itself when every pixel is zero.
    pub fn threshold(&self, magnitudes: &[f64]) -> f64 {
        let (sum, n) = magnitudes
            .iter()
            .filter(|&&x| x > 0.0)
            .fold((0.0, 0usize), |(s, n), &x| (s + x, n + 1));
        if n == 0 {
            self.threshold_factor
        } else {
            self.threshold_factor * sum / n as f64
        }
    }

    /// Largest magnitude that is not clipped.
    pub fn clip_level(&self, threshold: f64) -> f64 {
        threshold * 10f64.powf(self.dynamic_range_db / 20.0)
    }

    pub fn remap(&self, x: f64, threshold: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Contract(format!(
                "remap needs nonnegative magnitude, got {x}"
            )));
        }
        Ok(self.forward(x, threshold).0)
    }

    /// Value and slope.
    fn forward(&self, x: f64, t: f64) -> (f64, f64) {
        if x <= t {
            (self.knee * x / t, self.knee / t)
        } else {
            let span = (1.0 - self.knee) / self.dynamic_range_db;
            let y = self.knee + span * 20.0 * (x / t).log10();
            if y >= 1.0 {
                (1.0, 0.0)
            } else {
                (y, span * 20.0 / (x * std::f64::consts::LN_10))
            }
        }
    }

    /// Inverse on [0, 1]; 1 maps to the clip level.
    pub fn inverse(&self, y: f64, threshold: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::Contract(format!(
                "remapped value {y} outside [0, 1]"
            )));
        }
        Ok(if y <= self.knee {
            y * threshold / self.knee
        } else {
            let db = (y - self.knee) * self.dynamic_range_db / (1.0 - self.knee);
            threshold * 10f64.powf(db / 20.0)
        })
    }
}

/// Differentiable remap of a magnitude tensor with a fixed threshold.
pub fn pedf<'g>(x: Var<'g>, threshold: f64, cfg: &PedfConfig) -> Result<Var<'g>> {
    cfg.validate()?;
    if !(threshold > 0.0) {
        return Err(Error::Validation(format!(
            "remap threshold must be positive, got {threshold}"
        )));
    }
    let v = x.value();
    if let Some(bad) = v.data().iter().find(|&&a| !(a >= 0.0)) {
        return Err(Error::Contract(format!(
            "remap needs nonnegative magnitudes, got {bad}"
        )));
    }
    let (vals, slopes): (Vec<f64>, Vec<f64>) =
        v.data().iter().map(|&a| cfg.forward(a, threshold)).unzip();
    let out = Tensor::new(v.shape().to_vec(), vals)?;
    Ok(x.graph().record(
        "pedf",
        &[x],
        out,
        Box::new(move |g, _| vec![Some(g.iter().zip(&slopes).map(|(g, s)| g * s).collect())]),
    ))
}
