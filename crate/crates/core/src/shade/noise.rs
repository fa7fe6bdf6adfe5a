use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::SarImage;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// complex-normal std as a fraction of the mean nonzero magnitude
    pub sigma_z: f64,
    /// multiplicative half-width
    pub u: f64,
    pub p_add: f64,
    pub p_mul: f64,
    pub p_none: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_z: 0.05,
            u: 0.3,
            p_add: 0.25,
            p_mul: 0.25,
            p_none: 0.5,
        }
    }
}

impl NoiseConfig {
    pub fn off() -> Self {
        Self {
            sigma_z: 0.0,
            u: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.p_add, self.p_mul, self.p_none];
        if probs.iter().any(|&p| !(p >= 0.0)) || ((probs.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "branch probabilities {probs:?} must sum to 1"
            )));
        }
        if !(self.sigma_z >= 0.0) || !(0.0..1.0).contains(&self.u) {
            return Err(Error::Validation(format!(
                "need sigma_z >= 0 and 0 <= u < 1, got {} and {}",
                self.sigma_z, self.u
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseBranch {
    Additive,
    Multiplicative,
    None,
}

/// Per-image generator: `seed` picks the run, `stream` the image.
pub fn image_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn select_branch<R: Rng>(rng: &mut R, cfg: &NoiseConfig) -> NoiseBranch {
    let x: f64 = rng.random();
    if x < cfg.p_add {
        NoiseBranch::Additive
    } else if x < cfg.p_add + cfg.p_mul {
        NoiseBranch::Multiplicative
    } else {
        NoiseBranch::None
    }
}

/// Applies exactly one noise branch to a linear image.
///
/// Additive: |S + Z| with Z complex normal, E|Z|² = σ², σ = sigma_z times the
/// mean nonzero magnitude (1 for an all-zero image). Multiplicative:
/// S·(1 + Y) with Y uniform on [−u, u].
pub fn augment(
    image: &SarImage,
    cfg: &NoiseConfig,
    seed: u64,
    stream: u64,
) -> Result<(SarImage, NoiseBranch)> {
    if image.is_remapped() {
        return Err(Error::Contract(
            "noise must be applied before the display remap".into(),
        ));
    }
    cfg.validate()?;
    let mut rng = image_rng(seed, stream);
    let branch = select_branch(&mut rng, cfg);
    let data: Vec<f64> = match branch {
        NoiseBranch::None => image.data().to_vec(),
        NoiseBranch::Additive => {
            let sigma = cfg.sigma_z * image.mean_nonzero().unwrap_or(1.0);
            if sigma == 0.0 {
                image.data().to_vec()
            } else {
                let n = Normal::new(0.0, sigma / std::f64::consts::SQRT_2).expect("finite std");
                image
                    .data()
                    .iter()
                    .map(|&s| {
                        let re = s + n.sample(&mut rng);
                        let im = n.sample(&mut rng);
                        re.hypot(im)
                    })
                    .collect()
            }
        }
        NoiseBranch::Multiplicative => {
            if cfg.u == 0.0 {
                image.data().to_vec()
            } else {
                let y = Uniform::new_inclusive(-cfg.u, cfg.u).expect("valid range");
                image
                    .data()
                    .iter()
                    .map(|&s| s * (1.0 + y.sample(&mut rng)))
                    .collect()
            }
        }
    };
    Ok((
        SarImage::linear(image.height, image.width, image.spacing, data)?,
        branch,
    ))
}
