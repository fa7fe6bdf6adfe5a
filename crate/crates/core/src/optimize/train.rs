use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{linear_lr, AdamW};
use crate::autodiff::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::shade::{learned_shader_raw, LearnedShader, FEATURE_CHANNELS};

/// One training pair: stacked features (3×H×W) and the linear magnitude
/// label (H·W).
#[derive(Clone, Debug, PartialEq)]
pub struct ShaderSample {
    pub features: Tensor,
    pub label: Tensor,
}

impl ShaderSample {
    pub fn new(features: Tensor, label: Tensor) -> Result<Self> {
        let s = features.shape();
        if s.len() != 3 || s[0] != FEATURE_CHANNELS || s[1] * s[2] != label.len() {
            return Err(Error::Shape(format!(
                "features {:?} do not match a label of {} pixels",
                s,
                label.len()
            )));
        }
        Ok(Self { features, label })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShaderTrainConfig {
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub weight_decay: f64,
    /// epochs without validation improvement before stopping
    pub patience: usize,
    pub seed: u64,
}

impl Default for ShaderTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr_start: 2e-4,
            lr_end: 2e-5,
            weight_decay: 0.01,
            patience: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ShaderTrainReport {
    /// weights with the best validation L1
    pub shader: LearnedShader,
    pub train_l1: Vec<f64>,
    pub val_l1: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl ShaderTrainReport {
    pub fn best_val_l1(&self) -> f64 {
        self.val_l1[self.best_epoch]
    }
}

/// Mean absolute error of the clamped shader output over a set.
pub fn shader_l1(shader: &LearnedShader, samples: &[ShaderSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Contract("L1 over an empty set".into()));
    }
    let mut acc = 0.0;
    for s in samples {
        let g = Graph::new();
        let out = learned_shader_raw(g.constant(s.features.clone()), &shader.constants(&g))?.relu();
        acc += out
            .value()
            .data()
            .iter()
            .zip(s.label.data())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / s.label.len() as f64;
    }
    Ok(acc / samples.len() as f64)
}

/// Fits the learned shader to paired data with an L1 loss, one AdamW step
/// per sample in a seeded shuffled order. The loss is taken on the output
/// before the final clamp, which keeps gradients alive where the net
/// undershoots zero. Stops after `patience` epochs without validation
/// improvement; validation falls back to the training set when empty.
pub fn train_shader(
    train: &[ShaderSample],
    val: &[ShaderSample],
    init: LearnedShader,
    cfg: &ShaderTrainConfig,
) -> Result<ShaderTrainReport> {
    if train.is_empty() {
        return Err(Error::Contract(
            "shader training needs at least one sample".into(),
        ));
    }
    if cfg.epochs == 0 {
        return Err(Error::Validation("epochs must be positive".into()));
    }
    let val = if val.is_empty() { train } else { val };
    let mut params: Vec<Tensor> = init
        .layers
        .iter()
        .flat_map(|l| [l.weight.clone(), l.bias.clone()])
        .collect();
    let mut flat: Vec<f64> = params.iter().flat_map(|t| t.data().to_vec()).collect();
    let mut opt = AdamW::new(0.9, 0.999, 1e-8, cfg.weight_decay)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut best = (f64::INFINITY, 0usize, init.clone());
    let (mut train_l1, mut val_l1) = (Vec::new(), Vec::new());
    let mut stopped_early = false;
    for epoch in 0..cfg.epochs {
        let lr = linear_lr(cfg.lr_start, cfg.lr_end, epoch, cfg.epochs);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &i in &order {
            let s = &train[i];
            let g = Graph::new();
            let vars: Vec<_> = params.iter().map(|t| g.param(t.clone())).collect();
            let raw = learned_shader_raw(g.constant(s.features.clone()), &vars)?;
            let label = g.constant(s.label.clone().reshaped(raw.shape())?);
            let loss = raw.sub(label)?.abs().mean();
            if !loss.item().is_finite() {
                return Err(Error::Numeric(format!(
                    "shader loss is not finite at epoch {epoch}"
                )));
            }
            epoch_loss += loss.item();
            let grads = loss.backward()?;
            let gflat: Vec<f64> = vars
                .iter()
                .flat_map(|v| grads.get_or_zeros(*v).into_data())
                .collect();
            opt.step(lr, &mut flat, &gflat)?;
            let mut k = 0;
            for t in params.iter_mut() {
                let n = t.len();
                t.data_mut().copy_from_slice(&flat[k..k + n]);
                k += n;
            }
        }
        train_l1.push(epoch_loss / train.len() as f64);
        let shader = LearnedShader::from_tensors(&params)?;
        let v = shader_l1(&shader, val)?;
        val_l1.push(v);
        log::debug!(
            "shader epoch {epoch}: train {:.5} val {v:.5}",
            train_l1[epoch]
        );
        if v < best.0 {
            best = (v, epoch, shader);
        } else if epoch - best.1 >= cfg.patience {
            stopped_early = true;
            break;
        }
    }
    Ok(ShaderTrainReport {
        shader: best.2,
        train_l1,
        val_l1,
        best_epoch: best.1,
        stopped_early,
    })
}
