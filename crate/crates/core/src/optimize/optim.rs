use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check(params: &[f64], grads: &[f64]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Shape(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite gradient at coordinate {i}"
        )));
    }
    Ok(())
}

/// SGD with momentum. The buffer starts as the first gradient and then
/// follows b ← μ·b + (1 − dampening)·g.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    pub dampening: f64,
    buffer: Option<Vec<f64>>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64, dampening: f64) -> Result<Self> {
        if !(lr > 0.0 && (0.0..1.0).contains(&momentum) && (0.0..=1.0).contains(&dampening)) {
            return Err(Error::Validation(format!(
                "need lr > 0, momentum in [0, 1), dampening in [0, 1]; got {lr}, {momentum}, {dampening}"
            )));
        }
        Ok(Self {
            lr,
            momentum,
            dampening,
            buffer: None,
        })
    }

    pub fn buffer(&self) -> Option<&[f64]> {
        self.buffer.as_deref()
    }

    /// Updates `params` in place. On error nothing changes.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check(params, grads)?;
        if self.momentum == 0.0 {
            params
                .iter_mut()
                .zip(grads)
                .for_each(|(p, g)| *p -= self.lr * g);
            return Ok(());
        }
        let b = match self.buffer.as_mut() {
            Some(b) if b.len() == grads.len() => {
                for (b, g) in b.iter_mut().zip(grads) {
                    *b = self.momentum * *b + (1.0 - self.dampening) * g;
                }
                b
            }
            Some(b) => {
                return Err(Error::Shape(format!(
                    "momentum buffer has {} entries, gradient {}",
                    b.len(),
                    grads.len()
                )))
            }
            None => self.buffer.insert(grads.to_vec()),
        };
        params
            .iter_mut()
            .zip(b.iter())
            .for_each(|(p, b)| *p -= self.lr * b);
        Ok(())
    }
}

/// Adam with bias correction and decoupled weight decay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamW {
    pub fn new(beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Result<Self> {
        if !((0.0..1.0).contains(&beta1)
            && (0.0..1.0).contains(&beta2)
            && eps > 0.0
            && weight_decay >= 0.0)
        {
            return Err(Error::Validation("invalid AdamW hyperparameters".into()));
        }
        Ok(Self {
            beta1,
            beta2,
            eps,
            weight_decay,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, lr: f64, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check(params, grads)?;
        if self.t == 0 {
            self.m = vec![0.0; params.len()];
            self.v = vec![0.0; params.len()];
        } else if self.m.len() != params.len() {
            return Err(Error::Shape("parameter count changed between steps".into()));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] *= 1.0 - lr * self.weight_decay;
            params[i] -= lr * mhat / (vhat.sqrt() + self.eps);
        }
        Ok(())
    }
}

impl Default for AdamW {
    fn default() -> Self {
        Self::new(0.9, 0.999, 1e-8, 0.01).expect("valid defaults")
    }
}

/// Learning rate decaying linearly per epoch from `start` at epoch 0 to
/// `end` at the last epoch.
pub fn linear_lr(start: f64, end: f64, epoch: usize, epochs: usize) -> f64 {
    if epochs <= 1 {
        return start;
    }
    let t = epoch.min(epochs - 1) as f64 / (epochs - 1) as f64;
    start + (end - start) * t
}
