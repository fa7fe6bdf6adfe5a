use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::FeatureMaps;
use crate::autodiff::{conv3x3, Graph, Tensor, Var};
use crate::error::{at_path, Error, Result};

/// Parameters of the closed-form shader.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShaderParams {
    pub k_d: f64,
    pub k_s: f64,
    /// specular exponent, ≥ 1
    pub p: f64,
    /// clutter level outside the silhouette, ≥ 0
    pub b: f64,
}

impl Default for ShaderParams {
    fn default() -> Self {
        Self {
            k_d: 0.7,
            k_s: 0.3,
            p: 8.0,
            b: 0.05,
        }
    }
}

impl ShaderParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_d >= 0.0 && self.k_s >= 0.0 && self.p >= 1.0 && self.b >= 0.0) {
            return Err(Error::Validation(format!(
                "invalid shader parameters {self:?}"
            )));
        }
        Ok(())
    }
}

/// magnitude = alpha·(k_d·d₊ + k_s·d₊^p) + b·(1 − silhouette), per pixel.
pub fn analytic_shader<'g>(features: &FeatureMaps<'g>, params: &ShaderParams) -> Result<Var<'g>> {
    params.validate()?;
    let d = features.normal_dot.relu();
    let lobe = d
        .scale(params.k_d)
        .add(d.powf(params.p).scale(params.k_s))?;
    let clutter = features.silhouette.scale(-params.b).add_scalar(params.b);
    features.alpha.mul(lobe)?.add(clutter)
}

/// One 3×3 convolution: weight O×C×3×3, bias O.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Three-layer convolutional shader mapping the stacked feature channels to
/// one magnitude channel. Activations: ReLU, square, identity; the final
/// output is clamped at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnedShader {
    pub layers: [ConvLayer; 3],
}

pub const FEATURE_CHANNELS: usize = 3;

impl LearnedShader {
    fn with(hidden: usize, mut fill: impl FnMut(usize, usize) -> Vec<f64>) -> Result<Self> {
        let dims = [(hidden, FEATURE_CHANNELS), (hidden, hidden), (1, hidden)];
        let layers = dims.map(|(o, c)| ConvLayer {
            weight: Tensor::from_parts(vec![o, c, 3, 3], fill(o, c)),
            bias: Tensor::zeros(&[o]),
        });
        if hidden == 0 {
            return Err(Error::Validation("hidden width must be positive".into()));
        }
        Ok(Self { layers })
    }

    pub fn zeros(hidden: usize) -> Result<Self> {
        Self::with(hidden, |o, c| vec![0.0; o * c * 9])
    }

    /// Seeded Gaussian weights with fan-in scaling, zero biases.
    pub fn random(hidden: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with(hidden, |o, c| {
            let std = (1.0 / (9 * c) as f64).sqrt();
            let n = Normal::new(0.0, std).expect("positive std");
            (0..o * c * 9).map(|_| n.sample(&mut rng)).collect()
        })
    }

    /// Weights that reproduce alpha·max(d, 0) exactly:
    /// layer 1 passes d₊ and alpha, layer 2 squares their sum and
    /// difference, layer 3 takes a quarter of the difference.
    pub fn identity_like(hidden: usize) -> Result<Self> {
        if hidden < 2 {
            return Err(Error::Validation(
                "identity construction needs 2 hidden channels".into(),
            ));
        }
        let mut s = Self::zeros(hidden)?;
        let center = |o: usize, c: usize, cin: usize| (o * cin + c) * 9 + 4;
        let w = s.layers[0].weight.data_mut();
        w[center(0, 1, FEATURE_CHANNELS)] = 1.0; // d
        w[center(1, 2, FEATURE_CHANNELS)] = 1.0; // alpha
        let w = s.layers[1].weight.data_mut();
        w[center(0, 0, hidden)] = 1.0;
        w[center(0, 1, hidden)] = 1.0;
        w[center(1, 0, hidden)] = -1.0;
        w[center(1, 1, hidden)] = 1.0;
        let w = s.layers[2].weight.data_mut();
        w[center(0, 0, hidden)] = 0.25;
        w[center(0, 1, hidden)] = -0.25;
        Ok(s)
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].bias.len()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Parameters as trainable leaves, in the order w1, b1, w2, b2, w3, b3.
    pub fn params<'g>(&self, g: &'g Graph) -> Vec<Var<'g>> {
        self.layers
            .iter()
            .flat_map(|l| [g.param(l.weight.clone()), g.param(l.bias.clone())])
            .collect()
    }

    pub fn constants<'g>(&self, g: &'g Graph) -> Vec<Var<'g>> {
        self.layers
            .iter()
            .flat_map(|l| [g.constant(l.weight.clone()), g.constant(l.bias.clone())])
            .collect()
    }

    /// Rebuilds from tensors in [`Self::params`] order.
    pub fn from_tensors(t: &[Tensor]) -> Result<Self> {
        if t.len() != 6 {
            return Err(Error::Shape(format!(
                "expected 6 parameter tensors, got {}",
                t.len()
            )));
        }
        let layer = |i: usize| ConvLayer {
            weight: t[2 * i].clone(),
            bias: t[2 * i + 1].clone(),
        };
        Ok(Self {
            layers: [layer(0), layer(1), layer(2)],
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?).map_err(at_path(path))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s: Self = serde_json::from_str(&std::fs::read_to_string(path).map_err(at_path(path))?)?;
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        let h = self.hidden();
        let want = [[h, FEATURE_CHANNELS, 3, 3], [h, h, 3, 3], [1, h, 3, 3]];
        for (l, w) in self.layers.iter().zip(want) {
            if l.weight.shape() != w || l.bias.len() != w[0] {
                return Err(Error::Shape(format!(
                    "shader layer has shape {:?}",
                    l.weight.shape()
                )));
            }
        }
        Ok(())
    }
}

/// Network output before the final clamp, 1×H×W. `params` in
/// [`LearnedShader::params`] order.
pub fn learned_shader_raw<'g>(input: Var<'g>, params: &[Var<'g>]) -> Result<Var<'g>> {
    if params.len() != 6 {
        return Err(Error::Shape(format!(
            "expected 6 parameter tensors, got {}",
            params.len()
        )));
    }
    let h1 = conv3x3(input, params[0], params[1])?.relu();
    let h2 = conv3x3(h1, params[2], params[3])?.square();
    conv3x3(h2, params[4], params[5])
}

/// Magnitude image (H·W vector) from the feature channels.
pub fn learned_shader_forward<'g>(
    features: &FeatureMaps<'g>,
    shader: &LearnedShader,
) -> Result<Var<'g>> {
    let g = features.silhouette.graph();
    let raw = learned_shader_raw(features.stacked()?, &shader.constants(g))?;
    raw.relu().reshape(&[features.height * features.width])
}

/// Shader choice used by rendering pipelines.
#[derive(Clone, Debug, PartialEq)]
pub enum Shader {
    Analytic(ShaderParams),
    Learned(Box<LearnedShader>),
}

impl Default for Shader {
    fn default() -> Self {
        Shader::Analytic(ShaderParams::default())
    }
}

impl Shader {
    pub fn shade<'g>(&self, features: &FeatureMaps<'g>) -> Result<Var<'g>> {
        match self {
            Shader::Analytic(p) => analytic_shader(features, p),
            Shader::Learned(s) => learned_shader_forward(features, s),
        }
    }
}
