//! Coarse-to-fine mesh fitting against labeled images.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::losses::{
    loss_mse, loss_total, FloorCamera, LossTerms, LossWeights, MeshTopology, Reduction,
};
use super::optim::Sgd;
use crate::autodiff::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::geometry::{make_dome, subdivide_midpoint, TriangleMesh};
use crate::raster::RasterConfig;
use crate::sarcam::{AspectPose, SceneExtent};
use crate::shade::{pedf, render_features, PedfConfig, SarImage, Shader};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSchedule {
    pub iterations: usize,
    pub batch_size: usize,
    /// blending radius for this level
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconSchedule {
    /// level 1 runs on the dome, each later level on the midpoint
    /// subdivision of the previous result
    pub levels: Vec<LevelSchedule>,
    pub lr: f64,
    pub momentum: f64,
    pub dampening: f64,
    pub dome_radius: f64,
    /// Vertices are optimized as x / unit; regularizers and the floor term
    /// are evaluated in those units too.
    pub unit: f64,
    pub weights: LossWeights,
    pub floor: FloorCamera,
}

impl Default for ReconSchedule {
    fn default() -> Self {
        Self {
            levels: vec![
                LevelSchedule {
                    iterations: 1080,
                    batch_size: 2,
                    sigma: 1e-3,
                },
                LevelSchedule {
                    iterations: 540,
                    batch_size: 4,
                    sigma: 2.5e-4,
                },
            ],
            lr: 1.0,
            momentum: 0.9,
            dampening: 0.9,
            dome_radius: 2.0,
            unit: SceneExtent::default().half_width,
            // the image term is rescaled to the normalized units
            weights: LossWeights {
                mse: 10.0,
                reduction: Reduction::Mean,
                ..LossWeights::default()
            },
            floor: FloorCamera::default(),
        }
    }
}

impl ReconSchedule {
    pub fn validate(&self, num_labels: usize) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Validation("schedule has no levels".into()));
        }
        for (i, l) in self.levels.iter().enumerate() {
            if l.iterations == 0 || l.batch_size == 0 {
                return Err(Error::Validation(format!(
                    "level {} needs iterations and batch size > 0",
                    i + 1
                )));
            }
            if l.batch_size > num_labels {
                return Err(Error::Validation(format!(
                    "level {} batch size {} exceeds the {num_labels} labels",
                    i + 1,
                    l.batch_size
                )));
            }
            if !(l.sigma >= 0.0) {
                return Err(Error::Validation(format!(
                    "level {} has negative sigma",
                    i + 1
                )));
            }
        }
        if !(self.dome_radius > 0.0 && self.unit > 0.0) {
            return Err(Error::Validation(
                "dome radius and unit must be positive".into(),
            ));
        }
        self.weights.validate()?;
        Sgd::new(self.lr, self.momentum, self.dampening).map(|_| ())
    }

    pub fn total_iterations(&self) -> usize {
        self.levels.iter().map(|l| l.iterations).sum()
    }

    /// Floor camera expressed in the optimization units.
    fn scaled_floor(&self) -> FloorCamera {
        FloorCamera {
            distance: self.floor.distance / self.unit,
            half_width: self.floor.half_width / self.unit,
            ..self.floor
        }
    }
}

/// Image geometry and display remap shared by rendering and labels. The
/// blend temperature defaults to 0.01 here: sharper depth blending makes the
/// image gradient heavy-tailed at shared edges and destabilizes SGD.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderSetup {
    pub extent: SceneExtent,
    pub raster: RasterConfig,
    pub pedf: PedfConfig,
}

pub const RECON_TAU: f64 = 0.01;

impl Default for RenderSetup {
    fn default() -> Self {
        Self::square(128, 0.075).expect("valid default geometry")
    }
}

impl RenderSetup {
    /// Square scene of `pixels`² cells of `spacing` meters.
    pub fn new(height: usize, width: usize, spacing: f64) -> Result<Self> {
        Ok(Self {
            extent: SceneExtent::from_pixels(width, height, spacing)?,
            raster: RasterConfig {
                tau: RECON_TAU,
                ..RasterConfig::new(height, width, RasterConfig::default().sigma)?
            },
            pedf: PedfConfig::default(),
        })
    }

    pub fn square(pixels: usize, spacing: f64) -> Result<Self> {
        Self::new(pixels, pixels, spacing)
    }
}

/// A label image (linear magnitudes) and the pose it was taken from.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelView {
    pub pose: AspectPose,
    pub image: SarImage,
}

/// Label prepared for the loss: remapped with its own threshold, which is
/// then also applied to the prediction.
struct PreparedLabel {
    pose: AspectPose,
    threshold: f64,
    remapped: Tensor,
}

/// Progress record handed to the observer after every iteration.
pub struct IterationRecord<'a> {
    /// 1-based, counted across levels
    pub iter: usize,
    pub level: usize,
    pub terms: LossTerms,
    pub mesh: &'a TriangleMesh,
}

pub struct ReconResult {
    pub mesh: TriangleMesh,
    pub history: Vec<LossTerms>,
}

/// Draws batches without replacement, reshuffling once fewer than a full
/// batch remain.
pub struct BatchSampler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut s = Self {
            order: (0..n).collect(),
            pos: n,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.pos = 0;
    }

    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        if self.pos + size > self.order.len() {
            self.reshuffle();
        }
        let b = self.order[self.pos..self.pos + size].to_vec();
        self.pos += size;
        b
    }
}

/// Renders the mesh at one pose through the shader, as linear magnitudes.
pub fn render_image(
    mesh: &TriangleMesh,
    pose: &AspectPose,
    shader: &Shader,
    setup: &RenderSetup,
) -> Result<SarImage> {
    let g = Graph::new();
    let v = g.constant(Tensor::from_points(mesh.vertices()));
    let feats = render_features(v, mesh.faces(), pose, &setup.extent, &setup.raster)?;
    let img = shader.shade(&feats)?.value();
    let spacing = 2.0 * setup.extent.half_width / setup.raster.width as f64;
    SarImage::linear(
        setup.raster.height,
        setup.raster.width,
        spacing,
        img.data().iter().map(|&x| x.max(0.0)).collect(),
    )
}

/// Fits a mesh to the labels. Starts from the dome, runs each level with
/// SGD on the vertex positions only, and subdivides between levels. The
/// optimizer state restarts at each level since the vertex count changes.
/// `observer` sees every iteration and may abort the run by returning an
/// error.
pub fn reconstruct(
    labels: &[LabelView],
    schedule: &ReconSchedule,
    shader: &Shader,
    setup: &RenderSetup,
    seed: u64,
    mut observer: impl FnMut(&IterationRecord) -> Result<()>,
) -> Result<ReconResult> {
    schedule.validate(labels.len())?;
    let (h, w) = (setup.raster.height, setup.raster.width);
    let prepared = labels
        .iter()
        .map(|l| {
            if l.image.is_remapped() {
                return Err(Error::Contract("labels must be linear magnitudes".into()));
            }
            if (l.image.height, l.image.width) != (h, w) {
                return Err(Error::Shape(format!(
                    "label is {}×{}, renders are {h}×{w}",
                    l.image.height, l.image.width
                )));
            }
            let threshold = setup.pedf.threshold(l.image.data());
            let remapped = l.image.remap_with(&setup.pedf, threshold)?;
            Ok(PreparedLabel {
                pose: l.pose,
                threshold,
                remapped: Tensor::vector(remapped.into_data()),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mesh = make_dome(schedule.dome_radius)?;
    let mut sampler = BatchSampler::new(labels.len(), seed);
    let mut history = Vec::with_capacity(schedule.total_iterations());
    let mut iter = 0;
    for (li, level) in schedule.levels.iter().enumerate() {
        if li > 0 {
            mesh = subdivide_midpoint(&mesh)?;
        }
        let topo = MeshTopology::new(&mesh)?;
        let raster = RasterConfig {
            sigma: level.sigma,
            ..setup.raster
        };
        let mut opt = Sgd::new(schedule.lr, schedule.momentum, schedule.dampening)?;
        let unit = schedule.unit;
        let floor = schedule.scaled_floor();
        let mut x: Vec<f64> = Tensor::from_points(mesh.vertices())
            .into_data()
            .iter()
            .map(|c| c / unit)
            .collect();
        for _ in 0..level.iterations {
            iter += 1;
            let batch = sampler.next_batch(level.batch_size);
            let diag = || {
                let poses: Vec<String> = batch
                    .iter()
                    .map(|&b| {
                        format!(
                            "({}, {})",
                            prepared[b].pose.azimuth_deg, prepared[b].pose.elevation_deg
                        )
                    })
                    .collect();
                format!(
                    "iteration {iter}, level {}, poses {}",
                    li + 1,
                    poses.join(" ")
                )
            };
            let g = Graph::new();
            let u = g.param(Tensor::new(vec![mesh.num_vertices(), 3], x.clone())?);
            let v = u.scale(unit);
            let mut mse = g.scalar(0.0);
            for &b in &batch {
                let p = &prepared[b];
                let feats = render_features(v, &topo.faces, &p.pose, &setup.extent, &raster)?;
                let pred = pedf(shader.shade(&feats)?, p.threshold, &setup.pedf)?;
                mse = mse.add(loss_mse(pred, g.constant(p.remapped.clone()))?)?;
            }
            let mse = mse.scale(1.0 / batch.len() as f64);
            let (total, terms) = loss_total(mse, u, &topo, &schedule.weights, &floor)?;
            if !terms.total.is_finite() {
                return Err(Error::Numeric(format!(
                    "loss is {} at {}",
                    terms.total,
                    diag()
                )));
            }
            let grad = total.backward()?.get_or_zeros(u).into_data();
            opt.step(&mut x, &grad).map_err(|e| match e {
                Error::Numeric(m) => Error::Numeric(format!("{m} at {}", diag())),
                other => other,
            })?;
            let meters = x.iter().map(|c| c * unit).collect();
            mesh =
                mesh.with_vertices(Tensor::new(vec![mesh.num_vertices(), 3], meters)?.to_points())?;
            history.push(terms);
            observer(&IterationRecord {
                iter,
                level: li + 1,
                terms,
                mesh: &mesh,
            })?;
        }
    }
    Ok(ReconResult { mesh, history })
}
