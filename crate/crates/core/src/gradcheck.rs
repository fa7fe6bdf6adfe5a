//! Finite-difference checks for every differentiable primitive and pipeline
//! stage.
//!
//! Each case draws a base point from a seeded generator, reduces its output
//! to a scalar by projecting onto fixed pseudo-random weights and compares
//! reverse-mode gradients against central differences. Affine stages are
//! exact under finite differences and get a much tighter tolerance.

use std::collections::BTreeSet;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{check_gradient, concat, conv3x3, CsrMatrix, Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::geometry::{face_normals_var, icosphere, TriangleMesh};
use crate::optimize::{
    loss_edge_length, loss_floor_plane, loss_laplacian, loss_mse, loss_normal_consistency,
    loss_total, FloorCamera, LossWeights, MeshTopology, Reduction,
};
use crate::raster::{blend, depth_buffer, rasterize, soft_blend, soft_silhouette, RasterConfig};
use crate::sarcam::{
    ground_projection, ndc_orthographic, range_transform, to_ndc, view_transform, AspectPose,
    SceneExtent,
};
use crate::shade::{
    analytic_shader, face_normal_dot, learned_shader_raw, pedf, render_features, FeatureMaps,
    LearnedShader, PedfConfig, ShaderParams,
};

pub const AFFINE_TOLERANCE: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-2;
const AFFINE_STEP: f64 = 1e-3;
const STEP: f64 = 1e-6;

/// Op names recorded by the graph. Every one must be reached by some case.
pub const PRIMITIVES: &[&str] = &[
    "neg",
    "scale",
    "add_scalar",
    "square",
    "sqrt",
    "exp",
    "ln",
    "sin",
    "sigmoid",
    "relu",
    "abs",
    "powf",
    "add",
    "sub",
    "mul",
    "div",
    "sum",
    "mean",
    "expand",
    "reshape",
    "gather_rows",
    "take",
    "sparse_matmul",
    "linear_rows",
    "cross_rows",
    "dot_rows",
    "row_norm",
    "normalize_rows",
    "prob_union",
    "concat",
    "conv3x3",
    "frag_sqdist",
    "frag_depth",
    "blend",
    "pedf",
];

type Scalarized = Box<dyn for<'g> Fn(&'g Graph, Var<'g>) -> Result<Var<'g>>>;

struct Probe {
    x: Tensor,
    f: Scalarized,
}

/// A named gradient check.
pub struct GradCase {
    pub name: &'static str,
    pub affine: bool,
    build: fn(&mut ChaCha8Rng) -> Result<Probe>,
}

impl GradCase {
    pub fn tolerance(&self) -> f64 {
        if self.affine {
            AFFINE_TOLERANCE
        } else {
            TOLERANCE
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub name: String,
    pub affine: bool,
    pub tolerance: f64,
    pub configs: usize,
    pub max_rel_error: f64,
    /// configuration index attaining the maximum
    pub worst_config: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub cases: Vec<CaseReport>,
    /// primitives no selected case exercised
    pub uncovered: Vec<String>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }
}

/// Projects any output onto fixed weights w_i = sin(1.7·i + phase) + 0.5.
fn project<'g>(y: Var<'g>, phase: f64) -> Result<Var<'g>> {
    let n = y.len();
    let w: Vec<f64> = (0..n)
        .map(|i| (1.7 * i as f64 + phase).sin() + 0.5)
        .collect();
    let flat = y.reshape(&[n])?;
    Ok(flat.mul(y.graph().constant(Tensor::vector(w)))?.sum())
}

/// Values with |v| in [0.2, 1.5] and random sign, clear of the kinks of
/// relu and abs.
fn signed(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.random_range(0.2..1.5);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::from_parts(shape.to_vec(), data)
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_parts(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(lo..hi)).collect(),
    )
}

fn probe(
    x: Tensor,
    f: impl for<'g> Fn(&'g Graph, Var<'g>) -> Result<Var<'g>> + 'static,
) -> Result<Probe> {
    Ok(Probe { x, f: Box::new(f) })
}

fn unary(
    rng: &mut ChaCha8Rng,
    positive: bool,
    op: for<'g> fn(Var<'g>) -> Var<'g>,
) -> Result<Probe> {
    let x = if positive {
        uniform(rng, &[3, 4], 0.3, 2.0)
    } else {
        signed(rng, &[3, 4])
    };
    let phase = rng.random_range(0.0..6.0);
    probe(x, move |_, v| project(op(v), phase))
}

fn binary(
    rng: &mut ChaCha8Rng,
    op: for<'g> fn(Var<'g>, Var<'g>) -> Result<Var<'g>>,
) -> Result<Probe> {
    let x = signed(rng, &[2, 5]);
    let phase = rng.random_range(0.0..6.0);
    // the second operand stays in [0.5, 2.5] so division is safe
    probe(x, move |_, v| {
        project(op(v, v.sin().add_scalar(1.5))?, phase)
    })
}

/// Jittered icosahedron resting across the ground plane.
fn jittered_mesh(rng: &mut ChaCha8Rng) -> Result<(Tensor, TriangleMesh)> {
    let base = icosphere(1.0, 0)?.translated([0.1, -0.2, 0.8]);
    let pts: Vec<[f64; 3]> = base
        .vertices()
        .iter()
        .map(|p| p.map(|c| c + rng.random_range(-0.05..0.05)))
        .collect();
    let mesh = base.with_vertices(pts)?;
    Ok((mesh.vertex_tensor(), mesh))
}

fn random_pose(rng: &mut ChaCha8Rng) -> Result<AspectPose> {
    AspectPose::new(
        rng.random_range(0.0..360.0),
        rng.random_range(20.0..60.0),
        100.0,
    )
}

fn soft_config() -> Result<RasterConfig> {
    // a wide candidate cutoff keeps faces from dropping in or out under the step
    Ok(RasterConfig {
        tau: 0.05,
        cutoff: 7.0,
        ..RasterConfig::new(16, 16, 2e-3)?
    })
}

fn small_extent() -> Result<SceneExtent> {
    SceneExtent::new(2.0, 2.0, -8.0, 8.0)
}

/// Two triangles in NDC sharing an edge, jittered in x and y.
fn ndc_patch(rng: &mut ChaCha8Rng) -> Tensor {
    let base = [
        [-0.6, -0.5, 0.5],
        [0.6, -0.45, 0.4],
        [0.05, 0.6, 0.45],
        [0.7, 0.5, 0.3],
    ];
    let pts: Vec<[f64; 3]> = base
        .iter()
        .map(|p| {
            [
                p[0] + rng.random_range(-0.05..0.05),
                p[1] + rng.random_range(-0.05..0.05),
                p[2],
            ]
        })
        .collect();
    Tensor::from_points(&pts)
}

const PATCH_FACES: [[usize; 3]; 2] = [[0, 1, 2], [1, 3, 2]];

fn slice(n: usize, range: std::ops::Range<usize>) -> Vec<Option<usize>> {
    debug_assert!(range.end <= n);
    range.map(Some).collect()
}

fn features_from<'g>(v: Var<'g>, h: usize, w: usize) -> Result<FeatureMaps<'g>> {
    let n = h * w;
    Ok(FeatureMaps {
        height: h,
        width: w,
        silhouette: v.take(&slice(3 * n, 0..n), 0.0)?,
        normal_dot: v.take(&slice(3 * n, n..2 * n), 0.0)?,
        alpha: v.take(&slice(3 * n, 2 * n..3 * n), 0.0)?,
    })
}

fn case(name: &'static str, affine: bool, build: fn(&mut ChaCha8Rng) -> Result<Probe>) -> GradCase {
    GradCase {
        name,
        affine,
        build,
    }
}

/// Every registered case, primitives first, then domain stages, then the
/// end-to-end pipeline.
pub fn cases() -> Vec<GradCase> {
    vec![
        case("neg", true, |r| unary(r, false, |v| v.neg())),
        case("scale", true, |r| unary(r, false, |v| v.scale(-1.7))),
        case("add_scalar", true, |r| {
            unary(r, false, |v| v.add_scalar(0.4))
        }),
        case("square", false, |r| unary(r, false, |v| v.square())),
        case("sqrt", false, |r| unary(r, true, |v| v.sqrt())),
        case("exp", false, |r| unary(r, false, |v| v.exp())),
        case("ln", false, |r| unary(r, true, |v| v.ln())),
        case("sin", false, |r| unary(r, false, |v| v.sin())),
        case("sigmoid", false, |r| unary(r, false, |v| v.sigmoid())),
        case("relu", false, |r| unary(r, false, |v| v.relu())),
        case("abs", false, |r| unary(r, false, |v| v.abs())),
        case("powf", false, |r| unary(r, true, |v| v.powf(2.5))),
        case("add", false, |r| binary(r, |a, b| a.add(b))),
        case("sub", false, |r| binary(r, |a, b| a.sub(b))),
        case("mul", false, |r| binary(r, |a, b| a.mul(b))),
        case("div", false, |r| binary(r, |a, b| a.div(b))),
        case("sum", false, |r| {
            let x = signed(r, &[4, 3]);
            probe(x, |_, v| Ok(v.square().sum().sin()))
        }),
        case("mean", false, |r| {
            let x = signed(r, &[4, 3]);
            probe(x, |_, v| Ok(v.square().mean().sin()))
        }),
        case("expand", true, |r| {
            let x = signed(r, &[1]);
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| project(v.expand(&[4, 3])?, phase))
        }),
        case("reshape", true, |r| {
            let x = signed(r, &[12]);
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| project(v.reshape(&[3, 4])?, phase))
        }),
        case("gather_rows", true, |r| {
            let x = signed(r, &[3, 3]);
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| project(v.gather_rows(&[2, 0, 2, 1])?, phase))
        }),
        case("take", true, |r| {
            let x = signed(r, &[5]);
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| {
                project(
                    v.take(&[Some(4), None, Some(0), Some(4), Some(2)], 0.7)?,
                    phase,
                )
            })
        }),
        case("sparse_matmul", true, |r| {
            let x = signed(r, &[4, 3]);
            let rows: Vec<Vec<(usize, f64)>> = (0..3)
                .map(|i| {
                    vec![
                        (i, r.random_range(-1.0..1.0)),
                        (3, r.random_range(-1.0..1.0)),
                    ]
                })
                .collect();
            let m = Rc::new(CsrMatrix::from_rows(4, &rows));
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| project(v.sparse_matmul(m.clone())?, phase))
        }),
        case("linear_rows", true, |r| {
            let x = signed(r, &[4, 3]);
            let m: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect())
                .collect();
            let t = vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| project(v.linear_rows(&m, &t)?, phase))
        }),
        case("cross_rows", false, |r| {
            let x = signed(r, &[4, 3]);
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| project(v.cross_rows(v.sin())?, phase))
        }),
        case("dot_rows", false, |r| {
            let x = signed(r, &[4, 3]);
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| project(v.dot_rows(v.sin())?, phase))
        }),
        case("row_norm", false, |r| {
            let x = signed(r, &[4, 3]);
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| project(v.row_norm()?, phase))
        }),
        case("normalize_rows", false, |r| {
            let x = signed(r, &[4, 3]);
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| project(v.normalize_rows()?, phase))
        }),
        case("prob_union", false, |r| {
            let x = uniform(r, &[3, 4], 0.1, 0.9);
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| project(v.prob_union()?, phase))
        }),
        case("concat", true, |r| {
            let x = signed(r, &[2, 3]);
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| {
                project(concat(&[v, v.scale(2.0), v])?, phase)
            })
        }),
        case("conv3x3_input", false, |r| {
            let x = signed(r, &[2, 4, 5]);
            let w = uniform(r, &[3, 2, 3, 3], -1.0, 1.0);
            let b = uniform(r, &[3], -1.0, 1.0);
            let phase = r.random_range(0.0..6.0);
            probe(x, move |g, v| {
                project(
                    conv3x3(v, g.constant(w.clone()), g.constant(b.clone()))?.sin(),
                    phase,
                )
            })
        }),
        case("conv3x3_weights", false, |r| {
            let input = signed(r, &[2, 4, 5]);
            let x = uniform(r, &[3 * 2 * 9 + 3], -1.0, 1.0);
            let phase = r.random_range(0.0..6.0);
            probe(x, move |g, v| {
                let nw = 3 * 2 * 9;
                let w = v.take(&slice(nw + 3, 0..nw), 0.0)?.reshape(&[3, 2, 3, 3])?;
                let b = v.take(&slice(nw + 3, nw..nw + 3), 0.0)?;
                project(conv3x3(g.constant(input.clone()), w, b)?.sin(), phase)
            })
        }),
        case("blend", false, |r| {
            let (p, k) = (3, 4);
            let x = Tensor::from_parts(
                vec![3 * p * k],
                [
                    uniform(r, &[p * k], 0.05, 0.95),
                    uniform(r, &[p * k], 0.0, 1.0),
                    signed(r, &[p * k]),
                ]
                .iter()
                .flat_map(|t| t.data().to_vec())
                .collect(),
            );
            let mask: Vec<bool> = (0..p * k).map(|i| i % 5 != 3).collect();
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| {
                let n = p * k;
                let part = |i: usize| {
                    v.take(&slice(3 * n, i * n..(i + 1) * n), 0.0)?
                        .reshape(&[p, k])
                };
                project(
                    blend(part(0)?, part(1)?, part(2)?, &mask, 0.1, 1e-3)?,
                    phase,
                )
            })
        }),
        case("raster_coverage", false, |r| {
            let x = ndc_patch(r);
            let phase = r.random_range(0.0..6.0);
            let cfg = soft_config()?;
            probe(x, move |_, v| {
                project(soft_silhouette(&rasterize(v, &PATCH_FACES, &cfg)?)?, phase)
            })
        }),
        case("raster_depth", false, |r| {
            let x = ndc_patch(r);
            let phase = r.random_range(0.0..6.0);
            let cfg = soft_config()?;
            probe(x, move |_, v| {
                let f = rasterize(v, &PATCH_FACES, &cfg)?;
                project(
                    f.depth
                        .add(depth_buffer(&f)?.sum().expand(&f.depth.shape())?)?,
                    phase,
                )
            })
        }),
        case("raster_blend", false, |r| {
            let x = ndc_patch(r);
            let vals = Tensor::vector(vec![r.random_range(0.1..1.0), r.random_range(0.1..1.0)]);
            let phase = r.random_range(0.0..6.0);
            let cfg = soft_config()?;
            probe(x, move |g, v| {
                let f = rasterize(v, &PATCH_FACES, &cfg)?;
                project(soft_blend(&f, g.constant(vals.clone()))?, phase)
            })
        }),
        case("view_transform", true, |r| {
            let x = signed(r, &[5, 3]);
            let pose = random_pose(r)?;
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| project(view_transform(v, &pose)?, phase))
        }),
        case("range_transform", true, |r| {
            let x = signed(r, &[5, 3]);
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| project(range_transform(v, 100.0)?, phase))
        }),
        case("ground_projection", true, |r| {
            let x = signed(r, &[5, 3]);
            let el = r.random_range(10.0..70.0);
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| project(ground_projection(v, el)?, phase))
        }),
        case("ndc_orthographic", true, |r| {
            let x = signed(r, &[5, 3]);
            let ext = small_extent()?;
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| project(ndc_orthographic(v, &ext)?, phase))
        }),
        case("to_ndc", true, |r| {
            let x = signed(r, &[5, 3]);
            let pose = random_pose(r)?;
            let ext = small_extent()?;
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| project(to_ndc(v, &pose, &ext)?, phase))
        }),
        case("face_normals", false, |r| {
            let (x, mesh) = jittered_mesh(r)?;
            let faces = mesh.faces().to_vec();
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| project(face_normals_var(v, &faces)?, phase))
        }),
        case("face_normal_dot", false, |r| {
            let (x, mesh) = jittered_mesh(r)?;
            let faces = mesh.faces().to_vec();
            let pose = random_pose(r)?;
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| {
                project(face_normal_dot(v, &faces, &pose)?, phase)
            })
        }),
        case("render_features", false, |r| {
            let (x, mesh) = jittered_mesh(r)?;
            let faces = mesh.faces().to_vec();
            let pose = random_pose(r)?;
            let (ext, cfg) = (small_extent()?, soft_config()?);
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| {
                project(
                    render_features(v, &faces, &pose, &ext, &cfg)?.stacked()?,
                    phase,
                )
            })
        }),
        case("analytic_shader", false, |r| {
            let (h, w) = (4, 5);
            let n = h * w;
            let x = Tensor::vector(
                [
                    uniform(r, &[n], 0.05, 0.95),
                    signed(r, &[n]),
                    uniform(r, &[n], 0.05, 0.95),
                ]
                .iter()
                .flat_map(|t| t.data().to_vec())
                .collect(),
            );
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| {
                let f = features_from(v, h, w)?;
                project(analytic_shader(&f, &ShaderParams::default())?, phase)
            })
        }),
        case("learned_shader", false, |r| {
            let x = uniform(r, &[3, 4, 5], -1.0, 1.0);
            let net = LearnedShader::random(4, r.random())?;
            let phase = r.random_range(0.0..6.0);
            probe(x, move |g, v| {
                project(learned_shader_raw(v, &net.params(g))?, phase)
            })
        }),
        case("pedf", false, |r| {
            // linear and log segments, away from the knee at 1 and the clip
            let lin = uniform(r, &[6], 0.05, 0.9);
            let log = uniform(r, &[6], 1.2, 20.0);
            let x = Tensor::vector(lin.data().iter().chain(log.data()).copied().collect());
            let phase = r.random_range(0.0..6.0);
            probe(x, move |_, v| {
                project(pedf(v, 1.0, &PedfConfig::default())?, phase)
            })
        }),
        case("loss_mse", false, |r| {
            let x = uniform(r, &[20], 0.0, 1.0);
            let label = uniform(r, &[20], 0.0, 1.0);
            probe(x, move |g, v| loss_mse(v, g.constant(label.clone())))
        }),
        case("loss_laplacian", false, |r| {
            let (x, mesh) = jittered_mesh(r)?;
            let topo = MeshTopology::new(&mesh)?;
            probe(x, move |_, v| loss_laplacian(v, &topo.laplacian))
        }),
        case("loss_normal_consistency", false, |r| {
            let (x, mesh) = jittered_mesh(r)?;
            let topo = MeshTopology::new(&mesh)?;
            probe(x, move |_, v| {
                loss_normal_consistency(v, &topo.faces, &topo.face_pairs)
            })
        }),
        case("loss_edge_length", false, |r| {
            let (x, mesh) = jittered_mesh(r)?;
            let edges = mesh.edges();
            probe(x, move |_, v| loss_edge_length(v, &edges))
        }),
        case("loss_floor_plane", false, |r| {
            let (x, mesh) = jittered_mesh(r)?;
            let faces = mesh.faces().to_vec();
            let cam = FloorCamera {
                half_width: 2.0,
                resolution: 16,
                ..FloorCamera::default()
            };
            probe(x, move |_, v| Ok(loss_floor_plane(v, &faces, &cam)?.value))
        }),
        case("loss_total", false, |r| {
            let (x, mesh) = jittered_mesh(r)?;
            let topo = MeshTopology::new(&mesh)?;
            let cam = FloorCamera {
                half_width: 2.0,
                resolution: 16,
                ..FloorCamera::default()
            };
            let weights = LossWeights {
                reduction: Reduction::Mean,
                ..LossWeights::default()
            };
            probe(x, move |_, v| {
                let mse = v.square().mean().scale(0.1);
                Ok(loss_total(mse, v, &topo, &weights, &cam)?.0)
            })
        }),
        case("pipeline", false, |r| {
            let (x, mesh) = jittered_mesh(r)?;
            let faces = mesh.faces().to_vec();
            let pose = random_pose(r)?;
            let (ext, cfg) = (small_extent()?, soft_config()?);
            let label = uniform(r, &[cfg.num_pixels()], 0.0, 1.0);
            let pcfg = PedfConfig::default();
            // the remap threshold is fixed at the base point, as in reconstruction
            let threshold = {
                let g = Graph::new();
                let f = render_features(g.constant(x.clone()), &faces, &pose, &ext, &cfg)?;
                let img = analytic_shader(&f, &ShaderParams::default())?.value();
                pcfg.threshold(img.data())
            };
            probe(x, move |g, v| {
                let f = render_features(v, &faces, &pose, &ext, &cfg)?;
                let img = pedf(
                    analytic_shader(&f, &ShaderParams::default())?,
                    threshold,
                    &pcfg,
                )?;
                loss_mse(img, g.constant(label.clone()))
            })
        }),
    ]
}

/// Ops recorded with gradient tracking while evaluating a case at one
/// configuration.
fn ops_of(case: &GradCase, rng: &mut ChaCha8Rng) -> Result<BTreeSet<&'static str>> {
    let p = (case.build)(rng)?;
    let g = Graph::new();
    (p.f)(&g, g.param(p.x))?;
    Ok(g.tracked_ops())
}

/// Runs one case over `configs` seeded configurations.
pub fn run_case(case: &GradCase, configs: usize, seed: u64) -> Result<CaseReport> {
    if configs == 0 {
        return Err(Error::Validation("need at least one configuration".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = if case.affine { AFFINE_STEP } else { STEP };
    let (mut worst, mut worst_config) = (0.0f64, 0);
    for i in 0..configs {
        let p = (case.build)(&mut rng)?;
        let r = check_gradient(|g, v| (p.f)(g, v), &p.x, step)
            .map_err(|e| Error::Numeric(format!("gradcheck {} config {i}: {e}", case.name)))?;
        // NaN compares false, so fold it in explicitly
        if r.max_rel_error.is_nan() || r.max_rel_error > worst {
            worst = if r.max_rel_error.is_nan() {
                f64::INFINITY
            } else {
                r.max_rel_error
            };
            worst_config = i;
        }
    }
    Ok(CaseReport {
        name: case.name.to_string(),
        affine: case.affine,
        tolerance: case.tolerance(),
        configs,
        max_rel_error: worst,
        worst_config,
        passed: worst <= case.tolerance(),
    })
}

/// Runs every case whose name contains `filter` (all when `None`) and
/// reports primitives left unexercised by the selection.
pub fn run_suite(filter: Option<&str>, configs: usize, seed: u64) -> Result<SuiteReport> {
    let selected: Vec<GradCase> = cases()
        .into_iter()
        .filter(|c| filter.is_none_or(|f| c.name.contains(f)))
        .collect();
    if selected.is_empty() {
        return Err(Error::Validation(format!(
            "no gradient check matches {:?}",
            filter.unwrap_or("")
        )));
    }
    let mut reports = Vec::with_capacity(selected.len());
    let mut seen = BTreeSet::new();
    for (i, case) in selected.iter().enumerate() {
        let case_seed = seed.wrapping_add(i as u64);
        seen.extend(ops_of(case, &mut ChaCha8Rng::seed_from_u64(case_seed))?);
        let report = run_case(case, configs, case_seed)?;
        log::info!(
            "gradcheck {}: max rel error {:.3e}",
            report.name,
            report.max_rel_error
        );
        reports.push(report);
    }
    let uncovered = PRIMITIVES
        .iter()
        .filter(|p| !seen.contains(*p))
        .map(|p| p.to_string())
        .collect();
    Ok(SuiteReport {
        cases: reports,
        uncovered,
    })
}
