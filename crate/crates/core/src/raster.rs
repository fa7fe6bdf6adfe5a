//! Soft rasterization of NDC triangles.
//!
//! Each pixel keeps up to K candidate faces, nearest first. Candidates carry
//! a signed squared distance to the face boundary (positive inside) and an
//! interpolated depth; both are recorded as differentiable primitives of the
//! NDC vertex positions. Coverage probabilities `logistic(s/σ)` turn those
//! into silhouettes and depth-weighted blends.

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{logistic, Tensor, Var};
use crate::error::{Error, Result};

/// Padding for empty candidate slots; saturates any logistic to exactly 0.
const EMPTY_SQDIST: f64 = -1e30;
/// Projected (twice) areas below this are treated as degenerate and skipped.
const MIN_AREA2: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterConfig {
    pub height: usize,
    pub width: usize,
    /// Blend radius in squared-NDC-distance units; 0 gives hard coverage.
    pub sigma: f64,
    /// Depth temperature of the blend.
    pub tau: f64,
    pub faces_per_pixel: usize,
    /// Normalized inverse depth of the background term.
    pub background_eps: f64,
    /// Candidates farther than `cutoff·√σ` outside a face are dropped.
    pub cutoff: f64,
}

impl RasterConfig {
    pub fn new(height: usize, width: usize, sigma: f64) -> Result<Self> {
        let cfg = Self {
            height,
            width,
            sigma,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::Validation("image dims must be positive".into()));
        }
        if !(self.sigma >= 0.0) || !(self.tau > 0.0) || self.faces_per_pixel == 0 {
            return Err(Error::Validation(format!(
                "raster config needs sigma >= 0, tau > 0, K >= 1; got {}, {}, {}",
                self.sigma, self.tau, self.faces_per_pixel
            )));
        }
        if !(self.cutoff > 0.0) {
            return Err(Error::Validation("cutoff must be positive".into()));
        }
        Ok(())
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            height: 128,
            width: 128,
            sigma: 1e-4,
            tau: 1e-4,
            faces_per_pixel: 8,
            background_eps: 1e-3,
            cutoff: 3.0,
        }
    }
}

/// NDC position of a pixel center; row 0 is the top (y = +1).
pub fn pixel_center(row: usize, col: usize, height: usize, width: usize) -> (f64, f64) {
    (
        -1.0 + (2 * col + 1) as f64 / width as f64,
        1.0 - (2 * row + 1) as f64 / height as f64,
    )
}

/// Geometry of one candidate, kept for the adjoints.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    face: usize,
    depth: f64,
    sqdist: f64,
    bary: [f64; 3],
    /// nearest boundary edge (0: v0→v1, 1: v1→v2, 2: v2→v0) and its parameter
    edge: u8,
    t: f64,
}

/// Per-pixel candidates (P×K slots, nearest first) and their
/// differentiable distance and depth.
pub struct Fragments<'g> {
    pub config: RasterConfig,
    faces: Vec<Option<usize>>,
    bary: Vec<[f64; 3]>,
    /// signed squared distance, P×K
    pub sqdist: Var<'g>,
    /// interpolated NDC depth, P×K, far plane (1.0) in empty slots
    pub depth: Var<'g>,
}

impl<'g> Fragments<'g> {
    pub fn height(&self) -> usize {
        self.config.height
    }

    pub fn width(&self) -> usize {
        self.config.width
    }

    pub fn k(&self) -> usize {
        self.config.faces_per_pixel
    }

    /// Candidate face of every slot, row-major over pixels then K.
    pub fn faces(&self) -> &[Option<usize>] {
        &self.faces
    }

    pub fn candidates(&self, row: usize, col: usize) -> &[Option<usize>] {
        let k = self.k();
        let p = row * self.width() + col;
        &self.faces[p * k..(p + 1) * k]
    }

    pub fn barycentrics(&self, row: usize, col: usize) -> &[[f64; 3]] {
        let k = self.k();
        let p = row * self.width() + col;
        &self.bary[p * k..(p + 1) * k]
    }

    /// 1 where the slot holds a face, else 0.
    pub fn mask(&self) -> Vec<bool> {
        self.faces.iter().map(Option::is_some).collect()
    }

    /// Per-slot coverage probability D = logistic(s/σ), or hard 0/1 coverage
    /// when σ = 0.
    pub fn coverage(&self) -> Result<Var<'g>> {
        let sigma = self.config.sigma;
        if sigma > 0.0 {
            return Ok(self.sqdist.scale(1.0 / sigma).sigmoid());
        }
        let s = self.sqdist.value();
        let hard = s.map(|v| if v >= 0.0 { 1.0 } else { 0.0 });
        Ok(self.sqdist.graph().constant(hard))
    }
}

fn edge_fn(a: [f64; 2], b: [f64; 2], q: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0])
}

/// Squared distance from q to segment ab with the clamped parameter t.
fn segment_sqdist(a: [f64; 2], b: [f64; 2], q: [f64; 2]) -> (f64, f64) {
    let e = [b[0] - a[0], b[1] - a[1]];
    let len2 = e[0] * e[0] + e[1] * e[1];
    let t = if len2 > 0.0 {
        (((q[0] - a[0]) * e[0] + (q[1] - a[1]) * e[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let c = [a[0] + t * e[0], a[1] + t * e[1]];
    ((q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2), t)
}

/// Gathers candidate faces per pixel and records the distance and depth
/// primitives. Pixels with more than K qualifying faces keep the K nearest
/// (ties broken by face index).
pub fn rasterize<'g>(
    ndc: Var<'g>,
    faces: &[[usize; 3]],
    config: &RasterConfig,
) -> Result<Fragments<'g>> {
    config.validate()?;
    let v = ndc.value();
    if v.shape().len() != 2 || v.shape()[1] != 3 {
        return Err(Error::Shape(format!(
            "rasterize expects N×3 vertices, got {:?}",
            v.shape()
        )));
    }
    let nv = v.shape()[0];
    if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= nv)) {
        return Err(Error::Validation(format!(
            "face {f:?} out of range for {nv} vertices"
        )));
    }
    let (h, w, k) = (config.height, config.width, config.faces_per_pixel);
    let pt = |i: usize| [v.data()[3 * i], v.data()[3 * i + 1], v.data()[3 * i + 2]];

    let reach = if config.sigma > 0.0 {
        config.cutoff * config.sigma.sqrt()
    } else {
        0.0
    };
    let min_s = -reach * reach;
    let mut lists: Vec<Vec<Candidate>> = vec![Vec::new(); h * w];

    for (fi, f) in faces.iter().enumerate() {
        let [p0, p1, p2] = f.map(pt);
        let q2 = [[p0[0], p0[1]], [p1[0], p1[1]], [p2[0], p2[1]]];
        let area2 = edge_fn(q2[0], q2[1], q2[2]);
        if area2.abs() < MIN_AREA2 {
            continue;
        }
        let xmin = q2.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min) - reach;
        let xmax = q2.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max) + reach;
        let ymin = q2.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min) - reach;
        let ymax = q2.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max) + reach;
        let Some((c0, c1)) = index_range((xmin + 1.0) * w as f64, (xmax + 1.0) * w as f64, w)
        else {
            continue;
        };
        let Some((r0, r1)) = index_range((1.0 - ymax) * h as f64, (1.0 - ymin) * h as f64, h)
        else {
            continue;
        };
        for row in r0..=r1 {
            for col in c0..=c1 {
                let (x, y) = pixel_center(row, col, h, w);
                let q = [x, y];
                let w0 = edge_fn(q2[1], q2[2], q);
                let w1 = edge_fn(q2[2], q2[0], q);
                let w2 = edge_fn(q2[0], q2[1], q);
                let inside = if area2 > 0.0 {
                    w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0
                } else {
                    w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0
                };
                let mut best = (f64::INFINITY, 0u8, 0.0);
                for e in 0..3 {
                    let (d2, t) = segment_sqdist(q2[e], q2[(e + 1) % 3], q);
                    if d2 < best.0 {
                        best = (d2, e as u8, t);
                    }
                }
                let s = if inside { best.0 } else { -best.0 };
                let keep = if config.sigma > 0.0 {
                    s >= min_s
                } else {
                    inside
                };
                if !keep {
                    continue;
                }
                // outside the triangle the weights are clamped and renormalized
                let raw = [w0 / area2, w1 / area2, w2 / area2].map(|b| b.max(0.0));
                let total = raw[0] + raw[1] + raw[2];
                let bary = raw.map(|b| b / total);
                let depth = bary[0] * p0[2] + bary[1] * p1[2] + bary[2] * p2[2];
                lists[row * w + col].push(Candidate {
                    face: fi,
                    depth,
                    sqdist: s,
                    bary,
                    edge: best.1,
                    t: best.2,
                });
            }
        }
    }

    let mut slots: Vec<Option<Candidate>> = Vec::with_capacity(h * w * k);
    for list in &mut lists {
        list.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.face.cmp(&b.face)));
        list.truncate(k);
        slots.extend(list.iter().copied().map(Some));
        slots.extend(std::iter::repeat_n(None, k - list.len()));
    }
    drop(lists);

    let faces_out: Vec<Option<usize>> = slots.iter().map(|c| c.map(|c| c.face)).collect();
    let bary: Vec<[f64; 3]> = slots
        .iter()
        .map(|c| c.map_or([0.0; 3], |c| c.bary))
        .collect();
    let slots = Rc::new(slots);
    let face_list: Rc<Vec<[usize; 3]>> = Rc::new(faces.to_vec());
    let sqdist = frag_sqdist(ndc, slots.clone(), face_list.clone(), config)?;
    let depth = frag_depth(ndc, slots, face_list, config)?;
    Ok(Fragments {
        config: *config,
        faces: faces_out,
        bary,
        sqdist,
        depth,
    })
}

/// Inclusive index range of pixel centers `(2i+1)` falling in [lo, hi],
/// where lo and hi are already scaled by the image size.
fn index_range(lo: f64, hi: f64, n: usize) -> Option<(usize, usize)> {
    let first = ((lo - 1.0) / 2.0).ceil().max(0.0);
    let last = ((hi - 1.0) / 2.0).floor().min(n as f64 - 1.0);
    if !(first <= last) {
        return None;
    }
    Some((first as usize, last as usize))
}

fn frag_sqdist<'g>(
    ndc: Var<'g>,
    slots: Rc<Vec<Option<Candidate>>>,
    faces: Rc<Vec<[usize; 3]>>,
    cfg: &RasterConfig,
) -> Result<Var<'g>> {
    let (h, w, k) = (cfg.height, cfg.width, cfg.faces_per_pixel);
    let data = slots
        .iter()
        .map(|c| c.map_or(EMPTY_SQDIST, |c| c.sqdist))
        .collect();
    let v = ndc.value();
    let n = v.len();
    Ok(ndc.graph().record(
        "frag_sqdist",
        &[ndc],
        Tensor::from_parts(vec![h * w, k], data),
        Box::new(move |g, _| {
            let mut dv = vec![0.0; n];
            let x = v.data();
            for (slot, c) in slots.iter().enumerate() {
                let Some(c) = c else { continue };
                let gs = g[slot];
                if gs == 0.0 {
                    continue;
                }
                let p = slot / k;
                let (qx, qy) = pixel_center(p / w, p % w, h, w);
                let f = faces[c.face];
                let e = c.edge as usize;
                let (ia, ib) = (f[e], f[(e + 1) % 3]);
                let (ax, ay) = (x[3 * ia], x[3 * ia + 1]);
                let (bx, by) = (x[3 * ib], x[3 * ib + 1]);
                let cx = ax + c.t * (bx - ax);
                let cy = ay + c.t * (by - ay);
                // d(d²)/dc = −2(q − c); c = (1−t)a + t b with t held fixed
                let sign = if c.sqdist >= 0.0 { 1.0 } else { -1.0 };
                let gx = -2.0 * (qx - cx) * sign * gs;
                let gy = -2.0 * (qy - cy) * sign * gs;
                dv[3 * ia] += (1.0 - c.t) * gx;
                dv[3 * ia + 1] += (1.0 - c.t) * gy;
                dv[3 * ib] += c.t * gx;
                dv[3 * ib + 1] += c.t * gy;
            }
            vec![Some(dv)]
        }),
    ))
}

fn frag_depth<'g>(
    ndc: Var<'g>,
    slots: Rc<Vec<Option<Candidate>>>,
    faces: Rc<Vec<[usize; 3]>>,
    cfg: &RasterConfig,
) -> Result<Var<'g>> {
    let (h, w, k) = (cfg.height, cfg.width, cfg.faces_per_pixel);
    let data = slots.iter().map(|c| c.map_or(1.0, |c| c.depth)).collect();
    let v = ndc.value();
    let n = v.len();
    Ok(ndc.graph().record(
        "frag_depth",
        &[ndc],
        Tensor::from_parts(vec![h * w, k], data),
        Box::new(move |g, _| {
            let mut dv = vec![0.0; n];
            let x = v.data();
            for (slot, c) in slots.iter().enumerate() {
                let Some(c) = c else { continue };
                let gz = g[slot];
                if gz == 0.0 {
                    continue;
                }
                let p = slot / k;
                let (qx, qy) = pixel_center(p / w, p % w, h, w);
                let f = faces[c.face];
                let pts = f.map(|i| [x[3 * i], x[3 * i + 1], x[3 * i + 2]]);
                let xy = pts.map(|p| [p[0], p[1]]);
                // z = Σ w_i z_i / Σ w_i over the unclamped weights, w_i being
                // the edge function opposite vertex i
                let wsum: f64 = (0..3)
                    .filter(|&i| c.bary[i] > 0.0)
                    .map(|i| edge_fn(xy[(i + 1) % 3], xy[(i + 2) % 3], [qx, qy]))
                    .sum();
                let mut dxy = [[0.0f64; 2]; 3];
                for i in 0..3 {
                    dv[3 * f[i] + 2] += gz * c.bary[i];
                    if c.bary[i] <= 0.0 {
                        continue;
                    }
                    let (a, b) = ((i + 1) % 3, (i + 2) % 3);
                    // ∂w_i/∂(a, b) for w_i = edge_fn(p_a, p_b, q)
                    let coef = (pts[i][2] - c.depth) / wsum;
                    dxy[a][0] += coef * (pts[b][1] - qy);
                    dxy[a][1] += coef * (qx - pts[b][0]);
                    dxy[b][0] += coef * (qy - pts[a][1]);
                    dxy[b][1] += coef * (pts[a][0] - qx);
                }
                for i in 0..3 {
                    dv[3 * f[i]] += gz * dxy[i][0];
                    dv[3 * f[i] + 1] += gz * dxy[i][1];
                }
            }
            vec![Some(dv)]
        }),
    ))
}

/// Silhouette = 1 − Π_j (1 − D_j) per pixel, as an H·W vector.
pub fn soft_silhouette<'g>(fragments: &Fragments<'g>) -> Result<Var<'g>> {
    fragments.coverage()?.prob_union()
}

/// Depth-weighted blend of one value per face. Returns an H·W vector.
pub fn soft_blend<'g>(fragments: &Fragments<'g>, face_values: Var<'g>) -> Result<Var<'g>> {
    let (p, k) = (fragments.config.num_pixels(), fragments.k());
    let values = face_values.take(&fragments.faces, 0.0)?.reshape(&[p, k])?;
    let zbar = fragments.depth.neg().add_scalar(1.0);
    blend(
        fragments.coverage()?,
        zbar,
        values,
        &fragments.mask(),
        fragments.config.tau,
        fragments.config.background_eps,
    )
}

/// Weighted mean per row of P×K inputs:
/// out = Σ_j D_j e_j c_j / (Σ_j D_j e_j + e_b),
/// e_j = exp((z̄_j − m)/τ), e_b = exp((ε − m)/τ), m = max(ε, max z̄).
/// Slots with `mask` false are ignored.
pub fn blend<'g>(
    coverage: Var<'g>,
    zbar: Var<'g>,
    values: Var<'g>,
    mask: &[bool],
    tau: f64,
    eps: f64,
) -> Result<Var<'g>> {
    let (d, z, c) = (coverage.value(), zbar.value(), values.value());
    if d.shape().len() != 2
        || d.shape() != z.shape()
        || d.shape() != c.shape()
        || mask.len() != d.len()
    {
        return Err(Error::Shape(
            "blend: inputs must share one P×K shape".into(),
        ));
    }
    let (p, k) = (d.shape()[0], d.shape()[1]);
    let mask: Rc<Vec<bool>> = Rc::new(mask.to_vec());
    // per pixel: e_j for each slot, S, out
    let mut e = vec![0.0; p * k];
    let mut denom = vec![0.0; p];
    let mut out = vec![0.0; p];
    for r in 0..p {
        let range = r * k..(r + 1) * k;
        let m = range
            .clone()
            .filter(|&i| mask[i])
            .map(|i| z.data()[i])
            .fold(eps, f64::max);
        let mut s = ((eps - m) / tau).exp();
        let mut acc = 0.0;
        for i in range {
            if mask[i] {
                e[i] = ((z.data()[i] - m) / tau).exp();
                let de = d.data()[i] * e[i];
                s += de;
                acc += de * c.data()[i];
            }
        }
        denom[r] = s;
        out[r] = acc / s;
    }
    let out_t = Tensor::vector(out.clone());
    Ok(coverage.graph().record(
        "blend",
        &[coverage, zbar, values],
        out_t,
        Box::new(move |g, need| {
            let mut gd = vec![0.0; p * k];
            let mut gz = vec![0.0; p * k];
            let mut gc = vec![0.0; p * k];
            for r in 0..p {
                if g[r] == 0.0 {
                    continue;
                }
                let scale = g[r] / denom[r];
                for i in r * k..(r + 1) * k {
                    if !mask[i] {
                        continue;
                    }
                    let diff = c.data()[i] - out[r];
                    gd[i] = scale * e[i] * diff;
                    gz[i] = scale * d.data()[i] * e[i] * diff / tau;
                    gc[i] = scale * d.data()[i] * e[i];
                }
            }
            vec![
                need[0].then_some(gd),
                need[1].then_some(gz),
                need[2].then_some(gc),
            ]
        }),
    ))
}

/// Depth of the nearest covering face per pixel; empty pixels read 1.0 (far).
pub fn depth_buffer<'g>(fragments: &Fragments<'g>) -> Result<Var<'g>> {
    let k = fragments.k();
    let s = fragments.sqdist.value();
    let index: Vec<Option<usize>> = (0..fragments.config.num_pixels())
        .map(|p| (p * k..(p + 1) * k).find(|&i| fragments.faces[i].is_some() && s.data()[i] >= 0.0))
        .collect();
    fragments
        .depth
        .reshape(&[fragments.depth.len()])?
        .take(&index, 1.0)
}

/// Plain coverage weight used where a primitive value is wanted without a graph.
pub fn coverage_probability(sqdist: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        logistic(sqdist / sigma)
    } else if sqdist >= 0.0 {
        1.0
    } else {
        0.0
    }
}
