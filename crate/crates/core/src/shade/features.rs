use crate::autodiff::{concat, Graph, Tensor, Var};
use crate::error::Result;
use crate::geometry::{face_normals_var, Point3};
use crate::raster::{rasterize, soft_blend, soft_silhouette, Fragments, RasterConfig};
use crate::sarcam::{to_ndc, view_affine, AspectPose, SceneExtent};

/// Three per-pixel channels, each an H·W vector in row-major order.
pub struct FeatureMaps<'g> {
    pub height: usize,
    pub width: usize,
    pub silhouette: Var<'g>,
    /// d = −q̂·n̂ blended per pixel
    pub normal_dot: Var<'g>,
    /// illuminated-and-visible weight
    pub alpha: Var<'g>,
}

impl<'g> FeatureMaps<'g> {
    pub fn zeros(g: &'g Graph, height: usize, width: usize) -> Self {
        let z = || g.constant(Tensor::zeros(&[height * width]));
        Self {
            height,
            width,
            silhouette: z(),
            normal_dot: z(),
            alpha: z(),
        }
    }

    /// Channels stacked as a 3×H×W tensor (silhouette, normal_dot, alpha).
    pub fn stacked(&self) -> Result<Var<'g>> {
        concat(&[self.silhouette, self.normal_dot, self.alpha])?.reshape(&[
            3,
            self.height,
            self.width,
        ])
    }

    /// Plain copy of the stacked channels.
    pub fn to_tensor(&self) -> Result<Tensor> {
        Ok((*self.stacked()?.value()).clone())
    }
}

/// Per-face d = −q̂·n̂ as an F-vector.
pub fn face_normal_dot<'g>(
    vertices: Var<'g>,
    faces: &[[usize; 3]],
    pose: &AspectPose,
) -> Result<Var<'g>> {
    let q = pose.boresight();
    face_normals_var(vertices, faces)?
        .linear_rows(&[vec![-q[0], -q[1], -q[2]]], &[0.0])?
        .reshape(&[faces.len()])
}

/// Blended d per pixel.
pub fn normal_dot_feature<'g>(
    vertices: Var<'g>,
    faces: &[[usize; 3]],
    pose: &AspectPose,
    fragments: &Fragments<'g>,
) -> Result<Var<'g>> {
    soft_blend(fragments, face_normal_dot(vertices, faces, pose)?)
}

/// Faces that win at least one pixel of a hard rasterization seen from the
/// radar along its boresight. The reference image has twice the main
/// resolution and is fitted to the projected mesh bounds.
pub fn visible_faces(
    vertices: &[Point3],
    faces: &[[usize; 3]],
    pose: &AspectPose,
    main: &RasterConfig,
) -> Result<Vec<bool>> {
    let mut visible = vec![false; faces.len()];
    if faces.is_empty() {
        return Ok(visible);
    }
    let view = view_affine(pose);
    let pts: Vec<Point3> = vertices.iter().map(|&p| view.apply(p)).collect();
    let lo = |k: usize| pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
    let hi = |k: usize| pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
    let (cx, cy) = (0.5 * (lo(0) + hi(0)), 0.5 * (lo(1) + hi(1)));
    let half = 0.5 * (hi(0) - lo(0)).max(hi(1) - lo(1)) * 1.02 + 1e-9;
    let (z0, dz) = (lo(2), hi(2) - lo(2) + 1e-9);
    let ndc: Vec<Point3> = pts
        .iter()
        .map(|p| [(p[0] - cx) / half, (p[1] - cy) / half, (p[2] - z0) / dz])
        .collect();
    let cfg = RasterConfig {
        height: 2 * main.height,
        width: 2 * main.width,
        sigma: 0.0,
        faces_per_pixel: 1,
        ..*main
    };
    let g = Graph::new();
    let frags = rasterize(g.constant(Tensor::from_points(&ndc)), faces, &cfg)?;
    for f in frags.faces().iter().flatten() {
        visible[*f] = true;
    }
    Ok(visible)
}

/// alpha = silhouette · blend(visible · max(d, 0)). The silhouette factor
/// keeps alpha from exceeding coverage at soft edges.
pub fn shadow_alpha<'g>(
    face_dot: Var<'g>,
    visible: &[bool],
    silhouette: Var<'g>,
    fragments: &Fragments<'g>,
) -> Result<Var<'g>> {
    let g = face_dot.graph();
    let gate = g.constant(Tensor::vector(
        visible.iter().map(|&v| v as u8 as f64).collect(),
    ));
    let lit = face_dot.relu().mul(gate)?;
    soft_blend(fragments, lit)?.mul(silhouette)
}

/// Rasterizes the mesh at `pose` and returns the three feature channels,
/// differentiable with respect to `vertices` (N×3 world coordinates).
pub fn render_features<'g>(
    vertices: Var<'g>,
    faces: &[[usize; 3]],
    pose: &AspectPose,
    extent: &SceneExtent,
    config: &RasterConfig,
) -> Result<FeatureMaps<'g>> {
    let g = vertices.graph();
    if faces.is_empty() {
        return Ok(FeatureMaps::zeros(g, config.height, config.width));
    }
    let ndc = to_ndc(vertices, pose, extent)?;
    let frags = rasterize(ndc, faces, config)?;
    let silhouette = soft_silhouette(&frags)?;
    let face_dot = face_normal_dot(vertices, faces, pose)?;
    let normal_dot = soft_blend(&frags, face_dot)?;
    let visible = visible_faces(&vertices.value().to_points(), faces, pose, config)?;
    let alpha = shadow_alpha(face_dot, &visible, silhouette, &frags)?;
    Ok(FeatureMaps {
        height: config.height,
        width: config.width,
        silhouette,
        normal_dot,
        alpha,
    })
}
