//! Image and mesh loss terms. Mesh terms take the vertex tensor as a graph
//! variable and the (fixed) connectivity separately.

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{CsrMatrix, Tensor, Var};
use crate::error::{Error, Result};
use crate::geometry::{face_normals_var, TriangleMesh};
use crate::raster::{rasterize, RasterConfig};

/// Mean squared pixel difference.
pub fn loss_mse<'g>(pred: Var<'g>, label: Var<'g>) -> Result<Var<'g>> {
    if pred.len() != label.len() {
        return Err(Error::Shape(format!(
            "prediction has {} pixels, label has {}",
            pred.len(),
            label.len()
        )));
    }
    let label = label.reshape(&pred.shape())?;
    Ok(pred.sub(label)?.square().mean())
}

/// Uniform Laplacian operator (centroid of the edge neighbors minus the
/// vertex), one row per vertex.
pub fn laplacian_operator(mesh: &TriangleMesh) -> Result<CsrMatrix> {
    let n = mesh.num_vertices();
    let nb = mesh.vertex_neighbors();
    let mut rows = Vec::with_capacity(n);
    for (i, list) in nb.iter().enumerate() {
        if list.is_empty() {
            return Err(Error::Topology(format!("vertex {i} has no neighbors")));
        }
        let w = 1.0 / list.len() as f64;
        let mut row: Vec<(usize, f64)> = list.iter().map(|&j| (j, w)).collect();
        row.push((i, -1.0));
        rows.push(row);
    }
    Ok(CsrMatrix::from_rows(n, &rows))
}

/// Σᵢ ‖centroid(neighbors of i) − vᵢ‖.
pub fn loss_laplacian<'g>(vertices: Var<'g>, operator: &Rc<CsrMatrix>) -> Result<Var<'g>> {
    Ok(vertices.sparse_matmul(operator.clone())?.row_norm()?.sum())
}

/// Face pairs across interior edges. Boundary edges are skipped; an edge
/// with more than two faces is a topology error.
pub fn interior_face_pairs(mesh: &TriangleMesh) -> Result<Vec<[usize; 2]>> {
    let mut pairs = Vec::new();
    for e in mesh.edge_info() {
        match e.faces.len() {
            1 => {}
            2 => pairs.push([e.faces[0], e.faces[1]]),
            k => {
                return Err(Error::Topology(format!(
                    "edge {:?} is shared by {k} faces",
                    e.vertices
                )))
            }
        }
    }
    Ok(pairs)
}

/// Σₖ (1 − n̂_a·n̂_b) over interior edges.
pub fn loss_normal_consistency<'g>(
    vertices: Var<'g>,
    faces: &[[usize; 3]],
    pairs: &[[usize; 2]],
) -> Result<Var<'g>> {
    let g = vertices.graph();
    if pairs.is_empty() {
        return Ok(g.scalar(0.0));
    }
    let n = face_normals_var(vertices, faces)?;
    let a: Vec<usize> = pairs.iter().map(|p| p[0]).collect();
    let b: Vec<usize> = pairs.iter().map(|p| p[1]).collect();
    let cos = n.gather_rows(&a)?.dot_rows(n.gather_rows(&b)?)?;
    Ok(cos.neg().add_scalar(1.0).sum())
}

/// Σₖ (mean γ − γₖ)² over edge lengths γ.
pub fn loss_edge_length<'g>(vertices: Var<'g>, edges: &[[usize; 2]]) -> Result<Var<'g>> {
    if edges.is_empty() {
        return Err(Error::Topology(
            "edge-length loss needs at least one edge".into(),
        ));
    }
    let a: Vec<usize> = edges.iter().map(|e| e[0]).collect();
    let b: Vec<usize> = edges.iter().map(|e| e[1]).collect();
    let len = vertices
        .gather_rows(&a)?
        .sub(vertices.gather_rows(&b)?)?
        .row_norm()?;
    let mean = len.mean().expand(&[edges.len()])?;
    Ok(len.sub(mean)?.square().sum())
}

/// Bottom-up camera for the floor term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorCamera {
    /// camera distance below the ground plane
    pub distance: f64,
    pub half_width: f64,
    pub resolution: usize,
}

impl Default for FloorCamera {
    fn default() -> Self {
        Self {
            distance: 10.0,
            half_width: 4.8,
            resolution: 64,
        }
    }
}

/// Floor term and whether any pixel was covered.
pub struct FloorLoss<'g> {
    pub value: Var<'g>,
    pub covered: usize,
}

/// Rasterizes the underside from a camera `r` below z = 0 looking up and
/// averages H² = (r − Z)² over covered pixels, Z being the distance to the
/// nearest surface. Empty coverage yields 0 and a warning.
pub fn loss_floor_plane<'g>(
    vertices: Var<'g>,
    faces: &[[usize; 3]],
    cam: &FloorCamera,
) -> Result<FloorLoss<'g>> {
    let g = vertices.graph();
    if !(cam.distance > 0.0 && cam.half_width > 0.0 && cam.resolution > 0) {
        return Err(Error::Validation(format!("invalid floor camera {cam:?}")));
    }
    let s = 1.0 / cam.half_width;
    // x, y scaled to NDC; depth is the metric distance from the camera
    let ndc = vertices.linear_rows(
        &[vec![s, 0.0, 0.0], vec![0.0, s, 0.0], vec![0.0, 0.0, 1.0]],
        &[0.0, 0.0, cam.distance],
    )?;
    let cfg = RasterConfig {
        height: cam.resolution,
        width: cam.resolution,
        sigma: 0.0,
        faces_per_pixel: 1,
        ..RasterConfig::default()
    };
    let frags = rasterize(ndc, faces, &cfg)?;
    let index: Vec<Option<usize>> = frags
        .faces()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_some())
        .map(|(i, _)| Some(i))
        .collect();
    if index.is_empty() {
        log::warn!("floor loss: underside covers no pixel");
        return Ok(FloorLoss {
            value: g.scalar(0.0),
            covered: 0,
        });
    }
    let z = frags
        .depth
        .reshape(&[frags.depth.len()])?
        .take(&index, 0.0)?;
    let h = z.neg().add_scalar(cam.distance);
    Ok(FloorLoss {
        value: h.square().mean(),
        covered: index.len(),
    })
}

/// How the summed mesh regularizers are reduced before weighting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    /// plain sums over vertices, face pairs and edges
    #[default]
    Sum,
    /// sums divided by the number of terms
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub mse: f64,
    pub laplacian: f64,
    pub normal: f64,
    pub edge: f64,
    pub floor: f64,
    #[serde(default)]
    pub reduction: Reduction,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            mse: 1.0,
            laplacian: 1.5,
            normal: 0.02,
            edge: 0.03,
            floor: 0.4,
            reduction: Reduction::Sum,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.mse, self.laplacian, self.normal, self.edge, self.floor];
        if w.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::Validation(format!(
                "loss weights must be nonnegative, got {w:?}"
            )));
        }
        Ok(())
    }

    pub fn only_mse() -> Self {
        Self {
            mse: 1.0,
            laplacian: 0.0,
            normal: 0.0,
            edge: 0.0,
            floor: 0.0,
            reduction: Reduction::Sum,
        }
    }
}

/// Fixed connectivity data shared by every evaluation of the mesh terms.
#[derive(Clone, Debug)]
pub struct MeshTopology {
    pub faces: Vec<[usize; 3]>,
    pub edges: Vec<[usize; 2]>,
    pub face_pairs: Vec<[usize; 2]>,
    pub laplacian: Rc<CsrMatrix>,
}

impl MeshTopology {
    pub fn new(mesh: &TriangleMesh) -> Result<Self> {
        Ok(Self {
            faces: mesh.faces().to_vec(),
            edges: mesh.edges(),
            face_pairs: interior_face_pairs(mesh)?,
            laplacian: Rc::new(laplacian_operator(mesh)?),
        })
    }
}

/// Individual loss terms after reduction, unweighted, plus the weighted
/// total.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub mse: f64,
    pub laplacian: f64,
    pub normal: f64,
    pub edge: f64,
    pub floor: f64,
    pub total: f64,
}

impl LossTerms {
    pub const CSV_HEADER: &'static str = "iter,mse,laplacian,normal,edge,floor,total";

    pub fn csv_row(&self, iter: usize) -> String {
        format!(
            "{iter},{},{},{},{},{},{}",
            self.mse, self.laplacian, self.normal, self.edge, self.floor, self.total
        )
    }
}

/// Weighted sum of the image term and the four mesh regularizers. `mse`
/// is the already computed image term.
pub fn loss_total<'g>(
    mse: Var<'g>,
    vertices: Var<'g>,
    topo: &MeshTopology,
    weights: &LossWeights,
    floor: &FloorCamera,
) -> Result<(Var<'g>, LossTerms)> {
    weights.validate()?;
    let per = |n: usize| match weights.reduction {
        Reduction::Sum => 1.0,
        Reduction::Mean => 1.0 / n.max(1) as f64,
    };
    let lap = loss_laplacian(vertices, &topo.laplacian)?.scale(per(topo.laplacian.rows));
    let nc = loss_normal_consistency(vertices, &topo.faces, &topo.face_pairs)?
        .scale(per(topo.face_pairs.len()));
    let el = loss_edge_length(vertices, &topo.edges)?.scale(per(topo.edges.len()));
    let fl = loss_floor_plane(vertices, &topo.faces, floor)?.value;
    let total = mse
        .scale(weights.mse)
        .add(lap.scale(weights.laplacian))?
        .add(nc.scale(weights.normal))?
        .add(el.scale(weights.edge))?
        .add(fl.scale(weights.floor))?;
    let terms = LossTerms {
        mse: mse.item(),
        laplacian: lap.item(),
        normal: nc.item(),
        edge: el.item(),
        floor: fl.item(),
        total: total.item(),
    };
    Ok((total, terms))
}

/// Convenience wrapper for tests and one-off evaluations.
pub fn mesh_vertices<'g>(g: &'g crate::autodiff::Graph, mesh: &TriangleMesh) -> Var<'g> {
    g.param(Tensor::from_points(mesh.vertices()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{check_gradient, Graph};
    use crate::geometry::{icosahedron, icosphere, make_box, unit_cube};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lap(mesh: &TriangleMesh) -> f64 {
        let g = Graph::new();
        let op = Rc::new(laplacian_operator(mesh).unwrap());
        loss_laplacian(mesh_vertices(&g, mesh), &op).unwrap().item()
    }

    fn normal(mesh: &TriangleMesh) -> f64 {
        let g = Graph::new();
        let pairs = interior_face_pairs(mesh).unwrap();
        loss_normal_consistency(mesh_vertices(&g, mesh), mesh.faces(), &pairs)
            .unwrap()
            .item()
    }

    fn edge(mesh: &TriangleMesh) -> f64 {
        let g = Graph::new();
        loss_edge_length(mesh_vertices(&g, mesh), &mesh.edges())
            .unwrap()
            .item()
    }

    fn floor(mesh: &TriangleMesh) -> f64 {
        let g = Graph::new();
        loss_floor_plane(
            mesh_vertices(&g, mesh),
            mesh.faces(),
            &FloorCamera::default(),
        )
        .unwrap()
        .value
        .item()
    }

    fn image<'g>(g: &'g Graph, v: &[f64]) -> Var<'g> {
        g.constant(Tensor::vector(v.to_vec()))
    }

    #[test]
    fn mse_cases() {
        let g = Graph::new();
        let a = image(&g, &[0.1, 0.5, 0.9, 0.3]);
        assert_eq!(loss_mse(a, a).unwrap().item(), 0.0);
        let b = image(&g, &[0.35, 0.75, 1.15, 0.55]);
        assert!((loss_mse(a, b).unwrap().item() - 0.0625).abs() < 1e-15);
        assert!(matches!(
            loss_mse(a, image(&g, &[0.0; 3])),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn mse_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (h, w) = (7, 9);
        let p: Vec<f64> = (0..h * w).map(|_| rng.random()).collect();
        let l: Vec<f64> = (0..h * w).map(|_| rng.random()).collect();
        let mut acc = 0.0;
        for r in 0..h {
            for c in 0..w {
                acc += (p[r * w + c] - l[r * w + c]).powi(2);
            }
        }
        let g = Graph::new();
        let got = loss_mse(image(&g, &p), image(&g, &l)).unwrap().item();
        assert!((got - acc / (h * w) as f64).abs() < 1e-12);
    }

    fn hex_patch() -> TriangleMesh {
        let mut v = vec![[0.0, 0.0, 0.0]];
        for k in 0..6 {
            let a = k as f64 * std::f64::consts::FRAC_PI_3;
            v.push([a.cos(), a.sin(), 0.0]);
        }
        let f = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();
        TriangleMesh::new(v, f).unwrap()
    }

    #[test]
    fn laplacian_center_of_hex_is_zero() {
        let m = hex_patch();
        let g = Graph::new();
        let op = Rc::new(laplacian_operator(&m).unwrap());
        let rows = mesh_vertices(&g, &m)
            .sparse_matmul(op)
            .unwrap()
            .row_norm()
            .unwrap();
        assert!(rows.value().data()[0].abs() < 1e-15);
    }

    #[test]
    fn laplacian_of_regular_tetrahedron() {
        let a = 1.7;
        let s = a / 8f64.sqrt();
        let v = vec![[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]];
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]).unwrap();
        let expect = 4.0 * a * (2.0f64 / 3.0).sqrt();
        assert!((lap(&m) - expect).abs() < 1e-12, "{} vs {expect}", lap(&m));
    }

    #[test]
    fn isolated_vertex_is_a_topology_error() {
        let m = TriangleMesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [5.0; 3]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(laplacian_operator(&m), Err(Error::Topology(_))));
    }

    #[test]
    fn normal_consistency_cases() {
        let flat = TriangleMesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [1.0, 1.0, 0.0],
                [0.0, 1.0, 0.0],
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        assert!(normal(&flat).abs() < 1e-15);
        let hinge = TriangleMesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
            vec![[0, 1, 2], [0, 3, 1]],
        )
        .unwrap();
        assert!((normal(&hinge) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normal_consistency_of_cube_matches_enumeration() {
        let m = unit_cube();
        let n = m.face_normals().unwrap();
        let mut brute = 0.0;
        let mut count = 0;
        for e in m.edge_info() {
            assert_eq!(e.faces.len(), 2);
            let (a, b) = (n[e.faces[0]], n[e.faces[1]]);
            brute += 1.0 - (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]);
            count += 1;
        }
        assert_eq!(count, 18);
        assert!((normal(&m) - brute).abs() < 1e-12);
        // 12 right-angle hinges, 6 flat diagonals
        assert!((brute - 12.0).abs() < 1e-12);
    }

    #[test]
    fn nonmanifold_edge_rejected() {
        let m = TriangleMesh::new(
            vec![
                [0.0; 3],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, -1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
            vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]],
        )
        .unwrap();
        assert!(matches!(interior_face_pairs(&m), Err(Error::Topology(_))));
    }

    #[test]
    fn edge_length_cases() {
        assert!(edge(&icosahedron(1.3)) < 1e-18);
        let two =
            TriangleMesh::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 3.0, 0.0]], vec![]).unwrap();
        let g = Graph::new();
        let got = loss_edge_length(mesh_vertices(&g, &two), &[[0, 1], [0, 2]])
            .unwrap()
            .item();
        assert!((got - 2.0).abs() < 1e-15);
    }

    #[test]
    fn edge_length_is_variance_times_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let base = icosphere(1.0, 1).unwrap();
        let v = base
            .vertices()
            .iter()
            .map(|p| p.map(|c| c + rng.random_range(-0.2..0.2)))
            .collect();
        let m = base.with_vertices(v).unwrap();
        let lens: Vec<f64> = m
            .edges()
            .iter()
            .map(|&[a, b]| {
                let (p, q) = (m.vertices()[a], m.vertices()[b]);
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
            })
            .collect();
        let n = lens.len() as f64;
        let mean = lens.iter().sum::<f64>() / n;
        let var = lens.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
        assert!((edge(&m) - var * n).abs() < 1e-12);
    }

    #[test]
    fn floor_cases() {
        let grounded = make_box([-1.0, -1.0, 0.0], [1.0, 1.0, 1.0]).unwrap();
        assert!(floor(&grounded).abs() < 1e-20);
        let hover = make_box([-1.0, -1.0, 0.7], [1.0, 1.0, 1.5]).unwrap();
        assert!((floor(&hover) - 0.49).abs() < 1e-12);
        // underside rising linearly from 0 to h across x
        let h = 0.9;
        let wedge = TriangleMesh::new(
            vec![
                [-2.0, -2.0, 0.0],
                [2.0, -2.0, h],
                [2.0, 2.0, h],
                [-2.0, 2.0, 0.0],
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let got = floor(&wedge);
        assert!((got - h * h / 3.0).abs() < 0.01 * h * h, "{got}");
    }

    #[test]
    fn floor_with_no_coverage_is_zero() {
        let far = make_box([50.0, 50.0, 0.5], [51.0, 51.0, 1.0]).unwrap();
        let g = Graph::new();
        let f = loss_floor_plane(
            mesh_vertices(&g, &far),
            far.faces(),
            &FloorCamera::default(),
        )
        .unwrap();
        assert_eq!((f.value.item(), f.covered), (0.0, 0));
    }

    fn jittered(seed: u64) -> TriangleMesh {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = icosphere(1.0, 1).unwrap().translated([0.0, 0.0, 0.6]);
        let v = base
            .vertices()
            .iter()
            .map(|p| p.map(|c| c + rng.random_range(-0.1..0.1)))
            .collect();
        base.with_vertices(v).unwrap()
    }

    #[test]
    fn total_recomposes_terms() {
        let m = jittered(3);
        let topo = MeshTopology::new(&m).unwrap();
        let w = LossWeights::default();
        let g = Graph::new();
        let v = mesh_vertices(&g, &m);
        let mse = g.scalar(0.037);
        let (total, t) = loss_total(mse, v, &topo, &w, &FloorCamera::default()).unwrap();
        let manual = 0.037 + 1.5 * lap(&m) + 0.02 * normal(&m) + 0.03 * edge(&m) + 0.4 * floor(&m);
        assert!((total.item() - manual).abs() < 1e-12);
        assert_eq!(t.total, total.item());
        let (only, _) = loss_total(
            mse,
            v,
            &topo,
            &LossWeights::only_mse(),
            &FloorCamera::default(),
        )
        .unwrap();
        assert_eq!(only.item(), 0.037);
        let mean = LossWeights {
            reduction: Reduction::Mean,
            ..w
        };
        let (_, tm) = loss_total(mse, v, &topo, &mean, &FloorCamera::default()).unwrap();
        assert!((tm.laplacian - lap(&m) / m.num_vertices() as f64).abs() < 1e-12);
        assert!((tm.normal - normal(&m) / topo.face_pairs.len() as f64).abs() < 1e-12);
        assert!((tm.edge - edge(&m) / topo.edges.len() as f64).abs() < 1e-12);
        assert_eq!(tm.floor, t.floor);
    }

    #[test]
    fn total_gradient_matches_finite_differences() {
        let m = jittered(8);
        let topo = MeshTopology::new(&m).unwrap();
        let r = check_gradient(
            |_, v| {
                let mse = v.sin().mean();
                Ok(loss_total(
                    mse,
                    v,
                    &topo,
                    &LossWeights::default(),
                    &FloorCamera::default(),
                )?
                .0)
            },
            &Tensor::from_points(m.vertices()),
            1e-6,
        )
        .unwrap();
        assert!(r.max_rel_error <= 1e-2, "{r:?}");
    }

    #[test]
    fn floor_reaches_occluded_underside() {
        let m = jittered(5);
        let g = Graph::new();
        let v = mesh_vertices(&g, &m);
        let topo = MeshTopology::new(&m).unwrap();
        let (total, _) = loss_total(
            g.scalar(0.0),
            v,
            &topo,
            &LossWeights::default(),
            &FloorCamera::default(),
        )
        .unwrap();
        let grad = total.backward().unwrap().get_or_zeros(v);
        let lowest = (0..m.num_vertices())
            .min_by(|&a, &b| m.vertices()[a][2].total_cmp(&m.vertices()[b][2]))
            .unwrap();
        assert!(grad.data()[3 * lowest + 2].abs() > 0.0);
        assert!(grad.data().chunks(3).all(|c| c.iter().any(|x| *x != 0.0)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn regularizers_translation_invariant(seed in 0u64..1000, tx in -2.0f64..2.0, ty in -2.0f64..2.0, tz in 0.0f64..1.0) {
            let m = jittered(seed);
            let moved = m.translated([tx, ty, 0.0]);
            prop_assert!((lap(&m) - lap(&moved)).abs() < 1e-9);
            prop_assert!((normal(&m) - normal(&moved)).abs() < 1e-9);
            prop_assert!((edge(&m) - edge(&moved)).abs() < 1e-9);
            let lifted = m.translated([0.0, 0.0, tz]);
            prop_assert!((lap(&m) - lap(&lifted)).abs() < 1e-9);
        }

        #[test]
        fn regularizer_scaling(seed in 0u64..1000, s in 0.3f64..3.0) {
            let m = jittered(seed);
            let scaled = m.with_vertices(m.vertices().iter().map(|p| p.map(|c| c * s)).collect()).unwrap();
            prop_assert!((lap(&scaled) - s * lap(&m)).abs() < 1e-9 * s.max(1.0));
            prop_assert!((edge(&scaled) - s * s * edge(&m)).abs() < 1e-9 * (s * s).max(1.0));
            prop_assert!((normal(&scaled) - normal(&m)).abs() < 1e-9);
        }

        #[test]
        fn laplacian_and_normal_rotation_invariant(seed in 0u64..1000, a in 0.0..std::f64::consts::TAU) {
            let m = jittered(seed);
            let (c, s) = (a.cos(), a.sin());
            let rot = m.with_vertices(m.vertices().iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]).collect()).unwrap();
            prop_assert!((lap(&m) - lap(&rot)).abs() < 1e-9);
            prop_assert!((normal(&m) - normal(&rot)).abs() < 1e-9);
        }
    }
}
