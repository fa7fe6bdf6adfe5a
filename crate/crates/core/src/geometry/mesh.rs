use std::collections::BTreeMap;

use crate::autodiff::{Tensor, Var};
use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

/// Indexed triangle mesh in world coordinates (meters, z up, ground at z=0).
///
/// Faces wind counter-clockwise when seen from outside.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
}

/// Undirected edge with its incident faces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeInfo {
    pub vertices: [usize; 2],
    pub faces: Vec<usize>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= n) {
                return Err(Error::Validation(format!(
                    "face {fi} references vertex {bad}, but the mesh has {n} vertices"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Validation(format!(
                    "face {fi} repeats a vertex index: {f:?}"
                )));
            }
        }
        if let Some(v) = vertices
            .iter()
            .position(|p| p.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::Validation(format!("vertex {v} is not finite")));
        }
        Ok(Self { vertices, faces })
    }

    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            faces: Vec::new(),
        }
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Replaces vertex positions, keeping the connectivity.
    pub fn with_vertices(&self, vertices: Vec<Point3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Shape(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Self::new(vertices, self.faces.clone())
    }

    pub fn vertex_tensor(&self) -> Tensor {
        Tensor::from_points(&self.vertices)
    }

    pub fn translated(&self, t: Point3) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|v| [v[0] + t[0], v[1] + t[1], v[2] + t[2]])
                .collect(),
            faces: self.faces.clone(),
        }
    }

    /// Unique undirected edges as sorted `(min, max)` pairs, in ascending order.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        self.edge_map().into_keys().map(|(a, b)| [a, b]).collect()
    }

    /// Edges together with the faces that use them, in ascending edge order.
    pub fn edge_info(&self) -> Vec<EdgeInfo> {
        self.edge_map()
            .into_iter()
            .map(|((a, b), faces)| EdgeInfo {
                vertices: [a, b],
                faces,
            })
            .collect()
    }

    fn edge_map(&self) -> BTreeMap<(usize, usize), Vec<usize>> {
        let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                map.entry((a.min(b), a.max(b))).or_default().push(fi);
            }
        }
        map
    }

    /// Fails unless every edge is shared by exactly two faces.
    pub fn require_closed_manifold(&self) -> Result<()> {
        for e in self.edge_info() {
            if e.faces.len() != 2 {
                return Err(Error::Topology(format!(
                    "edge {:?} is shared by {} face(s); a closed manifold needs 2",
                    e.vertices,
                    e.faces.len()
                )));
            }
        }
        Ok(())
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.faces.len() as i64
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.faces[face].map(|i| self.vertices[i]);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Axis-aligned bounds `(min, max)`; `None` for a mesh without vertices.
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (
                [lo[0].min(v[0]), lo[1].min(v[1]), lo[2].min(v[2])],
                [hi[0].max(v[0]), hi[1].max(v[1]), hi[2].max(v[2])],
            )
        }))
    }

    /// Unit outward normals, (v1−v0)×(v2−v0) normalized.
    pub fn face_normals(&self) -> Result<Vec<Point3>> {
        self.faces
            .iter()
            .enumerate()
            .map(|(fi, f)| {
                let [a, b, c] = f.map(|i| self.vertices[i]);
                let n = cross(sub(b, a), sub(c, a));
                let len = norm(n);
                let scale = a
                    .iter()
                    .chain(&b)
                    .chain(&c)
                    .fold(0.0f64, |m, v| m.max(v.abs()));
                if len <= 1e-14 * scale.max(1.0).powi(2) {
                    return Err(Error::DegenerateFace(fi));
                }
                Ok([n[0] / len, n[1] / len, n[2] / len])
            })
            .collect()
    }

    /// Sorted neighbor lists from the edge set.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.vertices.len()];
        for [a, b] in self.edges() {
            nb[a].push(b);
            nb[b].push(a);
        }
        nb.iter_mut().for_each(|l| l.sort_unstable());
        nb
    }
}

/// Differentiable unit face normals from an N×3 vertex tensor.
pub fn face_normals_var<'g>(vertices: Var<'g>, faces: &[[usize; 3]]) -> Result<Var<'g>> {
    let (i0, i1, i2): (Vec<usize>, Vec<usize>, Vec<usize>) = (
        faces.iter().map(|f| f[0]).collect(),
        faces.iter().map(|f| f[1]).collect(),
        faces.iter().map(|f| f[2]).collect(),
    );
    let v0 = vertices.gather_rows(&i0)?;
    let e1 = vertices.gather_rows(&i1)?.sub(v0)?;
    let e2 = vertices.gather_rows(&i2)?.sub(v0)?;
    e1.cross_rows(e2)?.normalize_rows()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::unit_cube;

    fn brute_force_edge_count(m: &TriangleMesh) -> usize {
        let n = m.num_vertices();
        let mut count = 0;
        for a in 0..n {
            for b in a + 1..n {
                let used = m.faces().iter().any(|f| {
                    (0..3).any(|k| {
                        let (p, q) = (f[k], f[(k + 1) % 3]);
                        (p == a && q == b) || (p == b && q == a)
                    })
                });
                count += used as usize;
            }
        }
        count
    }

    #[test]
    fn rejects_bad_faces() {
        let v = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert!(matches!(
            TriangleMesh::new(v.clone(), vec![[0, 1, 3]]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            TriangleMesh::new(v, vec![[0, 1, 1]]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn cube_edges_match_enumeration() {
        let cube = unit_cube();
        let e = cube.edges();
        assert_eq!(e.len(), brute_force_edge_count(&cube));
        assert_eq!(e.len(), 18);
        assert_eq!(cube.euler_characteristic(), 2);
        let mut dedup = e.clone();
        dedup.dedup();
        assert_eq!(dedup, e);
    }

    #[test]
    fn normals_of_axis_triangle() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let up = TriangleMesh::new(v.clone(), vec![[0, 1, 2]]).unwrap();
        assert_eq!(up.face_normals().unwrap()[0], [0.0, 0.0, 1.0]);
        let down = TriangleMesh::new(v, vec![[0, 2, 1]]).unwrap();
        assert_eq!(down.face_normals().unwrap()[0], [0.0, 0.0, -1.0]);
    }

    #[test]
    fn degenerate_face_is_named() {
        let v = vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let m = TriangleMesh::new(v, vec![[0, 1, 3], [0, 1, 2]]).unwrap();
        assert!(matches!(m.face_normals(), Err(Error::DegenerateFace(1))));
    }

    #[test]
    fn open_triangle_is_not_closed() {
        let v = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let m = TriangleMesh::new(v, vec![[0, 1, 2]]).unwrap();
        assert!(matches!(
            m.require_closed_manifold(),
            Err(Error::Topology(_))
        ));
    }

    #[test]
    fn normal_var_matches_plain_normals() {
        let cube = unit_cube();
        let g = crate::autodiff::Graph::new();
        let v = g.constant(cube.vertex_tensor());
        let n = face_normals_var(v, cube.faces()).unwrap().value();
        for (a, b) in n.to_points().iter().zip(cube.face_normals().unwrap()) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-15);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn random_normals_are_orthogonal_unit(
                p in proptest::array::uniform9(-5.0f64..5.0)
            ) {
                let v = vec![[p[0], p[1], p[2]], [p[3], p[4], p[5]], [p[6], p[7], p[8]]];
                let m = TriangleMesh::new(v.clone(), vec![[0, 1, 2]]).unwrap();
                prop_assume!(m.face_area(0) > 1e-3);
                let n = m.face_normals().unwrap()[0];
                prop_assert!((norm(n) - 1.0).abs() < 1e-9);
                prop_assert!(dot(n, sub(v[1], v[0])).abs() < 1e-9);
                prop_assert!(dot(n, sub(v[2], v[0])).abs() < 1e-9);
            }
        }
    }
}
