//! Mesh constructors: icosahedron family, boxes, plates, and midpoint
//! subdivision.

use std::collections::BTreeMap;

use super::{Point3, TriangleMesh};
use crate::error::{Error, Result};

const ICOSA_FACES: [[usize; 3]; 20] = [
    [0, 11, 5],
    [0, 5, 1],
    [0, 1, 7],
    [0, 7, 10],
    [0, 10, 11],
    [1, 5, 9],
    [5, 11, 4],
    [11, 10, 2],
    [10, 7, 6],
    [7, 1, 8],
    [3, 9, 4],
    [3, 4, 2],
    [3, 2, 6],
    [3, 6, 8],
    [3, 8, 9],
    [4, 9, 5],
    [2, 4, 11],
    [6, 2, 10],
    [8, 6, 7],
    [9, 8, 1],
];

/// Regular icosahedron inscribed in a sphere of `radius` about the origin.
pub fn icosahedron(radius: f64) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let vertices = raw.iter().map(|&p| project(p, radius)).collect();
    TriangleMesh::new(vertices, ICOSA_FACES.to_vec()).expect("static icosahedron is valid")
}

fn project(p: Point3, radius: f64) -> Point3 {
    let len = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [
        p[0] * radius / len,
        p[1] * radius / len,
        p[2] * radius / len,
    ]
}

/// Icosphere about the origin after `levels` rounds of midpoint splitting
/// with reprojection onto the sphere.
pub fn icosphere(radius: f64, levels: usize) -> Result<TriangleMesh> {
    if !(radius > 0.0) {
        return Err(Error::Validation(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let mut mesh = icosahedron(radius);
    for _ in 0..levels {
        let split = split_edges(&mesh)?;
        let vertices = split
            .vertices()
            .iter()
            .map(|&p| project(p, radius))
            .collect();
        mesh = split.with_vertices(vertices)?;
    }
    Ok(mesh)
}

/// Initial reconstruction surface: a level-1 icosphere (42 vertices, 80
/// faces) resting on the ground plane with its lowest vertex at z = 0.
pub fn make_dome(radius: f64) -> Result<TriangleMesh> {
    let sphere = icosphere(radius, 1)?;
    let min_z = sphere
        .vertices()
        .iter()
        .map(|v| v[2])
        .fold(f64::INFINITY, f64::min);
    let mut grounded = sphere.translated([0.0, 0.0, -min_z]);
    // pin the lowest vertices exactly to the ground
    let vertices = grounded
        .vertices()
        .iter()
        .map(|v| {
            if v[2].abs() < 1e-12 {
                [v[0], v[1], 0.0]
            } else {
                *v
            }
        })
        .collect();
    grounded = grounded.with_vertices(vertices)?;
    Ok(grounded)
}

/// Splits every face into four by inserting the exact midpoint of each
/// edge. Vertices keep their positions, so the surface is unchanged.
///
/// Requires a closed two-manifold; new vertices follow the original ones in
/// ascending edge order.
pub fn subdivide_midpoint(mesh: &TriangleMesh) -> Result<TriangleMesh> {
    mesh.require_closed_manifold()?;
    split_edges(mesh)
}

fn split_edges(mesh: &TriangleMesh) -> Result<TriangleMesh> {
    let v = mesh.vertices();
    let mut vertices = v.to_vec();
    let mut mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for [a, b] in mesh.edges() {
        mid.insert((a, b), vertices.len());
        vertices.push([
            0.5 * (v[a][0] + v[b][0]),
            0.5 * (v[a][1] + v[b][1]),
            0.5 * (v[a][2] + v[b][2]),
        ]);
    }
    let m = |a: usize, b: usize| mid[&(a.min(b), a.max(b))];
    let mut faces = Vec::with_capacity(mesh.num_faces() * 4);
    for &[a, b, c] in mesh.faces() {
        let (ab, bc, ca) = (m(a, b), m(b, c), m(c, a));
        faces.push([a, ab, ca]);
        faces.push([ab, b, bc]);
        faces.push([ca, bc, c]);
        faces.push([ab, bc, ca]);
    }
    TriangleMesh::new(vertices, faces)
}

/// Closed axis-aligned box spanning `lo`..`hi` with outward winding.
pub fn make_box(lo: Point3, hi: Point3) -> Result<TriangleMesh> {
    if (0..3).any(|k| !(hi[k] > lo[k])) {
        return Err(Error::Validation(format!(
            "box needs hi > lo, got {lo:?}..{hi:?}"
        )));
    }
    let vertices = (0..8)
        .map(|i| {
            [
                if i & 1 == 0 { lo[0] } else { hi[0] },
                if i & 2 == 0 { lo[1] } else { hi[1] },
                if i & 4 == 0 { lo[2] } else { hi[2] },
            ]
        })
        .collect();
    let faces = vec![
        [0, 2, 3],
        [0, 3, 1],
        [4, 5, 7],
        [4, 7, 6],
        [0, 1, 5],
        [0, 5, 4],
        [2, 6, 7],
        [2, 7, 3],
        [0, 4, 6],
        [0, 6, 2],
        [1, 3, 7],
        [1, 7, 5],
    ];
    TriangleMesh::new(vertices, faces)
}

pub fn unit_cube() -> TriangleMesh {
    make_box([0.0; 3], [1.0; 3]).expect("unit cube is valid")
}

/// Box of the given size standing on the ground, centered on the z axis.
pub fn make_cuboid(size: Point3) -> Result<TriangleMesh> {
    make_box(
        [-size[0] / 2.0, -size[1] / 2.0, 0.0],
        [size[0] / 2.0, size[1] / 2.0, size[2]],
    )
}

/// Open, upward-facing square plate at height `z`, split into
/// `cells`×`cells` quads of two triangles each.
pub fn make_plate(half_size: f64, cells: usize, z: f64) -> Result<TriangleMesh> {
    if cells == 0 || !(half_size > 0.0) {
        return Err(Error::Validation(
            "plate needs cells > 0 and half_size > 0".into(),
        ));
    }
    let n = cells + 1;
    let step = 2.0 * half_size / cells as f64;
    let mut vertices = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            vertices.push([
                -half_size + i as f64 * step,
                -half_size + j as f64 * step,
                z,
            ]);
        }
    }
    let mut faces = Vec::with_capacity(2 * cells * cells);
    for j in 0..cells {
        for i in 0..cells {
            let a = j * n + i;
            faces.push([a, a + 1, a + n + 1]);
            faces.push([a, a + n + 1, a + n]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Concatenates meshes into one, offsetting face indices.
pub fn merge(meshes: &[&TriangleMesh]) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for m in meshes {
        let off = vertices.len();
        vertices.extend_from_slice(m.vertices());
        faces.extend(m.faces().iter().map(|f| f.map(|i| i + off)));
    }
    TriangleMesh::new(vertices, faces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::{dot, norm, sub};

    fn assert_outward(m: &TriangleMesh) {
        let c = m.vertices().iter().fold([0.0; 3], |acc, v| {
            [acc[0] + v[0], acc[1] + v[1], acc[2] + v[2]]
        });
        let c = c.map(|x| x / m.num_vertices() as f64);
        for (fi, (f, n)) in m.faces().iter().zip(m.face_normals().unwrap()).enumerate() {
            let fc = f
                .iter()
                .fold([0.0; 3], |acc, &i| {
                    let v = m.vertices()[i];
                    [acc[0] + v[0], acc[1] + v[1], acc[2] + v[2]]
                })
                .map(|x| x / 3.0);
            assert!(dot(n, sub(fc, c)) > 0.0, "face {fi} points inward");
        }
    }

    #[test]
    fn icosahedron_is_closed_and_outward() {
        let m = icosahedron(1.0);
        assert_eq!(
            (m.num_vertices(), m.num_faces(), m.edges().len()),
            (12, 20, 30)
        );
        m.require_closed_manifold().unwrap();
        assert_outward(&m);
    }

    #[test]
    fn dome_counts() {
        let d = make_dome(2.0).unwrap();
        assert_eq!(d.num_vertices(), 42);
        assert_eq!(d.num_faces(), 80);
        assert_eq!(d.edges().len(), 120);
        assert_eq!(d.euler_characteristic(), 2);
        assert_outward(&d);
    }

    #[test]
    fn dome_is_grounded() {
        let d = make_dome(2.0).unwrap();
        let min_z = d
            .vertices()
            .iter()
            .map(|v| v[2])
            .fold(f64::INFINITY, f64::min);
        assert_eq!(min_z, 0.0);
    }

    #[test]
    fn dome_vertices_on_sphere() {
        let d = make_dome(1.0).unwrap();
        let s = icosphere(1.0, 1).unwrap();
        let shift = d.vertices()[0][2] - s.vertices()[0][2];
        for v in d.vertices() {
            let r = norm([v[0], v[1], v[2] - shift]);
            assert!((r - 1.0).abs() <= 1e-9, "{r}");
        }
    }

    #[test]
    fn dome_rejects_nonpositive_radius() {
        assert!(matches!(make_dome(0.0), Err(Error::Validation(_))));
        assert!(matches!(make_dome(-1.0), Err(Error::Validation(_))));
    }

    #[test]
    fn subdivided_dome_counts() {
        let d = subdivide_midpoint(&make_dome(2.0).unwrap()).unwrap();
        assert_eq!((d.num_vertices(), d.num_faces()), (162, 320));
        assert_eq!(d.euler_characteristic(), 2);
    }

    #[test]
    fn subdivided_cube_counts() {
        let c = unit_cube();
        let (v, e, f) = (c.num_vertices(), c.edges().len(), c.num_faces());
        let s = subdivide_midpoint(&c).unwrap();
        assert_eq!(s.num_vertices(), v + e);
        assert_eq!(s.num_faces(), 4 * f);
        assert_eq!((s.num_vertices(), s.num_faces()), (26, 48));
    }

    #[test]
    fn subdivision_rejects_open_mesh() {
        let m = TriangleMesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(subdivide_midpoint(&m), Err(Error::Topology(_))));
    }

    #[test]
    fn subdivision_keeps_midpoints_and_area() {
        let d = make_dome(1.5).unwrap();
        let s = subdivide_midpoint(&d).unwrap();
        assert_eq!(&s.vertices()[..42], d.vertices());
        for (k, [a, b]) in d.edges().into_iter().enumerate() {
            let m = s.vertices()[42 + k];
            let (pa, pb) = (d.vertices()[a], d.vertices()[b]);
            assert_eq!(m, [0, 1, 2].map(|c| 0.5 * (pa[c] + pb[c])));
        }
        assert!((s.surface_area() - d.surface_area()).abs() < 1e-12 * d.surface_area());
        assert_outward(&s);
    }

    #[test]
    fn box_is_closed_and_outward() {
        let b = make_cuboid([2.0, 3.0, 1.0]).unwrap();
        b.require_closed_manifold().unwrap();
        assert_outward(&b);
        assert!((b.surface_area() - 2.0 * (6.0 + 2.0 + 3.0)).abs() < 1e-12);
    }

    #[test]
    fn plate_faces_up() {
        let p = make_plate(1.0, 3, 0.0).unwrap();
        assert_eq!(p.num_faces(), 18);
        for n in p.face_normals().unwrap() {
            assert_eq!(n, [0.0, 0.0, 1.0]);
        }
    }
}
