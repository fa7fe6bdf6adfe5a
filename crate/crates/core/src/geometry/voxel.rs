//! Occupancy voxelization of closed meshes by ray parity.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Point3, TriangleMesh};
use crate::error::{Error, Result};

/// Regular grid placement: `origin` is the minimum corner of voxel (0,0,0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub origin: Point3,
    pub spacing: f64,
    pub dims: [usize; 3],
}

impl GridSpec {
    pub fn new(origin: Point3, spacing: f64, dims: [usize; 3]) -> Result<Self> {
        if !(spacing > 0.0) || dims.contains(&0) {
            return Err(Error::Validation(format!(
                "grid needs spacing > 0 and nonzero dims, got {spacing} and {dims:?}"
            )));
        }
        Ok(Self {
            origin,
            spacing,
            dims,
        })
    }

    /// Cubic-voxel grid of `resolution`³ cells centered on the union of the
    /// meshes' bounding boxes, with the longest side padded by `pad` (0.1 =
    /// 10%).
    pub fn covering(meshes: &[&TriangleMesh], resolution: usize, pad: f64) -> Result<Self> {
        let mut bounds: Option<(Point3, Point3)> = None;
        for m in meshes {
            if let Some((lo, hi)) = m.bounds() {
                bounds = Some(match bounds {
                    None => (lo, hi),
                    Some((a, b)) => (
                        [a[0].min(lo[0]), a[1].min(lo[1]), a[2].min(lo[2])],
                        [b[0].max(hi[0]), b[1].max(hi[1]), b[2].max(hi[2])],
                    ),
                });
            }
        }
        let (lo, hi) = bounds.ok_or_else(|| Error::Validation("no vertices to cover".into()))?;
        let extent = (0..3)
            .map(|k| hi[k] - lo[k])
            .fold(0.0f64, f64::max)
            .max(1e-9);
        let side = extent * (1.0 + pad);
        let spacing = side / resolution as f64;
        let origin = [0, 1, 2].map(|k| 0.5 * (lo[k] + hi[k]) - 0.5 * side);
        Self::new(origin, spacing, [resolution; 3])
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Point3 {
        [
            self.origin[0] + (i as f64 + 0.5) * self.spacing,
            self.origin[1] + (j as f64 + 0.5) * self.spacing,
            self.origin[2] + (k as f64 + 0.5) * self.spacing,
        ]
    }
}

/// Boolean occupancy grid, x fastest then y then z.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    pub spec: GridSpec,
    occupancy: Vec<bool>,
}

impl VoxelGrid {
    pub fn new(spec: GridSpec, occupancy: Vec<bool>) -> Result<Self> {
        if occupancy.len() != spec.len() {
            return Err(Error::Shape(format!(
                "grid {:?} needs {} voxels, got {}",
                spec.dims,
                spec.len(),
                occupancy.len()
            )));
        }
        Ok(Self { spec, occupancy })
    }

    pub fn empty(spec: GridSpec) -> Self {
        Self {
            occupancy: vec![false; spec.len()],
            spec,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.spec.dims
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.spec.dims;
        i + nx * (j + ny * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.occupancy[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: bool) {
        let idx = self.index(i, j, k);
        self.occupancy[idx] = v;
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn count(&self) -> usize {
        self.occupancy.iter().filter(|&&v| v).count()
    }

    pub fn volume(&self) -> f64 {
        self.count() as f64 * self.spec.spacing.powi(3)
    }

    /// Writes `VOX nx ny nz ox oy oz spacing\n` followed by one 0/1 byte per
    /// voxel, x fastest.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let [nx, ny, nz] = self.spec.dims;
        let [ox, oy, oz] = self.spec.origin;
        writeln!(
            out,
            "VOX {nx} {ny} {nz} {ox} {oy} {oz} {}",
            self.spec.spacing
        )?;
        let bytes: Vec<u8> = self.occupancy.iter().map(|&v| v as u8).collect();
        out.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut all = Vec::new();
        input.read_to_end(&mut all)?;
        let nl = all
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Parse {
                line: 1,
                msg: "missing VOX header".into(),
            })?;
        let header = std::str::from_utf8(&all[..nl]).map_err(|_| Error::Parse {
            line: 1,
            msg: "header is not UTF-8".into(),
        })?;
        let f: Vec<&str> = header.split_whitespace().collect();
        let bad = || Error::Parse {
            line: 1,
            msg: format!("bad VOX header {header:?}"),
        };
        if f.len() != 8 || f[0] != "VOX" {
            return Err(bad());
        }
        let dims = [1, 2, 3].map(|i| f[i].parse::<usize>());
        let flt = [4, 5, 6, 7].map(|i| f[i].parse::<f64>());
        let (Ok(nx), Ok(ny), Ok(nz)) = (&dims[0], &dims[1], &dims[2]) else {
            return Err(bad());
        };
        let [Ok(ox), Ok(oy), Ok(oz), Ok(sp)] = flt else {
            return Err(bad());
        };
        let spec = GridSpec::new([ox, oy, oz], sp, [*nx, *ny, *nz])?;
        let body = &all[nl + 1..];
        if body.len() != spec.len() {
            return Err(Error::Shape(format!(
                "VOX body has {} bytes, expected {}",
                body.len(),
                spec.len()
            )));
        }
        let occupancy = body
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Parse {
                    line: 2,
                    msg: format!("voxel byte {other}"),
                }),
            })
            .collect::<Result<_>>()?;
        Self::new(spec, occupancy)
    }
}

/// Seed for the ray jitter used to resolve rays through edges or vertices.
const JITTER_SEED: u64 = 0x5eed_7ac3;
const MAX_JITTER_ATTEMPTS: usize = 64;

/// Marks voxels whose centers lie inside a closed mesh.
///
/// One ray per (y, z) voxel row is cast along +x; a center is inside when an
/// odd number of surface crossings lie beyond it. Rows whose ray passes
/// exactly through an edge or vertex are re-cast with the origin jittered by
/// 1e-7·spacing, deterministically.
pub fn voxelize(mesh: &TriangleMesh, spec: &GridSpec) -> Result<VoxelGrid> {
    mesh.require_closed_manifold()?;
    let [nx, ny, nz] = spec.dims;
    // grid-local coordinates keep results independent of a common translation
    let local: Vec<Point3> = mesh
        .vertices()
        .iter()
        .map(|v| {
            [
                v[0] - spec.origin[0],
                v[1] - spec.origin[1],
                v[2] - spec.origin[2],
            ]
        })
        .collect();
    let tris: Vec<[usize; 3]> = mesh.faces().to_vec();

    let mut grid = VoxelGrid::empty(*spec);
    let mut crossings = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            let y = (j as f64 + 0.5) * spec.spacing;
            let z = (k as f64 + 0.5) * spec.spacing;
            let mut ray = (y, z);
            let mut rng = None;
            let mut attempts = 0;
            while !row_crossings(&local, &tris, ray, &mut crossings) {
                attempts += 1;
                if attempts > MAX_JITTER_ATTEMPTS {
                    return Err(Error::Numeric(format!(
                        "ray for voxel row (y={j}, z={k}) keeps hitting edges"
                    )));
                }
                let r = rng.get_or_insert_with(|| {
                    ChaCha8Rng::seed_from_u64(JITTER_SEED ^ ((k * ny + j) as u64))
                });
                let amp = 1e-7 * spec.spacing;
                ray = (
                    y + amp * r.random_range(-1.0..1.0),
                    z + amp * r.random_range(-1.0..1.0),
                );
            }
            crossings.sort_by(|a, b| a.total_cmp(b));
            let mut beyond = crossings.len();
            let mut c = 0;
            for i in 0..nx {
                let x = (i as f64 + 0.5) * spec.spacing;
                while c < crossings.len() && crossings[c] <= x {
                    c += 1;
                    beyond -= 1;
                }
                if beyond % 2 == 1 {
                    grid.set(i, j, k, true);
                }
            }
        }
    }
    Ok(grid)
}

/// Collects x positions where the +x ray at (y, z) crosses the surface.
/// Returns false when the ray touches an edge or vertex exactly.
fn row_crossings(v: &[Point3], tris: &[[usize; 3]], ray: (f64, f64), out: &mut Vec<f64>) -> bool {
    out.clear();
    let (qy, qz) = ray;
    // Edge functions are evaluated on the canonical (low, high) orientation so
    // two faces sharing an edge see bitwise-opposite values.
    let edge_fn = |a: usize, b: usize| -> f64 {
        let (lo, hi, s) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let (p, q) = (v[lo], v[hi]);
        s * ((q[1] - p[1]) * (qz - p[2]) - (q[2] - p[2]) * (qy - p[1]))
    };
    for &[a, b, c] in tris {
        let lo_y = v[a][1].min(v[b][1]).min(v[c][1]);
        let hi_y = v[a][1].max(v[b][1]).max(v[c][1]);
        let lo_z = v[a][2].min(v[b][2]).min(v[c][2]);
        let hi_z = v[a][2].max(v[b][2]).max(v[c][2]);
        if qy < lo_y || qy > hi_y || qz < lo_z || qz > hi_z {
            continue;
        }
        let wa = edge_fn(b, c);
        let wb = edge_fn(c, a);
        let wc = edge_fn(a, b);
        let all_pos = wa >= 0.0 && wb >= 0.0 && wc >= 0.0;
        let all_neg = wa <= 0.0 && wb <= 0.0 && wc <= 0.0;
        if !(all_pos || all_neg) {
            continue;
        }
        let sum = wa + wb + wc;
        if sum == 0.0 {
            // face seen edge-on by the ray
            continue;
        }
        if wa == 0.0 || wb == 0.0 || wc == 0.0 {
            return false;
        }
        out.push((wa * v[a][0] + wb * v[b][0] + wc * v[c][0]) / sum);
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{icosphere, make_box, unit_cube};

    #[test]
    fn grid_inside_cube_is_full() {
        let spec = GridSpec::new([0.1, 0.1, 0.1], 0.1, [8, 8, 8]).unwrap();
        let g = voxelize(&unit_cube(), &spec).unwrap();
        assert_eq!(g.count(), 512);
    }

    #[test]
    fn grid_outside_is_empty() {
        let spec = GridSpec::new([5.0, 5.0, 5.0], 0.1, [6, 6, 6]).unwrap();
        let g = voxelize(&unit_cube(), &spec).unwrap();
        assert_eq!(g.count(), 0);
    }

    #[test]
    fn box_aligned_with_voxel_centers_uses_jitter() {
        // the box faces pass exactly through voxel centers in y and z
        let b = make_box([0.0, 0.25, 0.25], [1.0, 0.75, 0.75]).unwrap();
        let spec = GridSpec::new([0.0; 3], 0.5, [2, 2, 2]).unwrap();
        let g = voxelize(&b, &spec).unwrap();
        let again = voxelize(&b, &spec).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn sphere_volume_close_to_analytic() {
        let r = 1.0;
        let s = icosphere(r, 4).unwrap();
        let spec = GridSpec::covering(&[&s], 64, 0.1).unwrap();
        let g = voxelize(&s, &spec).unwrap();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
        let rel = (g.volume() - exact).abs() / exact;
        assert!(rel < 0.03, "relative volume error {rel}");
    }

    #[test]
    fn open_mesh_is_rejected() {
        let m = TriangleMesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let spec = GridSpec::new([0.0; 3], 0.1, [4, 4, 4]).unwrap();
        assert!(matches!(voxelize(&m, &spec), Err(Error::Topology(_))));
    }

    #[test]
    fn invariant_to_face_order_and_rotation_within_faces() {
        let s = icosphere(1.0, 2).unwrap();
        let spec = GridSpec::covering(&[&s], 24, 0.1).unwrap();
        let base = voxelize(&s, &spec).unwrap();
        let mut faces: Vec<[usize; 3]> = s.faces().iter().rev().copied().collect();
        for (i, f) in faces.iter_mut().enumerate() {
            f.rotate_left(i % 3);
        }
        let shuffled = TriangleMesh::new(s.vertices().to_vec(), faces).unwrap();
        assert_eq!(voxelize(&shuffled, &spec).unwrap(), base);
    }

    #[test]
    fn invariant_to_common_translation() {
        let s = icosphere(1.0, 2).unwrap();
        let spec = GridSpec::covering(&[&s], 24, 0.1).unwrap();
        let base = voxelize(&s, &spec).unwrap();
        let t = [0.5, -1.25, 2.0];
        let moved = s.translated(t);
        let spec2 = GridSpec {
            origin: [0, 1, 2].map(|k| spec.origin[k] + t[k]),
            ..spec
        };
        assert_eq!(
            voxelize(&moved, &spec2).unwrap().occupancy(),
            base.occupancy()
        );
    }

    #[test]
    fn vox_roundtrip() {
        let s = icosphere(1.0, 1).unwrap();
        let spec = GridSpec::covering(&[&s], 8, 0.1).unwrap();
        let g = voxelize(&s, &spec).unwrap();
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        let header_end = buf.iter().position(|&b| b == b'\n').unwrap();
        assert!(buf[..header_end].starts_with(b"VOX 8 8 8 "));
        assert_eq!(buf.len() - header_end - 1, 512);
        assert_eq!(VoxelGrid::read_from(buf.as_slice()).unwrap(), g);
    }
}
