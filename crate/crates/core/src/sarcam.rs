//! Monostatic SAR imaging geometry.
//!
//! World points pass through four affine stages: a rigid look-at view
//! transform, a range transform that turns depth into the image vertical
//! axis, a ground projection that rescales slant range into ground range,
//! and an orthographic map into normalized device coordinates (NDC).
//!
//! Display convention: far range is at the top of the image (NDC y = +1,
//! pixel row 0). Objects therefore lay over downward, toward the sensor,
//! and cast shadows upward.

use serde::{Deserialize, Serialize};

use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::geometry::{cross, dot, Point3};

/// Sensor aspect: azimuth and elevation in degrees, standoff in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AspectPose {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub standoff: f64,
}

pub const DEFAULT_STANDOFF: f64 = 100.0;

impl AspectPose {
    /// Validates the pose. Azimuth is wrapped into [0, 360).
    pub fn new(azimuth_deg: f64, elevation_deg: f64, standoff: f64) -> Result<Self> {
        if !azimuth_deg.is_finite() {
            return Err(Error::Validation(format!(
                "azimuth {azimuth_deg} is not finite"
            )));
        }
        if !(elevation_deg > 0.0 && elevation_deg < 90.0) {
            return Err(Error::Validation(format!(
                "elevation must lie strictly between 0 and 90 degrees, got {elevation_deg}"
            )));
        }
        if !(standoff > 0.0 && standoff.is_finite()) {
            return Err(Error::Validation(format!(
                "standoff must be > 0, got {standoff}"
            )));
        }
        Ok(Self {
            azimuth_deg: azimuth_deg.rem_euclid(360.0),
            elevation_deg,
            standoff,
        })
    }

    pub fn with_default_standoff(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        Self::new(azimuth_deg, elevation_deg, DEFAULT_STANDOFF)
    }

    fn angles(&self) -> (f64, f64) {
        (
            self.azimuth_deg.to_radians(),
            self.elevation_deg.to_radians(),
        )
    }

    pub fn eye(&self) -> Point3 {
        let (t, p) = self.angles();
        let r = self.standoff;
        [r * p.cos() * t.cos(), r * p.cos() * t.sin(), r * p.sin()]
    }

    /// Unit illumination direction q̂, from the sensor toward the scene.
    pub fn boresight(&self) -> Point3 {
        let (t, p) = self.angles();
        [-p.cos() * t.cos(), -p.cos() * t.sin(), -p.sin()]
    }

    /// World +z made orthogonal to the boresight.
    pub fn up(&self) -> Point3 {
        let (t, p) = self.angles();
        [-p.sin() * t.cos(), -p.sin() * t.sin(), p.cos()]
    }

    pub fn right(&self) -> Point3 {
        cross(self.boresight(), self.up())
    }
}

/// Orthographic NDC box in ground-projected coordinates (meters).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneExtent {
    pub half_width: f64,
    pub half_height: f64,
    pub near: f64,
    pub far: f64,
}

impl SceneExtent {
    pub fn new(half_width: f64, half_height: f64, near: f64, far: f64) -> Result<Self> {
        let ok = half_width > 0.0 && half_height > 0.0 && far > near;
        if !ok
            || ![half_width, half_height, near, far]
                .iter()
                .all(|v| v.is_finite())
        {
            return Err(Error::Validation(format!(
                "extent needs positive half sizes and far > near, got \
                 ({half_width}, {half_height}, {near}, {far})"
            )));
        }
        Ok(Self {
            half_width,
            half_height,
            near,
            far,
        })
    }

    /// Extent covering width × height cells of `spacing` meters.
    pub fn from_pixels(width: usize, height: usize, spacing: f64) -> Result<Self> {
        Self::new(
            0.5 * width as f64 * spacing,
            0.5 * height as f64 * spacing,
            -8.0,
            8.0,
        )
    }
}

impl Default for SceneExtent {
    fn default() -> Self {
        // 128 px at 0.075 m
        Self {
            half_width: 4.8,
            half_height: 4.8,
            near: -8.0,
            far: 8.0,
        }
    }
}

/// Row-vector affine map p ↦ M·p + t.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub m: [[f64; 3]; 3],
    pub t: [f64; 3],
}

impl Affine {
    pub fn apply(&self, p: Point3) -> Point3 {
        [0, 1, 2].map(|i| dot(self.m[i], p) + self.t[i])
    }

    pub fn apply_var<'g>(&self, points: Var<'g>) -> Result<Var<'g>> {
        let m: Vec<Vec<f64>> = self.m.iter().map(|r| r.to_vec()).collect();
        points.linear_rows(&m, &self.t)
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &Affine) -> Affine {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * first.m[k][j]).sum();
            }
        }
        Affine {
            m,
            t: self.apply(first.t),
        }
    }

    pub fn inverse(&self) -> Result<Affine> {
        let a = &self.m;
        let c = |i: usize, j: usize| {
            let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
            let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
            a[i1][j1] * a[i2][j2] - a[i1][j2] * a[i2][j1]
        };
        let det: f64 = (0..3).map(|j| a[0][j] * c(0, j)).sum();
        if det.abs() < 1e-300 {
            return Err(Error::Numeric("singular affine map".into()));
        }
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = c(j, i) / det;
            }
        }
        let t = [0, 1, 2].map(|i| -dot(m[i], self.t));
        Ok(Affine { m, t })
    }
}

/// Camera frame: x right, y up, z depth away from the eye.
pub fn view_affine(pose: &AspectPose) -> Affine {
    let (r, u, f) = (pose.right(), pose.up(), pose.boresight());
    let e = pose.eye();
    Affine {
        m: [r, u, f],
        t: [-dot(r, e), -dot(u, e), -dot(f, e)],
    }
}

/// (x, y, z) ↦ (x, z − ρ, −y): depth becomes the range axis, centered on the
/// scene origin so that larger range sits higher in the image. The old
/// vertical axis, negated, becomes the depth-test coordinate, so where
/// surfaces lay over one another the higher one is in front.
pub fn range_affine(standoff: f64) -> Affine {
    Affine {
        m: [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]],
        t: [0.0, -standoff, 0.0],
    }
}

/// Scales slant range by 1/cos φ into ground range.
pub fn ground_affine(elevation_deg: f64) -> Result<Affine> {
    if !(elevation_deg > 0.0 && elevation_deg < 90.0) {
        return Err(Error::Validation(format!(
            "elevation {elevation_deg} outside (0, 90)"
        )));
    }
    let s = 1.0 / elevation_deg.to_radians().cos();
    Ok(Affine {
        m: [[1.0, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, 1.0]],
        t: [0.0; 3],
    })
}

pub fn ndc_affine(extent: &SceneExtent) -> Affine {
    let dz = extent.far - extent.near;
    Affine {
        m: [
            [1.0 / extent.half_width, 0.0, 0.0],
            [0.0, 1.0 / extent.half_height, 0.0],
            [0.0, 0.0, 1.0 / dz],
        ],
        t: [0.0, 0.0, -extent.near / dz],
    }
}

pub fn view_transform<'g>(points: Var<'g>, pose: &AspectPose) -> Result<Var<'g>> {
    view_affine(pose).apply_var(points)
}

pub fn range_transform<'g>(points: Var<'g>, standoff: f64) -> Result<Var<'g>> {
    range_affine(standoff).apply_var(points)
}

pub fn ground_projection<'g>(points: Var<'g>, elevation_deg: f64) -> Result<Var<'g>> {
    ground_affine(elevation_deg)?.apply_var(points)
}

pub fn ndc_orthographic<'g>(points: Var<'g>, extent: &SceneExtent) -> Result<Var<'g>> {
    ndc_affine(extent).apply_var(points)
}

/// The four stages in order, differentiable in `vertices` (N×3).
pub fn to_ndc<'g>(vertices: Var<'g>, pose: &AspectPose, extent: &SceneExtent) -> Result<Var<'g>> {
    let v = view_transform(vertices, pose)?;
    let r = range_transform(v, pose.standoff)?;
    let g = ground_projection(r, pose.elevation_deg)?;
    ndc_orthographic(g, extent)
}

/// Non-differentiable counterpart of [`to_ndc`], stage by stage.
pub fn to_ndc_points(
    points: &[Point3],
    pose: &AspectPose,
    extent: &SceneExtent,
) -> Result<Vec<Point3>> {
    let stages = [
        view_affine(pose),
        range_affine(pose.standoff),
        ground_affine(pose.elevation_deg)?,
        ndc_affine(extent),
    ];
    Ok(points
        .iter()
        .map(|&p| stages.iter().fold(p, |q, s| s.apply(q)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{check_gradient, Graph, Tensor};
    use crate::geometry::{norm, sub};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pose(t: f64, p: f64) -> AspectPose {
        AspectPose::new(t, p, 50.0).unwrap()
    }

    fn eval(points: &[Point3], f: impl for<'g> Fn(Var<'g>) -> Result<Var<'g>>) -> Vec<Point3> {
        let g = Graph::new();
        f(g.constant(Tensor::from_points(points)))
            .unwrap()
            .value()
            .to_points()
    }

    fn close(a: Point3, b: Point3, tol: f64) -> bool {
        (0..3).all(|k| (a[k] - b[k]).abs() <= tol)
    }

    #[test]
    fn pose_validation() {
        assert!(AspectPose::new(0.0, 0.0, 10.0).is_err());
        assert!(AspectPose::new(0.0, 90.0, 10.0).is_err());
        assert!(AspectPose::new(0.0, 30.0, 0.0).is_err());
        assert!(AspectPose::new(f64::NAN, 30.0, 1.0).is_err());
        assert_eq!(AspectPose::new(370.0, 30.0, 1.0).unwrap().azimuth_deg, 10.0);
    }

    #[test]
    fn origin_maps_to_standoff_depth() {
        for (t, p) in [(0.0, 10.0), (123.0, 45.0), (300.0, 80.0)] {
            let q = view_affine(&pose(t, p)).apply([0.0; 3]);
            assert!(close(q, [0.0, 0.0, 50.0], 1e-12), "{q:?}");
        }
    }

    #[test]
    fn head_on_depth_at_grazing_limit() {
        let ps = pose(0.0, 1e-9);
        let q = view_affine(&ps).apply([1.0, 0.0, 0.0]);
        assert!((q[2] - 49.0).abs() < 1e-9);
    }

    #[test]
    fn view_is_rigid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let ps = pose(rng.random_range(0.0..360.0), rng.random_range(1.0..89.0));
            let a: Point3 = [0, 1, 2].map(|_| rng.random_range(-5.0..5.0));
            let b: Point3 = [0, 1, 2].map(|_| rng.random_range(-5.0..5.0));
            let va = view_affine(&ps).apply(a);
            let vb = view_affine(&ps).apply(b);
            assert!((norm(sub(va, vb)) - norm(sub(a, b))).abs() < 1e-9);
        }
    }

    #[test]
    fn range_swaps_axes() {
        let out = eval(&[[1.0, 2.0, 3.0]], |v| range_transform(v, 0.0));
        assert_eq!(out[0], [1.0, 3.0, -2.0]);
        let two = eval(&[[0.0, 0.0, 5.0], [0.0, 0.0, 5.75]], |v| {
            range_transform(v, 5.0)
        });
        assert!((two[1][1] - two[0][1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn range_inverse_roundtrip() {
        let a = range_affine(42.0);
        let inv = a.inverse().unwrap();
        for p in [[1.0, -2.0, 3.5], [0.0, 0.0, 0.0], [1e3, 7.0, -4.0]] {
            assert!(close(inv.apply(a.apply(p)), p, 1e-12));
        }
    }

    /// Ground range from exact eye distances: slant = |E − p| measured
    /// relative to the origin, divided by cos φ.
    fn slant_oracle(ps: &AspectPose, p: Point3) -> f64 {
        let e = ps.eye();
        (ps.standoff - norm(sub(e, p))) / ps.elevation_deg.to_radians().cos()
    }

    #[test]
    fn ground_spacing_preserved_at_60_degrees() {
        // large standoff makes the plane-wave approximation exact to 1e-9
        let ps = AspectPose::new(0.0, 60.0, 1e7).unwrap();
        let a = [0.3, 0.0, 0.0];
        let b = [1.3, 0.0, 0.0];
        let stages = |p| {
            let v = view_affine(&ps).apply(p);
            let r = range_affine(ps.standoff).apply(v);
            ground_affine(60.0).unwrap().apply(r)
        };
        let d = stages(a)[1] - stages(b)[1];
        assert!((d - 1.0).abs() < 1e-9, "{d}");
        let oracle = slant_oracle(&ps, a) - slant_oracle(&ps, b);
        assert!((d + oracle).abs() < 1e-6, "{d} vs {oracle}");
    }

    #[test]
    fn layover_is_h_tan_phi_toward_sensor() {
        for (phi, h) in [(45.0, 1.0), (30.0, 2.0), (60.0, 0.5), (45.0, 0.0)] {
            let ps = AspectPose::new(90.0, phi, 1e7).unwrap();
            let top = to_ground(&ps, [0.0, 0.0, h]);
            let foot = to_ground(&ps, [0.0, 0.0, 0.0]);
            let shift = foot[1] - top[1];
            let expect = h * f64::tan(phi.to_radians());
            assert!(
                (shift - expect).abs() < 1e-6,
                "phi {phi}: {shift} vs {expect}"
            );
            // a sensor-side ground point at the same distance lands in the same place
            let sensor_dir = [0.0, expect, 0.0];
            assert!((to_ground(&ps, sensor_dir)[1] - top[1]).abs() < 1e-6);
        }
    }

    fn to_ground(ps: &AspectPose, p: Point3) -> Point3 {
        let v = view_affine(ps).apply(p);
        let r = range_affine(ps.standoff).apply(v);
        ground_affine(ps.elevation_deg).unwrap().apply(r)
    }

    #[test]
    fn slant_plane_compresses_ground_square() {
        let ps = AspectPose::new(0.0, 50.0, 100.0).unwrap();
        let sq = [[0.5, 0.0, 0.0], [-0.5, 0.0, 0.0]];
        let slant: Vec<Point3> = sq
            .iter()
            .map(|&p| range_affine(100.0).apply(view_affine(&ps).apply(p)))
            .collect();
        let ground: Vec<Point3> = sq.iter().map(|&p| to_ground(&ps, p)).collect();
        let s = (slant[0][1] - slant[1][1]).abs();
        let g = (ground[0][1] - ground[1][1]).abs();
        assert!((s - 50f64.to_radians().cos()).abs() < 1e-12);
        assert!((g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ndc_corners() {
        let ext = SceneExtent::new(2.0, 3.0, -1.0, 3.0).unwrap();
        let out = eval(
            &[[2.0, 0.0, -1.0], [0.0, 0.0, 1.0], [-2.0, 3.0, 3.0]],
            |v| ndc_orthographic(v, &ext),
        );
        assert!(close(out[0], [1.0, 0.0, 0.0], 1e-15));
        assert!(close(out[1], [0.0, 0.0, 0.5], 1e-15));
        assert!(close(out[2], [-1.0, 1.0, 1.0], 1e-15));
    }

    #[test]
    fn orthographic_footprint_independent_of_depth() {
        let ext = SceneExtent::default();
        let out = eval(
            &[
                [0.0, 0.0, -5.0],
                [1.0, 1.0, -5.0],
                [0.0, 0.0, 5.0],
                [1.0, 1.0, 5.0],
            ],
            |v| ndc_orthographic(v, &ext),
        );
        assert_eq!(out[1][0] - out[0][0], out[3][0] - out[2][0]);
        assert_eq!(out[1][1] - out[0][1], out[3][1] - out[2][1]);
    }

    #[test]
    fn composition_equals_manual_chaining() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Point3> = (0..10)
            .map(|_| [0, 1, 2].map(|_| rng.random_range(-3.0..3.0)))
            .collect();
        let ps = pose(33.0, 27.0);
        let ext = SceneExtent::default();
        let full = eval(&pts, |v| to_ndc(v, &ps, &ext));
        let manual = eval(&pts, |v| {
            let a = view_transform(v, &ps)?;
            let b = range_transform(a, ps.standoff)?;
            let c = ground_projection(b, ps.elevation_deg)?;
            ndc_orthographic(c, &ext)
        });
        assert_eq!(full, manual);
        assert_eq!(full, to_ndc_points(&pts, &ps, &ext).unwrap());
    }

    #[test]
    fn azimuth_is_periodic() {
        let a = view_affine(&pose(17.5, 40.0));
        let b = view_affine(&pose(377.5, 40.0));
        for i in 0..3 {
            assert!(close(a.m[i], b.m[i], 1e-12));
        }
        assert!(close(a.t, b.t, 1e-12));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let ps = pose(rng.random_range(0.0..360.0), rng.random_range(5.0..80.0));
            let w: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = Tensor::new(
                vec![4, 3],
                (0..12).map(|_| rng.random_range(-2.0..2.0)).collect(),
            )
            .unwrap();
            let ext = SceneExtent::default();
            let r = check_gradient(
                |g, v| {
                    let n = to_ndc(v, &ps, &ext)?;
                    n.mul(g.constant(Tensor::new(vec![4, 3], w.clone())?))
                        .map(|p| p.sum())
                },
                &x,
                1e-4,
            )
            .unwrap();
            assert!(r.max_rel_error <= 1e-6, "{}", r.max_rel_error);
        }
    }
}
