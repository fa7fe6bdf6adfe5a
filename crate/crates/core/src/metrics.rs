//! Voxel overlap scores and the energy-normalized image residual.
//!
//! Starred scores take the best value over integer translations of the
//! first grid within a window of ±n voxels per axis. Voxels shifted past
//! the border are dropped, so the starred scores are not symmetric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{voxelize, GridSpec, TriangleMesh, VoxelGrid};
use crate::shade::SarImage;

/// Returned by [`l2_star`] for an exact prediction.
pub const L2_STAR_PERFECT_DB: f64 = -300.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoxelMetric {
    Iou,
    Cs,
}

impl VoxelMetric {
    fn score(self, overlap: usize, a: usize, b: usize) -> f64 {
        match self {
            VoxelMetric::Iou => {
                let union = a + b - overlap;
                if union == 0 {
                    1.0
                } else {
                    overlap as f64 / union as f64
                }
            }
            VoxelMetric::Cs => {
                if a == 0 || b == 0 {
                    log::warn!("cosine similarity of an empty grid is taken as 0");
                    0.0
                } else {
                    overlap as f64 / ((a as f64) * (b as f64)).sqrt()
                }
            }
        }
    }
}

fn check_grids(a: &VoxelGrid, b: &VoxelGrid) -> Result<()> {
    if a.spec != b.spec {
        return Err(Error::Shape(format!(
            "voxel grids differ: {:?} vs {:?}",
            a.spec, b.spec
        )));
    }
    Ok(())
}

fn overlap(a: &VoxelGrid, b: &VoxelGrid) -> usize {
    a.occupancy()
        .iter()
        .zip(b.occupancy())
        .filter(|(x, y)| **x && **y)
        .count()
}

/// |a ∧ b| / |a ∨ b|; 1 when both are empty.
pub fn iou(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    check_grids(a, b)?;
    Ok(VoxelMetric::Iou.score(overlap(a, b), a.count(), b.count()))
}

/// |a ∧ b| / √(|a|·|b|); 0 (with a warning) when either is empty.
pub fn cosine_similarity(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    check_grids(a, b)?;
    Ok(VoxelMetric::Cs.score(overlap(a, b), a.count(), b.count()))
}

/// Overlap and surviving size of `a` after shifting it by `s` voxels.
fn shifted_counts(a: &VoxelGrid, b: &VoxelGrid, s: [i64; 3]) -> (usize, usize) {
    let [nx, ny, nz] = a.dims().map(|d| d as i64);
    let range = |n: i64, d: i64| (0.max(-d), n.min(n - d));
    let (x0, x1) = range(nx, s[0]);
    let (y0, y1) = range(ny, s[1]);
    let (z0, z1) = range(nz, s[2]);
    let (av, bv) = (a.occupancy(), b.occupancy());
    let (mut both, mut kept) = (0, 0);
    for z in z0..z1 {
        for y in y0..y1 {
            let ra = (z * ny + y) * nx;
            let rb = ((z + s[2]) * ny + y + s[1]) * nx + s[0];
            for x in x0..x1 {
                if av[(ra + x) as usize] {
                    kept += 1;
                    both += bv[(rb + x) as usize] as usize;
                }
            }
        }
    }
    (both, kept)
}

/// Best `metric(shift(a, s), b)` over integer shifts s ∈ [−n, n]³.
pub fn translation_invariant(
    metric: VoxelMetric,
    a: &VoxelGrid,
    b: &VoxelGrid,
    n: usize,
) -> Result<f64> {
    check_grids(a, b)?;
    let n = n as i64;
    let nb = b.count();
    let mut best = f64::NEG_INFINITY;
    for k in -n..=n {
        for j in -n..=n {
            for i in -n..=n {
                let (both, kept) = shifted_counts(a, b, [i, j, k]);
                best = best.max(metric.score(both, kept, nb));
            }
        }
    }
    Ok(best)
}

/// 10·log10(‖y − ŷ‖² / ‖y‖²) in dB, or [`L2_STAR_PERFECT_DB`] for an exact
/// match.
pub fn l2_star(label: &SarImage, pred: &SarImage) -> Result<f64> {
    if (label.height, label.width) != (pred.height, pred.width) {
        return Err(Error::Shape(format!(
            "label is {}×{}, prediction {}×{}",
            label.height, label.width, pred.height, pred.width
        )));
    }
    let energy = label.energy();
    if energy == 0.0 {
        return Err(Error::Contract(
            "L2* needs a label with nonzero energy".into(),
        ));
    }
    let resid: f64 = label
        .data()
        .iter()
        .zip(pred.data())
        .map(|(y, p)| (y - p).powi(2))
        .sum();
    if resid == 0.0 {
        return Ok(L2_STAR_PERFECT_DB);
    }
    Ok((10.0 * (resid / energy).log10()).max(L2_STAR_PERFECT_DB))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub iou: f64,
    pub iou_star: f64,
    pub cs: f64,
    pub cs_star: f64,
    /// dB; absent when no images were compared
    pub l2_star: Option<f64>,
    /// shift window in voxels
    pub window: usize,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "iou,iou_star,cs,cs_star,l2_star,window";

    pub fn from_grids(pred: &VoxelGrid, truth: &VoxelGrid, window: usize) -> Result<Self> {
        Ok(Self {
            iou: iou(pred, truth)?,
            iou_star: translation_invariant(VoxelMetric::Iou, pred, truth, window)?,
            cs: cosine_similarity(pred, truth)?,
            cs_star: translation_invariant(VoxelMetric::Cs, pred, truth, window)?,
            l2_star: None,
            window,
        })
    }

    pub fn csv_row(&self) -> String {
        let l2 = self.l2_star.map_or(String::new(), |v| v.to_string());
        format!(
            "{},{},{},{},{l2},{}",
            self.iou, self.iou_star, self.cs, self.cs_star, self.window
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Grid settings for mesh comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoxelOptions {
    pub resolution: usize,
    /// padding of the longest side, as a fraction
    pub pad: f64,
    pub window: usize,
}

impl Default for VoxelOptions {
    fn default() -> Self {
        Self {
            resolution: 64,
            pad: 0.1,
            window: 3,
        }
    }
}

/// Voxelizes both meshes on one grid covering them and scores `pred`
/// against `truth`.
pub fn compare_meshes(
    pred: &TriangleMesh,
    truth: &TriangleMesh,
    opts: &VoxelOptions,
) -> Result<MetricReport> {
    let spec = GridSpec::covering(&[pred, truth], opts.resolution, opts.pad)?;
    let a = voxelize(pred, &spec)?;
    let b = voxelize(truth, &spec)?;
    MetricReport::from_grids(&a, &b, opts.window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_box;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(n: usize) -> GridSpec {
        GridSpec::new([0.0; 3], 1.0, [n; 3]).unwrap()
    }

    fn grid(n: usize, f: impl Fn(usize, usize, usize) -> bool) -> VoxelGrid {
        let mut g = VoxelGrid::empty(spec(n));
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    g.set(i, j, k, f(i, j, k));
                }
            }
        }
        g
    }

    fn random_grid(n: usize, p: f64, seed: u64) -> VoxelGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let occ = (0..n * n * n).map(|_| rng.random::<f64>() < p).collect();
        VoxelGrid::new(spec(n), occ).unwrap()
    }

    fn shift(a: &VoxelGrid, s: [i64; 3]) -> VoxelGrid {
        let n = a.dims()[0] as i64;
        grid(n as usize, |i, j, k| {
            let src = [i as i64 - s[0], j as i64 - s[1], k as i64 - s[2]];
            src.iter().all(|&c| (0..n).contains(&c))
                && a.get(src[0] as usize, src[1] as usize, src[2] as usize)
        })
    }

    #[test]
    fn identities() {
        let a = grid(8, |i, j, k| i < 4 && j > 2 && k % 2 == 0);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&a, &a).unwrap(), 1.0);
        let b = grid(8, |i, j, k| i >= 4 && j > 2 && k % 2 == 0);
        assert_eq!(iou(&a, &b).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&a, &b).unwrap(), 0.0);
        let e = VoxelGrid::empty(spec(8));
        assert_eq!(iou(&e, &e).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&e, &a).unwrap(), 0.0);
    }

    #[test]
    fn half_overlap() {
        // 4 columns each, sharing 2
        let a = grid(8, |i, _, _| i < 4);
        let b = grid(8, |i, _, _| (2..6).contains(&i));
        assert_eq!(iou(&a, &b).unwrap(), 1.0 / 3.0);
        assert_eq!(cosine_similarity(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = VoxelGrid::empty(spec(4));
        let b = VoxelGrid::empty(GridSpec::new([0.0; 3], 0.5, [4; 3]).unwrap());
        assert!(matches!(iou(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn unit_shift_is_recovered() {
        let b = grid(12, |i, j, k| {
            (3..8).contains(&i) && (2..9).contains(&j) && (4..7).contains(&k)
        });
        let a = shift(&b, [-1, 0, 0]);
        assert!(iou(&a, &b).unwrap() < 1.0);
        for n in 1..3 {
            assert_eq!(
                translation_invariant(VoxelMetric::Iou, &a, &b, n).unwrap(),
                1.0
            );
            assert_eq!(
                translation_invariant(VoxelMetric::Cs, &a, &b, n).unwrap(),
                1.0
            );
        }
        assert_eq!(
            translation_invariant(VoxelMetric::Iou, &a, &b, 0).unwrap(),
            iou(&a, &b).unwrap()
        );
    }

    #[test]
    fn starred_matches_brute_force() {
        for seed in 0..3 {
            let a = random_grid(16, 0.3, seed);
            let b = random_grid(16, 0.3, seed + 100);
            for metric in [VoxelMetric::Iou, VoxelMetric::Cs] {
                let mut best = f64::NEG_INFINITY;
                for i in -2..=2 {
                    for j in -2..=2 {
                        for k in -2..=2 {
                            let s = shift(&a, [i, j, k]);
                            let v = match metric {
                                VoxelMetric::Iou => iou(&s, &b).unwrap(),
                                VoxelMetric::Cs => cosine_similarity(&s, &b).unwrap(),
                            };
                            best = best.max(v);
                        }
                    }
                }
                let fast = translation_invariant(metric, &a, &b, 2).unwrap();
                assert!((fast - best).abs() < 1e-12, "{metric:?}: {fast} vs {best}");
            }
        }
    }

    #[test]
    fn starred_is_asymmetric() {
        // a fully inside b's border region: shifting a loses nothing,
        // shifting b does
        let a = grid(6, |i, j, k| i == 2 && j == 2 && k == 2);
        let b = grid(6, |i, _, _| i == 0);
        let ab = translation_invariant(VoxelMetric::Iou, &a, &b, 2).unwrap();
        let ba = translation_invariant(VoxelMetric::Iou, &b, &a, 2).unwrap();
        assert_ne!(ab, ba);
    }

    #[test]
    fn l2_star_cases() {
        let y = SarImage::linear(1, 4, 0.1, vec![1.0, 2.0, 0.0, 3.0]).unwrap();
        let zero = SarImage::zeros(1, 4, 0.1);
        assert!(l2_star(&y, &zero).unwrap().abs() < 1e-12);
        assert_eq!(l2_star(&y, &y).unwrap(), L2_STAR_PERFECT_DB);
        // residual energy 1.4 = 10% of 14
        let p = SarImage::linear(1, 4, 0.1, vec![1.0, 2.0, 0.0, 3.0 - 1.4f64.sqrt()]).unwrap();
        assert!((l2_star(&y, &p).unwrap() + 10.0).abs() < 1e-9);
        assert!(matches!(l2_star(&zero, &y), Err(Error::Contract(_))));
    }

    #[test]
    fn identical_meshes_score_one() {
        let m = make_box([-1.0, -0.5, 0.0], [1.0, 1.5, 1.0]).unwrap();
        let r = compare_meshes(
            &m,
            &m,
            &VoxelOptions {
                resolution: 24,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!((r.iou, r.cs, r.iou_star, r.cs_star), (1.0, 1.0, 1.0, 1.0));
        let json = r.to_json().unwrap();
        assert!(json.contains("\"iou_star\": 1.0"));
        assert_eq!(r.csv_row(), "1,1,1,1,,3");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn ordering_and_symmetry(seed in 0u64..10_000, p in 0.05f64..0.9, q in 0.05f64..0.9) {
            let a = random_grid(8, p, seed);
            let b = random_grid(8, q, seed ^ 0xabc);
            let (i, c) = (iou(&a, &b).unwrap(), cosine_similarity(&a, &b).unwrap());
            prop_assert!(0.0 <= i && i <= c + 1e-15 && c <= 1.0);
            prop_assert_eq!(i, iou(&b, &a).unwrap());
            prop_assert_eq!(c, cosine_similarity(&b, &a).unwrap());
            let mut prev = (i, c);
            for n in 0..3 {
                let is = translation_invariant(VoxelMetric::Iou, &a, &b, n).unwrap();
                let cs = translation_invariant(VoxelMetric::Cs, &a, &b, n).unwrap();
                prop_assert!(is >= prev.0 && cs >= prev.1 && is <= cs + 1e-15);
                prev = (is, cs);
            }
        }
    }
}
