//! Overlap and surface-distance agreement between a ground-truth mask and a
//! predicted mask.
//!
//! Conventions, fixed here and relied on by everything downstream:
//! - Dice of two empty masks is 1.0, of one empty mask 0.0, so subtraction
//!   pipelines that empty out both masks still produce a defined overlap.
//! - Surface distances of an empty mask do not exist; the Hausdorff metrics
//!   return an error instead of a sentinel, and batch records carry `None`.
//! - The 95th-percentile Hausdorff distance is the larger of the two
//!   per-direction 95th percentiles, each taken over that direction's sorted
//!   surface distances with linear rank interpolation. This keeps it bounded
//!   by the plain Hausdorff distance.
//! - Bone-excluded overlap is Dice after removing bone voxels from both
//!   masks; surface metrics are never computed on the subtracted masks, whose
//!   surfaces are artifacts of the subtraction.

use serde::{Deserialize, Serialize};

use crate::distance::surface_distance_pair;
use crate::error::{Error, Result};
use crate::masks::subtract;
use crate::stats::percentile;
use crate::volume::BinaryMask;

/// Agreement numbers for one mask pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub dsc: f64,
    pub hd_mm: Option<f64>,
    pub hd95_mm: Option<f64>,
    pub dsc_bones_excluded: Option<f64>,
}

/// One row of a cohort evaluation: pair metrics tagged with identifiers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub patient_id: String,
    pub model_id: String,
    pub dsc: f64,
    pub hd_mm: Option<f64>,
    pub hd95_mm: Option<f64>,
    pub dsc_bones_excluded: Option<f64>,
}

impl MetricRecord {
    pub fn new(patient_id: impl Into<String>, model_id: impl Into<String>, m: PairMetrics) -> Self {
        Self {
            patient_id: patient_id.into(),
            model_id: model_id.into(),
            dsc: m.dsc,
            hd_mm: m.hd_mm,
            hd95_mm: m.hd95_mm,
            dsc_bones_excluded: m.dsc_bones_excluded,
        }
    }
}

/// Overlap ratio 2|X∩Y| / (|X| + |Y|). Two empty masks overlap perfectly by
/// convention; one empty mask gives 0.
pub fn dice(gt: &BinaryMask, pred: &BinaryMask) -> Result<f64> {
    gt.geometry().ensure_compatible(pred.geometry())?;
    let mut intersection = 0usize;
    let mut total = 0usize;
    for (&a, &b) in gt.bits().iter().zip(pred.bits()) {
        intersection += (a && b) as usize;
        total += a as usize + b as usize;
    }
    if total == 0 {
        Ok(1.0)
    } else {
        Ok(2.0 * intersection as f64 / total as f64)
    }
}

/// Largest distance from either surface to the other, in millimetres.
pub fn hausdorff(gt: &BinaryMask, pred: &BinaryMask) -> Result<f64> {
    let (ab, ba) = directed_pair(gt, pred)?;
    Ok(directed_max(&ab).max(directed_max(&ba)))
}

/// The larger of the two per-direction 95th percentiles of surface
/// distances, in millimetres.
pub fn hd95(gt: &BinaryMask, pred: &BinaryMask) -> Result<f64> {
    let (ab, ba) = directed_pair(gt, pred)?;
    Ok(directed_p95(&ab).max(directed_p95(&ba)))
}

/// All metrics for one pair, sharing the surface-distance work between the
/// two Hausdorff variants. With empty masks the overlap conventions apply
/// and the surface metrics come back as `None`. When a bone mask is given,
/// `dsc_bones_excluded` is Dice over the bone-subtracted masks.
pub fn evaluate_pair(
    gt: &BinaryMask,
    pred: &BinaryMask,
    bones: Option<&BinaryMask>,
) -> Result<PairMetrics> {
    let dsc = dice(gt, pred)?;
    let (hd_mm, hd95_mm) = if gt.is_empty() || pred.is_empty() {
        (None, None)
    } else {
        let (ab, ba) = surface_distance_pair(gt, pred)?;
        (
            Some(directed_max(&ab).max(directed_max(&ba))),
            Some(directed_p95(&ab).max(directed_p95(&ba))),
        )
    };
    let dsc_bones_excluded = match bones {
        Some(bones) => Some(dice(&subtract(gt, bones)?, &subtract(pred, bones)?)?),
        None => None,
    };
    Ok(PairMetrics {
        dsc,
        hd_mm,
        hd95_mm,
        dsc_bones_excluded,
    })
}

fn directed_pair(gt: &BinaryMask, pred: &BinaryMask) -> Result<(Vec<f64>, Vec<f64>)> {
    gt.geometry().ensure_compatible(pred.geometry())?;
    if gt.is_empty() || pred.is_empty() {
        return Err(Error::UndefinedMetric(
            "surface distances need two non-empty masks".into(),
        ));
    }
    surface_distance_pair(gt, pred)
}

fn directed_max(sorted: &[f64]) -> f64 {
    *sorted.last().expect("a non-empty mask has surface voxels")
}

fn directed_p95(sorted: &[f64]) -> f64 {
    percentile(sorted, 0.95).expect("non-empty sorted distances")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geom(dims: [usize; 3], spacing: [f64; 3]) -> Geometry {
        Geometry::new(dims, spacing).unwrap()
    }

    fn mask_from(g: Geometry, set: &[[usize; 3]]) -> BinaryMask {
        let mut m = BinaryMask::blank(g);
        for &[x, y, z] in set {
            m.set(x, y, z, true);
        }
        m
    }

    #[test]
    fn dice_counts_overlap() {
        let g = geom([10, 1, 1], [1.0, 1.0, 1.0]);
        // |X| = 4, |Y| = 6, |X∩Y| = 3.
        let x = mask_from(g, &[[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]]);
        let y = mask_from(
            g,
            &[[1, 0, 0], [2, 0, 0], [3, 0, 0], [4, 0, 0], [5, 0, 0], [6, 0, 0]],
        );
        assert_eq!(dice(&x, &y).unwrap(), 0.6);
        assert_eq!(dice(&x, &x).unwrap(), 1.0);

        let far = mask_from(g, &[[8, 0, 0]]);
        assert_eq!(dice(&x, &far).unwrap(), 0.0);
    }

    #[test]
    fn dice_empty_mask_conventions() {
        let g = geom([4, 4, 4], [1.0, 1.0, 1.0]);
        let empty = BinaryMask::blank(g);
        let one = mask_from(g, &[[1, 1, 1]]);
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
        assert_eq!(dice(&one, &empty).unwrap(), 0.0);
        assert_eq!(dice(&empty, &one).unwrap(), 0.0);
    }

    #[test]
    fn hausdorff_of_offset_voxels_is_their_distance() {
        let g = geom([8, 8, 3], [1.0, 1.0, 1.0]);
        let a = mask_from(g, &[[1, 1, 1]]);
        let b = mask_from(g, &[[4, 5, 1]]);
        assert_eq!(hausdorff(&a, &b).unwrap(), 5.0);
        assert_eq!(hd95(&a, &b).unwrap(), 5.0);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        assert_eq!(hd95(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn line_and_outlier_interpolate_to_five() {
        let g = geom([10, 11, 1], [1.0, 1.0, 1.0]);
        let line: Vec<[usize; 3]> = (0..10).map(|x| [x, 0, 0]).collect();
        let mut plus = line.clone();
        plus.push([0, 10, 0]);
        let a = mask_from(g, &line);
        let b = mask_from(g, &plus);
        assert_eq!(hausdorff(&a, &b).unwrap(), 10.0);
        assert_eq!(hd95(&a, &b).unwrap(), 5.0);
    }

    #[test]
    fn surface_metrics_on_empty_masks_are_undefined() {
        let g = geom([4, 4, 4], [1.0, 1.0, 1.0]);
        let empty = BinaryMask::blank(g);
        let one = mask_from(g, &[[1, 1, 1]]);
        assert!(matches!(
            hausdorff(&empty, &one),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(matches!(hd95(&one, &empty), Err(Error::UndefinedMetric(_))));
        assert!(matches!(
            hausdorff(&empty, &empty),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn mismatched_geometries_are_rejected() {
        let a = BinaryMask::blank(geom([4, 4, 4], [1.0, 1.0, 1.0]));
        let b = BinaryMask::blank(geom([4, 4, 4], [2.0, 1.0, 1.0]));
        assert!(matches!(dice(&a, &b), Err(Error::GeometryMismatch(_))));
        assert!(matches!(hausdorff(&a, &b), Err(Error::GeometryMismatch(_))));
        assert!(matches!(
            evaluate_pair(&a, &b, None),
            Err(Error::GeometryMismatch(_))
        ));
    }

    fn random_pair(rng: &mut ChaCha8Rng) -> (BinaryMask, BinaryMask) {
        let g = geom(
            [
                rng.random_range(2..=12),
                rng.random_range(2..=12),
                rng.random_range(1..=6),
            ],
            [
                rng.random_range(1..=3) as f64,
                rng.random_range(1..=3) as f64,
                rng.random_range(1..=5) as f64,
            ],
        );
        let mut a = BinaryMask::blank(g);
        let mut b = BinaryMask::blank(g);
        let da = rng.random_range(0.05..0.4);
        let db = rng.random_range(0.05..0.4);
        for i in 0..g.voxel_count() {
            if rng.random_bool(da) {
                a.bits_mut()[i] = true;
            }
            if rng.random_bool(db) {
                b.bits_mut()[i] = true;
            }
        }
        if a.is_empty() {
            a.bits_mut()[0] = true;
        }
        if b.is_empty() {
            let last = g.voxel_count() - 1;
            b.bits_mut()[last] = true;
        }
        (a, b)
    }

    #[test]
    fn random_pairs_match_all_pairs_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for round in 0..25 {
            let (a, b) = random_pair(&mut rng);
            let g = a.geometry();
            assert_eq!(
                dice(&a, &b).unwrap(),
                voxmetric_oracles::dice(a.bits(), b.bits()),
                "dice, round {round}"
            );
            assert_eq!(
                hausdorff(&a, &b).unwrap(),
                voxmetric_oracles::hausdorff(a.bits(), b.bits(), g.dims, g.spacing),
                "hausdorff, round {round}"
            );
            let h95 = hd95(&a, &b).unwrap();
            let want = voxmetric_oracles::hd95(a.bits(), b.bits(), g.dims, g.spacing);
            assert!((h95 - want).abs() <= 1e-9, "hd95, round {round}");
        }
    }

    #[test]
    fn metrics_are_symmetric_and_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..15 {
            let (a, b) = random_pair(&mut rng);
            assert_eq!(dice(&a, &b).unwrap(), dice(&b, &a).unwrap());
            let hd = hausdorff(&a, &b).unwrap();
            assert_eq!(hd, hausdorff(&b, &a).unwrap());
            let h95 = hd95(&a, &b).unwrap();
            assert_eq!(h95, hd95(&b, &a).unwrap());
            assert!(h95 <= hd);
            assert!(h95 >= 0.0);
        }
    }

    #[test]
    fn evaluate_pair_bundles_the_conventions() {
        let g = geom([8, 8, 4], [1.0, 1.0, 2.0]);
        let gt = mask_from(g, &[[2, 2, 1], [3, 2, 1], [2, 3, 1], [3, 3, 1]]);
        let bones = mask_from(g, &[[2, 2, 1]]);

        let m = evaluate_pair(&gt, &gt, Some(&bones)).unwrap();
        assert_eq!(m.dsc, 1.0);
        assert_eq!(m.hd_mm, Some(0.0));
        assert_eq!(m.hd95_mm, Some(0.0));
        assert_eq!(m.dsc_bones_excluded, Some(1.0));

        let mut full = BinaryMask::blank(g);
        full.bits_mut().fill(true);
        let swallowed = evaluate_pair(&gt, &gt, Some(&full)).unwrap();
        assert_eq!(swallowed.dsc_bones_excluded, Some(1.0));

        let without = evaluate_pair(&gt, &gt, None).unwrap();
        assert_eq!(without.dsc_bones_excluded, None);

        let empty = BinaryMask::blank(g);
        let degenerate = evaluate_pair(&gt, &empty, None).unwrap();
        assert_eq!(degenerate.dsc, 0.0);
        assert_eq!(degenerate.hd_mm, None);
        assert_eq!(degenerate.hd95_mm, None);
    }

    #[test]
    fn bone_exclusion_equals_direct_subtraction_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..15 {
            let (gt, pred) = random_pair(&mut rng);
            let g = *gt.geometry();
            let mut bones = BinaryMask::blank(g);
            for i in 0..g.voxel_count() {
                if rng.random_bool(0.3) {
                    bones.bits_mut()[i] = true;
                }
            }
            let m = evaluate_pair(&gt, &pred, Some(&bones)).unwrap();

            let minus = |m: &BinaryMask| -> Vec<bool> {
                m.bits()
                    .iter()
                    .zip(bones.bits())
                    .map(|(&a, &b)| a && !b)
                    .collect()
            };
            let want = voxmetric_oracles::dice(&minus(&gt), &minus(&pred));
            assert_eq!(m.dsc_bones_excluded, Some(want));
        }
    }

    proptest! {
        #[test]
        fn dice_is_one_exactly_on_identical_masks(bits_a in prop::collection::vec(any::<bool>(), 24),
                                                  bits_b in prop::collection::vec(any::<bool>(), 24)) {
            let g = geom([4, 3, 2], [1.0, 1.0, 1.0]);
            let a = BinaryMask::new(g, bits_a).unwrap();
            let b = BinaryMask::new(g, bits_b).unwrap();
            let d = dice(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert_eq!(d == 1.0, a == b);
        }
    }
}
