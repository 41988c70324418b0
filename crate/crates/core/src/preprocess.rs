//! Intensity pipelines applied to CT volumes before evaluation.
//!
//! Two independent transforms are provided: a linear window that maps a HU
//! range onto 8-bit display values, and a foreground normalization that
//! clips to pooled percentile bounds and standardizes by the pooled mean and
//! population standard deviation. Which one a cohort uses is the caller's
//! choice; nothing here decides that.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::percentile;
use crate::volume::{BinaryMask, IntensityUnit, Volume, VoxelData};

/// A linear HU display window. The lower bound maps to 0, the upper to 255.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    lo: f64,
    hi: f64,
}

impl WindowSpec {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidWindow { low: lo, high: hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

/// Pooled foreground intensity statistics driving [`normalize`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    /// Population standard deviation (divides by the sample count).
    pub std: f64,
    /// 0.5th percentile of the pooled foreground, lower clip bound.
    pub p_low: f64,
    /// 99.5th percentile of the pooled foreground, upper clip bound.
    pub p_high: f64,
    pub sample_count: usize,
}

/// Maps intensities through the window onto 0..=255, rounding half away
/// from zero and saturating outside the window.
pub fn window_lut(volume: &Volume, window: WindowSpec) -> Volume {
    let width = window.hi - window.lo;
    let n = volume.geometry().voxel_count();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Dividing before scaling keeps exact half-steps (e.g. a value at
        // the window midpoint) exact, so they round predictably.
        let level = ((volume.value(i) - window.lo) / width * 255.0).round();
        out.push(level.clamp(0.0, 255.0) as u8);
    }
    Volume::new(
        *volume.geometry(),
        IntensityUnit::Display8Bit,
        VoxelData::U8(out),
    )
    .expect("same shape as input")
}

/// Pools the intensities at foreground voxels across all cases and computes
/// the statistics used by [`normalize`].
pub fn foreground_stats(volumes: &[Volume], masks: &[BinaryMask]) -> Result<NormStats> {
    if volumes.len() != masks.len() {
        return Err(Error::DomainError(format!(
            "{} volumes vs {} masks",
            volumes.len(),
            masks.len()
        )));
    }
    let mut pooled = Vec::new();
    for (volume, mask) in volumes.iter().zip(masks) {
        volume.geometry().ensure_compatible(mask.geometry())?;
        for (i, &fg) in mask.bits().iter().enumerate() {
            if fg {
                pooled.push(volume.value(i));
            }
        }
    }
    if pooled.is_empty() {
        return Err(Error::EmptyForeground);
    }

    let n = pooled.len() as f64;
    let mean = pooled.iter().sum::<f64>() / n;
    let var = pooled.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;

    pooled.sort_by(|a, b| a.partial_cmp(b).expect("finite intensities"));
    Ok(NormStats {
        mean,
        std: var.sqrt(),
        p_low: percentile(&pooled, 0.005)?,
        p_high: percentile(&pooled, 0.995)?,
        sample_count: pooled.len(),
    })
}

/// Clips every voxel to `[p_low, p_high]`, subtracts the mean, divides by
/// the standard deviation, and stores the result as 32-bit floats.
pub fn normalize(volume: &Volume, stats: &NormStats) -> Result<Volume> {
    if !(stats.mean.is_finite()
        && stats.std.is_finite()
        && stats.p_low.is_finite()
        && stats.p_high.is_finite()
        && stats.p_low <= stats.p_high)
    {
        return Err(Error::DomainError(format!("unusable statistics {stats:?}")));
    }
    if stats.std == 0.0 {
        return Err(Error::DegenerateStats(
            "constant foreground cannot be standardized".into(),
        ));
    }
    let n = volume.geometry().voxel_count();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let v = volume.value(i).clamp(stats.p_low, stats.p_high);
        out.push(((v - stats.mean) / stats.std) as f32);
    }
    Volume::new(
        *volume.geometry(),
        IntensityUnit::Normalized,
        VoxelData::F32(out),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;
    use proptest::prelude::*;

    fn hu_volume(values: Vec<i16>) -> Volume {
        let g = Geometry::new([values.len(), 1, 1], [1.0, 1.0, 1.0]).unwrap();
        Volume::new(g, IntensityUnit::Hounsfield, VoxelData::I16(values)).unwrap()
    }

    fn full_mask(n: usize) -> BinaryMask {
        let g = Geometry::new([n, 1, 1], [1.0, 1.0, 1.0]).unwrap();
        let mut m = BinaryMask::blank(g);
        m.bits_mut().fill(true);
        m
    }

    #[test]
    fn window_endpoints_and_midpoint() {
        let w = WindowSpec::new(-160.0, 240.0).unwrap();
        let v = hu_volume(vec![-160, 240, 40, -1000, 3000]);
        let out = window_lut(&v, w);
        assert_eq!(out.unit(), IntensityUnit::Display8Bit);
        match out.data() {
            // (40 + 160) / 400 * 255 = 127.5, which rounds away from zero.
            VoxelData::U8(levels) => assert_eq!(levels, &[0, 255, 128, 0, 255]),
            other => panic!("expected 8-bit output, got {other:?}"),
        }
    }

    #[test]
    fn window_is_monotone_and_saturates() {
        let w = WindowSpec::new(-160.0, 240.0).unwrap();
        let values: Vec<i16> = (-300..400).step_by(7).collect();
        let out = window_lut(&hu_volume(values.clone()), w);
        let VoxelData::U8(levels) = out.data() else {
            panic!("expected 8-bit output");
        };
        for pair in levels.windows(2) {
            assert!(pair[0] <= pair[1], "input is ascending, output must be too");
        }
        assert_eq!(levels[0], 0);
        assert_eq!(*levels.last().unwrap(), 255);
    }

    #[test]
    fn degenerate_windows_are_rejected() {
        assert!(matches!(
            WindowSpec::new(10.0, 10.0),
            Err(Error::InvalidWindow { .. })
        ));
        assert!(WindowSpec::new(240.0, -160.0).is_err());
        assert!(WindowSpec::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn stats_of_four_values_by_hand() {
        let v = hu_volume(vec![10, 20, 30, 40]);
        let s = foreground_stats(&[v], &[full_mask(4)]).unwrap();
        assert_eq!(s.mean, 25.0);
        assert_eq!(s.std, 125.0_f64.sqrt());
        assert_eq!(s.sample_count, 4);
        // Rank 0.015 of [10, 20, 30, 40] and its mirror.
        assert!((s.p_low - 10.15).abs() < 1e-12);
        assert!((s.p_high - 39.85).abs() < 1e-12);
    }

    #[test]
    fn stats_pool_across_cases_and_ignore_background() {
        let va = hu_volume(vec![1, 999]);
        let vb = hu_volume(vec![999, 3]);
        let g = *va.geometry();
        let mut ma = BinaryMask::blank(g);
        ma.set(0, 0, 0, true);
        let mut mb = BinaryMask::blank(g);
        mb.set(1, 0, 0, true);
        let s = foreground_stats(&[va, vb], &[ma, mb]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.sample_count, 2);
    }

    #[test]
    fn constant_foreground_has_zero_spread() {
        let v = hu_volume(vec![7, 7, 7]);
        let s = foreground_stats(&[v], &[full_mask(3)]).unwrap();
        assert_eq!((s.mean, s.std), (7.0, 0.0));
        assert_eq!((s.p_low, s.p_high), (7.0, 7.0));
    }

    #[test]
    fn empty_foreground_is_rejected() {
        let v = hu_volume(vec![1, 2, 3]);
        let g = *v.geometry();
        assert!(matches!(
            foreground_stats(&[v], &[BinaryMask::blank(g)]),
            Err(Error::EmptyForeground)
        ));
        let w = hu_volume(vec![1]);
        assert!(matches!(
            foreground_stats(&[w], &[]),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn normalize_standardizes_and_clips() {
        let v = hu_volume(vec![10, 20, 30, 40, 25, 2000]);
        let stats = foreground_stats(&[hu_volume(vec![10, 20, 30, 40])], &[full_mask(4)]).unwrap();
        let out = normalize(&v, &stats).unwrap();
        assert_eq!(out.unit(), IntensityUnit::Normalized);

        let expected_20 = ((20.0 - 25.0) / 125.0_f64.sqrt()) as f32;
        let VoxelData::F32(vals) = out.data() else {
            panic!("expected float output");
        };
        assert_eq!(vals[1], expected_20);
        assert_eq!(vals[4], 0.0);
        // Clipped to p_high before standardizing.
        let expected_top = ((stats.p_high - 25.0) / 125.0_f64.sqrt()) as f32;
        assert_eq!(vals[5], expected_top);
        assert_eq!(vals[5], vals[3].max(vals[5]));
    }

    #[test]
    fn normalize_rejects_zero_spread() {
        let v = hu_volume(vec![7, 7]);
        let stats = foreground_stats(&[v.clone()], &[full_mask(2)]).unwrap();
        assert!(matches!(
            normalize(&v, &stats),
            Err(Error::DegenerateStats(_))
        ));
    }

    #[test]
    fn normalized_foreground_is_standard() {
        // Duplicated extremes keep the percentile clip out of the way.
        let mut values: Vec<i16> = (0..=200).map(|i| -80 + (i * 160) / 200).collect();
        values[0] = values[1];
        values[200] = values[199];
        let n = values.len();
        let v = hu_volume(values);
        let mask = full_mask(n);
        let stats = foreground_stats(&[v.clone()], &[mask.clone()]).unwrap();
        let out = normalize(&v, &stats).unwrap();
        let after = foreground_stats(&[out], &[mask]).unwrap();
        assert!(after.mean.abs() < 1e-5);
        assert!((after.std - 1.0).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn round_trip_recovers_clipped_values(values in prop::collection::vec(-80i16..=80, 3..40)) {
            let v = hu_volume(values.clone());
            let mask = full_mask(values.len());
            let stats = foreground_stats(&[v.clone()], &[mask]).unwrap();
            prop_assume!(stats.std > 0.0);
            let out = normalize(&v, &stats).unwrap();
            for (i, &raw) in values.iter().enumerate() {
                let clipped = f64::from(raw).clamp(stats.p_low, stats.p_high);
                let recovered = stats.mean + stats.std * out.value(i);
                prop_assert!((recovered - clipped).abs() < 1e-5);
            }
        }

        #[test]
        fn window_never_leaves_byte_range(values in prop::collection::vec(-3000i16..=3000, 1..50),
                                          lo in -500.0f64..0.0, width in 1.0f64..900.0) {
            let w = WindowSpec::new(lo, lo + width).unwrap();
            let out = window_lut(&hu_volume(values), w);
            let VoxelData::U8(levels) = out.data() else { panic!("expected 8-bit output") };
            prop_assert!(!levels.is_empty());
        }
    }
}
