//! Dense 3-D scalar volumes and binary masks on anisotropic voxel grids.
//!
//! Voxels are stored in a flat buffer with x fastest-varying, then y, then z,
//! so the linear index of `(x, y, z)` is `x + nx * (y + ny * z)`. Spacing is
//! physical millimetres per voxel along each axis and enters every distance
//! computation; grids are never resampled to isotropic spacing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when deciding whether two grids share a spacing.
/// Dimensions must match exactly.
pub const SPACING_REL_TOL: f64 = 1e-6;

/// Shape and voxel spacing of a 3-D grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Voxel counts along x, y, z.
    pub dims: [usize; 3],
    /// Voxel spacing in millimetres along x, y, z.
    pub spacing: [f64; 3],
}

impl Geometry {
    /// Builds a geometry, rejecting empty axes, non-positive or non-finite
    /// spacing, and shapes whose voxel count overflows `usize`.
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidGeometry(format!(
                "dims {dims:?} contain an empty axis"
            )));
        }
        dims[0]
            .checked_mul(dims[1])
            .and_then(|p| p.checked_mul(dims[2]))
            .ok_or_else(|| {
                Error::InvalidGeometry(format!("dims {dims:?} overflow the voxel count"))
            })?;
        if spacing.iter().any(|&s| !s.is_finite() || s <= 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "spacing {spacing:?} must be finite and positive"
            )));
        }
        Ok(Self { dims, spacing })
    }

    /// Total number of voxels.
    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Linear index of `(x, y, z)`. No bounds check beyond debug assertions.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.dims[0] && y < self.dims[1] && z < self.dims[2]);
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    /// Inverse of [`Geometry::index`].
    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        debug_assert!(index < self.voxel_count());
        let x = index % self.dims[0];
        let rest = index / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    /// Whether two grids can be combined voxel-wise: identical dims and
    /// spacing equal within [`SPACING_REL_TOL`] relative tolerance.
    pub fn compatible(&self, other: &Geometry) -> bool {
        self.dims == other.dims
            && self
                .spacing
                .iter()
                .zip(other.spacing.iter())
                .all(|(a, b)| (a - b).abs() <= SPACING_REL_TOL * a.abs().max(b.abs()))
    }

    pub fn ensure_compatible(&self, other: &Geometry) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "dims {:?} / spacing {:?} vs dims {:?} / spacing {:?}",
                self.dims, self.spacing, other.dims, other.spacing
            )))
        }
    }
}

/// Physical meaning of the stored scalar values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntensityUnit {
    /// Hounsfield units from a CT reconstruction.
    Hounsfield,
    /// Dimensionless values produced by intensity normalization.
    Normalized,
    /// 8-bit display values produced by windowing.
    Display8Bit,
}

/// Element type of a stored volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarKind {
    U8,
    I16,
    F32,
}

/// Voxel payload in one of the supported element types.
#[derive(Clone, Debug, PartialEq)]
pub enum VoxelData {
    U8(Vec<u8>),
    I16(Vec<i16>),
    F32(Vec<f32>),
}

impl VoxelData {
    pub fn len(&self) -> usize {
        match self {
            VoxelData::U8(v) => v.len(),
            VoxelData::I16(v) => v.len(),
            VoxelData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ScalarKind {
        match self {
            VoxelData::U8(_) => ScalarKind::U8,
            VoxelData::I16(_) => ScalarKind::I16,
            VoxelData::F32(_) => ScalarKind::F32,
        }
    }

    /// Value at a linear index, widened to f64.
    #[inline]
    pub fn get(&self, index: usize) -> f64 {
        match self {
            VoxelData::U8(v) => f64::from(v[index]),
            VoxelData::I16(v) => f64::from(v[index]),
            VoxelData::F32(v) => f64::from(v[index]),
        }
    }
}

/// A dense scalar volume: geometry, intensity unit, and voxel payload.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    geometry: Geometry,
    unit: IntensityUnit,
    data: VoxelData,
}

impl Volume {
    /// Wraps a payload, rejecting a length that does not match the geometry.
    pub fn new(geometry: Geometry, unit: IntensityUnit, data: VoxelData) -> Result<Self> {
        let expected = geometry.voxel_count();
        if data.len() != expected {
            return Err(Error::DataLengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            geometry,
            unit,
            data,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn unit(&self) -> IntensityUnit {
        self.unit
    }

    pub fn data(&self) -> &VoxelData {
        &self.data
    }

    /// Value at a linear index, widened to f64.
    #[inline]
    pub fn value(&self, index: usize) -> f64 {
        self.data.get(index)
    }
}

/// A binary segmentation mask on a voxel grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMask {
    geometry: Geometry,
    bits: Vec<bool>,
}

impl BinaryMask {
    /// Wraps a bit vector, rejecting a length that does not match the grid.
    pub fn new(geometry: Geometry, bits: Vec<bool>) -> Result<Self> {
        let expected = geometry.voxel_count();
        if bits.len() != expected {
            return Err(Error::DataLengthMismatch {
                expected,
                actual: bits.len(),
            });
        }
        Ok(Self { geometry, bits })
    }

    /// All-background mask on the given grid.
    pub fn blank(geometry: Geometry) -> Self {
        let n = geometry.voxel_count();
        Self {
            geometry,
            bits: vec![false; n],
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.geometry.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.geometry.index(x, y, z);
        self.bits[i] = value;
    }

    /// Number of foreground voxels.
    pub fn voxel_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// True when no voxel is set.
    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }
}

/// Axis-aligned voxel-index box, inclusive on both ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VoxelBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl VoxelBox {
    /// Smallest box containing both operands.
    pub fn union(&self, other: &VoxelBox) -> VoxelBox {
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for a in 0..3 {
            lo[a] = self.lo[a].min(other.lo[a]);
            hi[a] = self.hi[a].max(other.hi[a]);
        }
        VoxelBox { lo, hi }
    }

    /// Grows the box by `pad` voxels per axis, clamped to the grid.
    pub fn padded(&self, pad: [usize; 3], dims: [usize; 3]) -> VoxelBox {
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for a in 0..3 {
            lo[a] = self.lo[a].saturating_sub(pad[a]);
            hi[a] = (self.hi[a] + pad[a]).min(dims[a] - 1);
        }
        VoxelBox { lo, hi }
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| self.lo[a] <= p[a] && p[a] <= self.hi[a])
    }
}

/// Foreground voxels are those with value strictly greater than `threshold`.
/// NaN values never pass the comparison and land in the background.
pub fn threshold_to_mask(volume: &Volume, threshold: f64) -> BinaryMask {
    let bits = match volume.data() {
        VoxelData::U8(v) => v.iter().map(|&x| f64::from(x) > threshold).collect(),
        VoxelData::I16(v) => v.iter().map(|&x| f64::from(x) > threshold).collect(),
        VoxelData::F32(v) => v.iter().map(|&x| f64::from(x) > threshold).collect(),
    };
    BinaryMask {
        geometry: *volume.geometry(),
        bits,
    }
}

/// Encodes a mask as an 8-bit volume with foreground = 1, so it can be
/// persisted like any other volume. `threshold_to_mask` at any threshold in
/// [0, 1) recovers the mask exactly.
pub fn mask_to_volume(mask: &BinaryMask) -> Volume {
    let bytes: Vec<u8> = mask.bits.iter().map(|&b| b as u8).collect();
    Volume {
        geometry: mask.geometry,
        unit: IntensityUnit::Display8Bit,
        data: VoxelData::U8(bytes),
    }
}

/// Tight bounding box of the foreground, or `None` for an empty mask.
pub fn bounding_box(mask: &BinaryMask) -> Option<VoxelBox> {
    let [nx, ny, nz] = mask.geometry.dims;
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    let mut idx = 0;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if mask.bits[idx] {
                    any = true;
                    let p = [x, y, z];
                    for a in 0..3 {
                        lo[a] = lo[a].min(p[a]);
                        hi[a] = hi[a].max(p[a]);
                    }
                }
                idx += 1;
            }
        }
    }
    any.then_some(VoxelBox { lo, hi })
}
