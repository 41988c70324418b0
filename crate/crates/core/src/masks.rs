//! Voxelwise set operations on binary masks and millimetre margin expansion.
//!
//! Margin expansion is a closed Euclidean ball around the input: a voxel is
//! included when its center lies within the margin of some input voxel
//! center, with anisotropic spacing taken into account. The comparison runs
//! on squared distances straight out of the distance transform, restricted
//! to a bounding box padded far enough that nothing outside it can qualify.

use crate::distance::{box_dims, squared_distances_in_box};
use crate::error::{Error, Result};
use crate::volume::{bounding_box, BinaryMask};

/// A non-negative expansion margin in millimetres.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarginSpec {
    margin_mm: f64,
}

impl MarginSpec {
    pub fn new(margin_mm: f64) -> Result<Self> {
        if !margin_mm.is_finite() || margin_mm < 0.0 {
            return Err(Error::DomainError(format!(
                "margin must be finite and non-negative, got {margin_mm} mm"
            )));
        }
        Ok(Self { margin_mm })
    }

    pub fn margin_mm(&self) -> f64 {
        self.margin_mm
    }
}

/// Voxelwise OR over one or more masks on the same grid.
pub fn union(masks: &[BinaryMask]) -> Result<BinaryMask> {
    let Some((first, rest)) = masks.split_first() else {
        return Err(Error::EmptyInput("union of no masks".into()));
    };
    let mut out = first.clone();
    for m in rest {
        out.geometry().ensure_compatible(m.geometry())?;
        for (o, &b) in out.bits_mut().iter_mut().zip(m.bits()) {
            *o |= b;
        }
    }
    Ok(out)
}

/// Voxels of `a` that are not in `b`.
pub fn subtract(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    a.geometry().ensure_compatible(b.geometry())?;
    let bits = a
        .bits()
        .iter()
        .zip(b.bits())
        .map(|(&x, &y)| x && !y)
        .collect();
    BinaryMask::new(*a.geometry(), bits)
}

/// All voxels whose center is within the margin of some input voxel center.
/// A zero margin reproduces the input exactly.
pub fn expand_margin(mask: &BinaryMask, margin: MarginSpec) -> Result<BinaryMask> {
    let Some(tight) = bounding_box(mask) else {
        return Err(Error::EmptySeeds);
    };
    let g = *mask.geometry();
    let mut pad = [0usize; 3];
    for a in 0..3 {
        pad[a] = (margin.margin_mm / g.spacing[a]).ceil() as usize + 1;
    }
    let bx = tight.padded(pad, g.dims);
    let field = squared_distances_in_box(mask, bx);
    let bd = box_dims(&bx);
    let limit = margin.margin_mm * margin.margin_mm;

    let mut out = BinaryMask::blank(g);
    let bits = out.bits_mut();
    for z in 0..bd[2] {
        for y in 0..bd[1] {
            let src = bd[0] * (y + bd[1] * z);
            let dst = g.index(bx.lo[0], y + bx.lo[1], z + bx.lo[2]);
            for x in 0..bd[0] {
                bits[dst + x] = field[src + x] <= limit;
            }
        }
    }
    Ok(out)
}

/// Union of per-part margin expansions: each target volume grows by its own
/// margin and the results merge into a single planning volume.
pub fn build_ptv(parts: &[(&BinaryMask, MarginSpec)]) -> Result<BinaryMask> {
    if parts.is_empty() {
        return Err(Error::EmptyInput("planning volume needs at least one part".into()));
    }
    let expanded = parts
        .iter()
        .map(|(mask, margin)| expand_margin(mask, *margin))
        .collect::<Result<Vec<_>>>()?;
    union(&expanded)
}
