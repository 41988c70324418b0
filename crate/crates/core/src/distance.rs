//! Exact Euclidean distance transforms on anisotropic grids, and surface
//! distance sampling built on them.
//!
//! The transform is the separable lower-envelope algorithm: one pass per
//! axis, each pass computing an exact 1-D quadratic lower envelope over the
//! squared distances produced by the previous pass. Voxel spacing enters as
//! the physical coordinate of each sample, so anisotropic grids are handled
//! exactly and nothing is resampled. All intermediate values are squared
//! distances in mm^2; with integer spacings they stay integers, which keeps
//! the arithmetic exact.
//!
//! Distances are measured between voxel centers. A surface voxel is a
//! foreground voxel with at least one of its six face neighbours in the
//! background, where everything outside the grid counts as background.

use crate::error::{Error, Result};
use crate::volume::{bounding_box, BinaryMask, Geometry, VoxelBox};

/// Squared Euclidean distance to the nearest seed voxel, at every voxel of a
/// grid.
#[derive(Clone, Debug)]
pub struct DistanceField {
    geometry: Geometry,
    squared: Vec<f64>,
}

impl DistanceField {
    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Squared distances in mm^2, in grid order.
    pub fn squared_mm2(&self) -> &[f64] {
        &self.squared
    }

    /// Distance in millimetres at a linear index.
    #[inline]
    pub fn distance_mm(&self, index: usize) -> f64 {
        self.squared[index].sqrt()
    }
}

/// Foreground voxels with at least one face neighbour (6-connectivity) in
/// the background. Voxels beyond the grid count as background, so foreground
/// touching the grid edge is surface.
pub fn surface_voxels(mask: &BinaryMask) -> BinaryMask {
    let g = *mask.geometry();
    let [nx, ny, nz] = g.dims;
    let bits = mask.bits();
    let mut out = vec![false; bits.len()];
    let sy = nx;
    let sz = nx * ny;
    for z in 0..nz {
        for y in 0..ny {
            let row = nx * (y + ny * z);
            for x in 0..nx {
                let i = row + x;
                if !bits[i] {
                    continue;
                }
                out[i] = x == 0
                    || !bits[i - 1]
                    || x + 1 == nx
                    || !bits[i + 1]
                    || y == 0
                    || !bits[i - sy]
                    || y + 1 == ny
                    || !bits[i + sy]
                    || z == 0
                    || !bits[i - sz]
                    || z + 1 == nz
                    || !bits[i + sz];
            }
        }
    }
    BinaryMask::new(g, out).expect("same shape as input")
}

/// Exact squared Euclidean distance to the nearest seed at every voxel.
pub fn edt(seeds: &BinaryMask) -> Result<DistanceField> {
    if seeds.is_empty() {
        return Err(Error::EmptySeeds);
    }
    let g = *seeds.geometry();
    let full = VoxelBox {
        lo: [0, 0, 0],
        hi: [g.dims[0] - 1, g.dims[1] - 1, g.dims[2] - 1],
    };
    Ok(DistanceField {
        geometry: g,
        squared: squared_distances_in_box(seeds, full),
    })
}

/// Distances from every surface voxel of `from` to the nearest surface voxel
/// of `to`, sorted ascending. One entry per surface voxel of `from`.
pub fn directed_surface_distances(from: &BinaryMask, to: &BinaryMask) -> Result<Vec<f64>> {
    let (from_surface, to_surface, bx) = surface_pair(from, to)?;
    Ok(distances_into(&from_surface, &to_surface, bx))
}

/// Both directed distance sequences of a mask pair, sharing the surface
/// extraction and the transform region between the two directions.
pub fn surface_distance_pair(a: &BinaryMask, b: &BinaryMask) -> Result<(Vec<f64>, Vec<f64>)> {
    let (sa, sb, bx) = surface_pair(a, b)?;
    let ab = distances_into(&sa, &sb, bx);
    let ba = distances_into(&sb, &sa, bx);
    Ok((ab, ba))
}

fn surface_pair(from: &BinaryMask, to: &BinaryMask) -> Result<(BinaryMask, BinaryMask, VoxelBox)> {
    from.geometry().ensure_compatible(to.geometry())?;
    if from.is_empty() {
        return Err(Error::EmptyMask("no source surface to measure from".into()));
    }
    if to.is_empty() {
        return Err(Error::EmptyMask("no target surface to measure to".into()));
    }
    let from_surface = surface_voxels(from);
    let to_surface = surface_voxels(to);

    // The transform only has to cover both surfaces: every voxel read lies
    // inside the union box, all seeds lie inside it too, and distances are
    // point-to-point, so cropping cannot change any sampled value. One voxel
    // of padding keeps the box comfortably clear of degenerate extents.
    let bf = bounding_box(&from_surface).expect("non-empty mask has a surface");
    let bt = bounding_box(&to_surface).expect("non-empty mask has a surface");
    let bx = bf.union(&bt).padded([1, 1, 1], from.geometry().dims);
    Ok((from_surface, to_surface, bx))
}

/// Distance at each `from` surface voxel to the nearest `to` surface voxel,
/// via a transform restricted to `bx`, sorted ascending.
fn distances_into(from_surface: &BinaryMask, to_surface: &BinaryMask, bx: VoxelBox) -> Vec<f64> {
    let field = squared_distances_in_box(to_surface, bx);
    let g = from_surface.geometry();
    let bd = box_dims(&bx);
    let mut out = Vec::new();
    let bits = from_surface.bits();
    for z in bx.lo[2]..=bx.hi[2] {
        for y in bx.lo[1]..=bx.hi[1] {
            let src = g.index(bx.lo[0], y, z);
            let dst = bd[0] * ((y - bx.lo[1]) + bd[1] * (z - bx.lo[2]));
            for x in 0..bd[0] {
                if bits[src + x] {
                    out.push(field[dst + x].sqrt());
                }
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    out
}

pub(crate) fn box_dims(bx: &VoxelBox) -> [usize; 3] {
    [
        bx.hi[0] - bx.lo[0] + 1,
        bx.hi[1] - bx.lo[1] + 1,
        bx.hi[2] - bx.lo[2] + 1,
    ]
}

/// Squared distances to the nearest seed, restricted to `bx` (box-local
/// layout, x fastest). Exact for every voxel in the box provided all seeds
/// lie inside the box.
pub(crate) fn squared_distances_in_box(seeds: &BinaryMask, bx: VoxelBox) -> Vec<f64> {
    let g = seeds.geometry();
    let [bnx, bny, bnz] = box_dims(&bx);
    let mut grid = vec![f64::INFINITY; bnx * bny * bnz];
    let bits = seeds.bits();
    for z in 0..bnz {
        for y in 0..bny {
            let src = g.index(bx.lo[0], y + bx.lo[1], z + bx.lo[2]);
            let dst = bnx * (y + bny * z);
            for x in 0..bnx {
                if bits[src + x] {
                    grid[dst + x] = 0.0;
                }
            }
        }
    }

    let spacing = g.spacing;
    let mut env = Envelope::new(bnx.max(bny).max(bnz));

    // Pass along x: rows are contiguous.
    for row in grid.chunks_mut(bnx) {
        env.transform_line(row, spacing[0]);
    }

    // Passes along y and z gather strided lines through a block of adjacent
    // x positions at a time, which keeps the memory traffic sequential.
    const BLOCK: usize = 64;
    let mut scratch = vec![0.0f64; BLOCK * bny.max(bnz)];

    for z in 0..bnz {
        let slab = bnx * bny * z;
        for x0 in (0..bnx).step_by(BLOCK) {
            let w = BLOCK.min(bnx - x0);
            for y in 0..bny {
                let base = slab + bnx * y + x0;
                for dx in 0..w {
                    scratch[dx * bny + y] = grid[base + dx];
                }
            }
            for line in scratch[..w * bny].chunks_mut(bny) {
                env.transform_line(line, spacing[1]);
            }
            for y in 0..bny {
                let base = slab + bnx * y + x0;
                for dx in 0..w {
                    grid[base + dx] = scratch[dx * bny + y];
                }
            }
        }
    }

    for y in 0..bny {
        let row = bnx * y;
        for x0 in (0..bnx).step_by(BLOCK) {
            let w = BLOCK.min(bnx - x0);
            for z in 0..bnz {
                let base = row + bnx * bny * z + x0;
                for dx in 0..w {
                    scratch[dx * bnz + z] = grid[base + dx];
                }
            }
            for line in scratch[..w * bnz].chunks_mut(bnz) {
                env.transform_line(line, spacing[2]);
            }
            for z in 0..bnz {
                let base = row + bnx * bny * z + x0;
                for dx in 0..w {
                    grid[base + dx] = scratch[dx * bnz + z];
                }
            }
        }
    }

    grid
}

/// Reusable scratch for the 1-D lower-envelope transform.
struct Envelope {
    /// Sample index of each parabola currently on the envelope.
    roots: Vec<usize>,
    /// Input value at each root, captured so evaluation can run in place.
    values: Vec<f64>,
    /// Physical coordinate where parabola k+1 takes over from parabola k.
    /// One entry fewer than `roots`.
    boundaries: Vec<f64>,
}

impl Envelope {
    fn new(max_len: usize) -> Self {
        Self {
            roots: Vec::with_capacity(max_len),
            values: Vec::with_capacity(max_len),
            boundaries: Vec::with_capacity(max_len),
        }
    }

    /// Replaces `f` with the pointwise minimum over i of
    /// `f[i] + ((q - i) * spacing)^2`. Infinite entries contribute no
    /// parabola; a line with no finite entry is left untouched.
    fn transform_line(&mut self, f: &mut [f64], spacing: f64) {
        let n = f.len();
        if n <= 1 {
            return;
        }
        self.roots.clear();
        self.values.clear();
        self.boundaries.clear();

        for q in 0..n {
            let fq = f[q];
            if fq == f64::INFINITY {
                continue;
            }
            let xq = q as f64 * spacing;
            let rooted_q = fq + xq * xq;
            loop {
                let Some(&p) = self.roots.last() else {
                    self.roots.push(q);
                    self.values.push(fq);
                    break;
                };
                let xp = p as f64 * spacing;
                let rooted_p = self.values[self.values.len() - 1] + xp * xp;
                let cross = (rooted_q - rooted_p) / (2.0 * (xq - xp));
                if self.boundaries.last().is_some_and(|&b| cross <= b) {
                    self.roots.pop();
                    self.values.pop();
                    self.boundaries.pop();
                } else {
                    self.roots.push(q);
                    self.values.push(fq);
                    self.boundaries.push(cross);
                    break;
                }
            }
        }
        if self.roots.is_empty() {
            return;
        }

        let mut k = 0;
        for (q, out) in f.iter_mut().enumerate() {
            let xq = q as f64 * spacing;
            while k < self.boundaries.len() && self.boundaries[k] < xq {
                k += 1;
            }
            let dq = (q as f64 - self.roots[k] as f64) * spacing;
            *out = self.values[k] + dq * dq;
        }
    }
}
