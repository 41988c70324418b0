//! Deterministic synthetic CT cases with known ground truth.
//!
//! A phantom is a soft-tissue background with three kinds of painted
//! structures: high-intensity bone tubes (~+700 HU), one mid-intensity
//! spleen ellipsoid (~+60 HU), and chains of small node blobs (~+30 HU).
//! Only the contrast ordering matters; nothing is calibrated to a scanner.
//! The planning volume is composed from the structure masks with fixed
//! margins of 2 mm around bone and 5 mm around spleen and nodes.
//!
//! All randomness comes from a ChaCha8 stream seeded from the spec, drawn in
//! a fixed order, so the same spec reproduces the same case bit for bit on
//! any platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distance::{edt, surface_voxels};
use crate::error::{Error, Result};
use crate::masks::{build_ptv, MarginSpec};
use crate::volume::{BinaryMask, Geometry, IntensityUnit, Volume, VoxelData};

const BACKGROUND_HU: i16 = 20;
const NODE_HU: i16 = 30;
const SPLEEN_HU: i16 = 60;
const BONE_HU: i16 = 700;

const BONE_MARGIN_MM: f64 = 2.0;
const SPLEEN_MARGIN_MM: f64 = 5.0;
const NODE_MARGIN_MM: f64 = 5.0;

/// Everything needed to generate one phantom case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub geometry: Geometry,
    pub seed: u64,
    /// Number of bone tubes.
    pub bone_count: usize,
    /// In-plane tube radius range, millimetres.
    pub bone_radius_mm: [f64; 2],
    pub with_spleen: bool,
    /// Per-axis spleen semi-axis range, millimetres.
    pub spleen_radius_mm: [f64; 2],
    pub node_chain_count: usize,
    /// Nodes per chain, inclusive range.
    pub nodes_per_chain: [usize; 2],
    /// Node blob radius range, millimetres.
    pub node_radius_mm: [f64; 2],
    /// Amplitude of uniform additive intensity noise, HU.
    pub noise_hu: f64,
}

impl PhantomSpec {
    /// A small case that generates in well under a second: a 64x64x32 grid
    /// at 1.5 x 1.5 x 3 mm with three bones, a spleen, and two node chains.
    pub fn desk_scale(seed: u64) -> Self {
        Self {
            geometry: Geometry::new([64, 64, 32], [1.5, 1.5, 3.0]).expect("static shape"),
            seed,
            bone_count: 3,
            bone_radius_mm: [3.0, 6.0],
            with_spleen: true,
            spleen_radius_mm: [8.0, 14.0],
            node_chain_count: 2,
            nodes_per_chain: [3, 5],
            node_radius_mm: [2.0, 7.5],
            noise_hu: 4.0,
        }
    }
}

/// One generated case: the CT, the three target masks, the bone mask, and
/// the composed planning volume.
#[derive(Clone, Debug, PartialEq)]
pub struct PhantomCase {
    pub ct: Volume,
    pub ctv_bm: BinaryMask,
    pub ctv_spleen: BinaryMask,
    pub ctv_ln: BinaryMask,
    pub bones: BinaryMask,
    pub ptv: BinaryMask,
}

/// Generates the case described by the spec. Fails with `SpecInfeasible`
/// when a structure cannot fit inside the grid, or when the spec asks for no
/// structures at all (there would be no planning volume).
pub fn generate_phantom(spec: &PhantomSpec) -> Result<PhantomCase> {
    let g = Geometry::new(spec.geometry.dims, spec.geometry.spacing)?;
    for (name, range) in [
        ("bone_radius_mm", spec.bone_radius_mm),
        ("spleen_radius_mm", spec.spleen_radius_mm),
        ("node_radius_mm", spec.node_radius_mm),
    ] {
        if !(range[0].is_finite() && range[1].is_finite() && 0.0 < range[0] && range[0] <= range[1])
        {
            return Err(Error::DomainError(format!(
                "{name} must be a positive ascending range, got {range:?}"
            )));
        }
    }
    if spec.nodes_per_chain[0] > spec.nodes_per_chain[1] {
        return Err(Error::DomainError(format!(
            "nodes_per_chain range {:?} is reversed",
            spec.nodes_per_chain
        )));
    }
    if !(spec.noise_hu.is_finite() && spec.noise_hu >= 0.0) {
        return Err(Error::DomainError(format!(
            "noise_hu must be finite and non-negative, got {}",
            spec.noise_hu
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let size_mm = physical_size(&g);

    let mut bones = BinaryMask::blank(g);
    for _ in 0..spec.bone_count {
        let r = rng.random_range(spec.bone_radius_mm[0]..=spec.bone_radius_mm[1]);
        let cx = sample_fitting(&mut rng, r, size_mm[0], "bone tube")?;
        let cy = sample_fitting(&mut rng, r, size_mm[1], "bone tube")?;
        let mut z0 = rng.random_range(0..g.dims[2]);
        let mut z1 = rng.random_range(0..g.dims[2]);
        if z0 > z1 {
            std::mem::swap(&mut z0, &mut z1);
        }
        paint_tube(&mut bones, [cx, cy], r, [z0, z1]);
    }
    let ctv_bm = bones.clone();

    let mut ctv_spleen = BinaryMask::blank(g);
    if spec.with_spleen {
        let mut radii = [0.0; 3];
        let mut center = [0.0; 3];
        for a in 0..3 {
            radii[a] = rng.random_range(spec.spleen_radius_mm[0]..=spec.spleen_radius_mm[1]);
            center[a] = sample_fitting(&mut rng, radii[a], size_mm[a], "spleen")?;
        }
        paint_ellipsoid(&mut ctv_spleen, center, radii);
    }

    let mut ctv_ln = BinaryMask::blank(g);
    let max_node_r = spec.node_radius_mm[1];
    let step = 2.4 * (spec.node_radius_mm[0] + spec.node_radius_mm[1]) / 2.0;
    for _ in 0..spec.node_chain_count {
        let mut start = [0.0; 3];
        for a in 0..3 {
            start[a] = sample_fitting(&mut rng, max_node_r, size_mm[a], "node chain")?;
        }
        let dir = random_unit(&mut rng);
        let count = rng.random_range(spec.nodes_per_chain[0]..=spec.nodes_per_chain[1]);
        for k in 0..count {
            let r = rng.random_range(spec.node_radius_mm[0]..=spec.node_radius_mm[1]);
            let mut center = [0.0; 3];
            for a in 0..3 {
                let jitter = rng.random_range(-1.0..=1.0);
                let c = start[a] + k as f64 * step * dir[a] + jitter;
                center[a] = c.clamp(r, size_mm[a] - r);
            }
            paint_ellipsoid(&mut ctv_ln, center, [r, r, r]);
        }
    }

    let ct = paint_ct(&g, &bones, &ctv_spleen, &ctv_ln, spec.noise_hu, &mut rng);

    let margins = [
        (&ctv_bm, BONE_MARGIN_MM),
        (&ctv_spleen, SPLEEN_MARGIN_MM),
        (&ctv_ln, NODE_MARGIN_MM),
    ];
    let parts: Vec<(&BinaryMask, MarginSpec)> = margins
        .into_iter()
        .filter(|(mask, _)| !mask.is_empty())
        .map(|(mask, mm)| (mask, MarginSpec::new(mm).expect("static margins")))
        .collect();
    if parts.is_empty() {
        return Err(Error::SpecInfeasible(
            "spec produced no structures, so there is no planning volume".into(),
        ));
    }
    let ptv = build_ptv(&parts)?;

    Ok(PhantomCase {
        ct,
        ctv_bm,
        ctv_spleen,
        ctv_ln,
        bones,
        ptv,
    })
}

/// Degrades a mask into a simulated prediction: whole connected regions are
/// dropped first (`floor(drop_fraction * region_count)` of them, chosen
/// pseudo-randomly), then the boundary is pushed in or out by up to
/// `boundary_noise_mm`, coherently over patches of a few millimetres. Zero
/// noise and zero drop reproduce the input exactly; the same seed always
/// produces the same output.
pub fn perturb_mask(
    mask: &BinaryMask,
    boundary_noise_mm: f64,
    drop_fraction: f64,
    seed: u64,
) -> BinaryMask {
    assert!(!mask.is_empty(), "perturbation needs a non-empty mask");
    assert!(
        boundary_noise_mm.is_finite() && boundary_noise_mm >= 0.0,
        "boundary noise must be finite and non-negative"
    );
    assert!(
        (0.0..1.0).contains(&drop_fraction),
        "drop fraction must lie in [0, 1)"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let regions = connected_regions(mask);
    let drop_count = (drop_fraction * regions.len() as f64).floor() as usize;
    let mut kept = mask.clone();
    if drop_count > 0 {
        let chosen = rand::seq::index::sample(&mut rng, regions.len(), drop_count);
        for region_index in chosen.iter() {
            for &i in &regions[region_index] {
                kept.bits_mut()[i] = false;
            }
        }
    }
    if boundary_noise_mm == 0.0 || kept.is_empty() {
        return kept;
    }

    // Signed distance to the surface shell: 0 on surface voxels, negative
    // inside, positive outside. Zero on the shell matters: it lets noise
    // amplitudes below the voxel spacing still nibble at the boundary.
    let g = *kept.geometry();
    let shell = surface_voxels(&kept);
    let to_shell = edt(&shell).expect("non-empty mask has surface voxels");

    // Piecewise-constant offset field: every cell of a coarse grid moves the
    // boundary by its own amount, so bumps are coherent rather than per-voxel
    // speckle.
    let cell_mm = (2.0 * boundary_noise_mm).max(6.0);
    let mut cells = [0usize; 3];
    for a in 0..3 {
        cells[a] = (physical_size(&g)[a] / cell_mm).floor() as usize + 1;
    }
    let offsets: Vec<f64> = (0..cells[0] * cells[1] * cells[2])
        .map(|_| rng.random_range(-boundary_noise_mm..=boundary_noise_mm))
        .collect();

    let mut out = BinaryMask::blank(g);
    let [nx, ny, nz] = g.dims;
    let mut i = 0;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let signed = if kept.bits()[i] {
                    -to_shell.distance_mm(i)
                } else {
                    to_shell.distance_mm(i)
                };
                let cell = [
                    ((x as f64 * g.spacing[0]) / cell_mm) as usize,
                    ((y as f64 * g.spacing[1]) / cell_mm) as usize,
                    ((z as f64 * g.spacing[2]) / cell_mm) as usize,
                ];
                let t = offsets[cell[0] + cells[0] * (cell[1] + cells[1] * cell[2])];
                out.bits_mut()[i] = signed <= t;
                i += 1;
            }
        }
    }
    out
}

fn physical_size(g: &Geometry) -> [f64; 3] {
    [
        (g.dims[0] - 1) as f64 * g.spacing[0],
        (g.dims[1] - 1) as f64 * g.spacing[1],
        (g.dims[2] - 1) as f64 * g.spacing[2],
    ]
}

fn sample_fitting(rng: &mut ChaCha8Rng, radius: f64, size_mm: f64, what: &str) -> Result<f64> {
    if radius > size_mm - radius {
        return Err(Error::SpecInfeasible(format!(
            "{what} of radius {radius} mm does not fit an axis of {size_mm} mm"
        )));
    }
    Ok(rng.random_range(radius..=size_mm - radius))
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        ];
        let n2: f64 = v.iter().map(|c| c * c).sum();
        if (1e-4..=1.0).contains(&n2) {
            let n = n2.sqrt();
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn paint_ellipsoid(mask: &mut BinaryMask, center_mm: [f64; 3], radii_mm: [f64; 3]) {
    let g = *mask.geometry();
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..3 {
        lo[a] = (((center_mm[a] - radii_mm[a]) / g.spacing[a]).floor().max(0.0)) as usize;
        hi[a] = ((((center_mm[a] + radii_mm[a]) / g.spacing[a]).ceil()) as usize).min(g.dims[a] - 1);
    }
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                let p = [x, y, z];
                let inside: f64 = (0..3)
                    .map(|a| {
                        let d = (p[a] as f64 * g.spacing[a] - center_mm[a]) / radii_mm[a];
                        d * d
                    })
                    .sum();
                if inside <= 1.0 {
                    mask.set(x, y, z, true);
                }
            }
        }
    }
}

fn paint_tube(mask: &mut BinaryMask, center_mm: [f64; 2], radius_mm: f64, z_range: [usize; 2]) {
    let g = *mask.geometry();
    let mut lo = [0usize; 2];
    let mut hi = [0usize; 2];
    for a in 0..2 {
        lo[a] = (((center_mm[a] - radius_mm) / g.spacing[a]).floor().max(0.0)) as usize;
        hi[a] = ((((center_mm[a] + radius_mm) / g.spacing[a]).ceil()) as usize).min(g.dims[a] - 1);
    }
    let r2 = radius_mm * radius_mm;
    for z in z_range[0]..=z_range[1] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                let dx = x as f64 * g.spacing[0] - center_mm[0];
                let dy = y as f64 * g.spacing[1] - center_mm[1];
                if dx * dx + dy * dy <= r2 {
                    mask.set(x, y, z, true);
                }
            }
        }
    }
}

fn paint_ct(
    g: &Geometry,
    bones: &BinaryMask,
    spleen: &BinaryMask,
    nodes: &BinaryMask,
    noise_hu: f64,
    rng: &mut ChaCha8Rng,
) -> Volume {
    let n = g.voxel_count();
    let mut values = vec![BACKGROUND_HU; n];
    for i in 0..n {
        if bones.bits()[i] {
            values[i] = BONE_HU;
        } else if spleen.bits()[i] {
            values[i] = SPLEEN_HU;
        } else if nodes.bits()[i] {
            values[i] = NODE_HU;
        }
    }
    if noise_hu > 0.0 {
        for v in values.iter_mut() {
            *v += rng.random_range(-noise_hu..=noise_hu).round() as i16;
        }
    }
    Volume::new(*g, IntensityUnit::Hounsfield, VoxelData::I16(values)).expect("matching payload")
}

/// Face-connected foreground regions, each as a list of linear indices, in
/// scan order of their first voxel.
fn connected_regions(mask: &BinaryMask) -> Vec<Vec<usize>> {
    let g = mask.geometry();
    let [nx, ny, nz] = g.dims;
    let bits = mask.bits();
    let mut seen = vec![false; bits.len()];
    let mut regions = Vec::new();
    for start in 0..bits.len() {
        if !bits[start] || seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut region = Vec::new();
        while let Some(i) = stack.pop() {
            region.push(i);
            let [x, y, z] = g.coords(i);
            let mut push = |j: usize| {
                if bits[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if x + 1 < nx {
                push(i + 1);
            }
            if y > 0 {
                push(i - nx);
            }
            if y + 1 < ny {
                push(i + nx);
            }
            if z > 0 {
                push(i - nx * ny);
            }
            if z + 1 < nz {
                push(i + nx * ny);
            }
        }
        regions.push(region);
    }
    regions
}
