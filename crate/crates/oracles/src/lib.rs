//! Reference implementations for cross-checking the main library in tests.
//!
//! Everything here trades speed for obviousness: all-pairs scans instead of
//! separable transforms, direct set counting, and adaptive quadrature instead
//! of continued-fraction special functions. Masks are plain `&[bool]` slices
//! in x-fastest order with explicit dims and spacing, so this crate shares no
//! code with the types it is used to check.

/// Squared distance from every voxel center to the nearest seed center,
/// by scanning all seeds for every voxel. Infinity where there are no seeds.
pub fn edt_squared(seeds: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Vec<f64> {
    let pts = voxel_points(seeds, dims);
    let [nx, ny, nz] = dims;
    let mut out = Vec::with_capacity(nx * ny * nz);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                out.push(nearest_squared([x, y, z], &pts, spacing));
            }
        }
    }
    out
}

/// Foreground voxels with any of the six face neighbours in the background;
/// the outside of the grid counts as background.
pub fn surface(mask: &[bool], dims: [usize; 3]) -> Vec<bool> {
    let [nx, ny, nz] = dims;
    let at = |x: usize, y: usize, z: usize| mask[x + nx * (y + ny * z)];
    let mut out = vec![false; mask.len()];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if !at(x, y, z) {
                    continue;
                }
                let exposed = (x == 0 || !at(x - 1, y, z))
                    || (x + 1 == nx || !at(x + 1, y, z))
                    || (y == 0 || !at(x, y - 1, z))
                    || (y + 1 == ny || !at(x, y + 1, z))
                    || (z == 0 || !at(x, y, z - 1))
                    || (z + 1 == nz || !at(x, y, z + 1));
                out[x + nx * (y + ny * z)] = exposed;
            }
        }
    }
    out
}

/// Distance from each surface voxel of `from` to the nearest surface voxel
/// of `to`, sorted ascending.
pub fn directed_distances(
    from: &[bool],
    to: &[bool],
    dims: [usize; 3],
    spacing: [f64; 3],
) -> Vec<f64> {
    let from_pts = voxel_points(&surface(from, dims), dims);
    let to_pts = voxel_points(&surface(to, dims), dims);
    let mut out: Vec<f64> = from_pts
        .iter()
        .map(|&p| nearest_squared(p, &to_pts, spacing).sqrt())
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Overlap ratio 2|A∩B| / (|A| + |B|); 1.0 when both sets are empty.
pub fn dice(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(&x, &y)| x && y).count();
    let total = a.iter().filter(|&&x| x).count() + b.iter().filter(|&&x| x).count();
    if total == 0 {
        1.0
    } else {
        2.0 * inter as f64 / total as f64
    }
}

/// Quantile of an ascending sequence at rank `(n - 1) * q` with linear
/// interpolation between the two closest ranks.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let rank = (sorted.len() - 1) as f64 * q;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let w = rank - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Larger of the two directed maxima over surface distances.
pub fn hausdorff(a: &[bool], b: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> f64 {
    let ab = directed_distances(a, b, dims, spacing);
    let ba = directed_distances(b, a, dims, spacing);
    ab.last().unwrap().max(*ba.last().unwrap())
}

/// Larger of the two directed 95th percentiles over surface distances.
pub fn hd95(a: &[bool], b: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> f64 {
    let ab = directed_distances(a, b, dims, spacing);
    let ba = directed_distances(b, a, dims, spacing);
    percentile(&ab, 0.95).max(percentile(&ba, 0.95))
}

/// Voxels whose center lies within `margin_mm` of any foreground voxel
/// center, by scanning all foreground voxels for every grid voxel.
pub fn expand(mask: &[bool], dims: [usize; 3], spacing: [f64; 3], margin_mm: f64) -> Vec<bool> {
    let pts = voxel_points(mask, dims);
    let limit = margin_mm * margin_mm;
    let [nx, ny, nz] = dims;
    let mut out = Vec::with_capacity(mask.len());
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                out.push(nearest_squared([x, y, z], &pts, spacing) <= limit);
            }
        }
    }
    out
}

fn voxel_points(mask: &[bool], dims: [usize; 3]) -> Vec<[usize; 3]> {
    let [nx, ny, _] = dims;
    mask.iter()
        .enumerate()
        .filter(|(_, &set)| set)
        .map(|(i, _)| [i % nx, (i / nx) % ny, i / (nx * ny)])
        .collect()
}

fn nearest_squared(p: [usize; 3], seeds: &[[usize; 3]], spacing: [f64; 3]) -> f64 {
    seeds
        .iter()
        .map(|s| {
            (0..3)
                .map(|a| {
                    let d = (p[a] as f64 - s[a] as f64) * spacing[a];
                    d * d
                })
                .sum()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Adaptive Simpson quadrature to absolute tolerance `eps`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    let c = 0.5 * (a + b);
    let (fa, fb, fc) = (f(a), f(b), f(c));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_step(f, a, b, fa, fb, fc, whole, eps, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let l = 0.5 * (a + c);
    let r = 0.5 * (c + b);
    let (fl, fr) = (f(l), f(r));
    let left = (c - a) / 6.0 * (fa + 4.0 * fl + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fr + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, c, fa, fc, fl, left, 0.5 * eps, depth - 1)
            + simpson_step(f, c, b, fc, fb, fr, right, 0.5 * eps, depth - 1)
    }
}

/// Integrates with a coarse pass to size the tolerance, then a tight pass.
fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let rough = adaptive_simpson(f, a, b, 1e-6).abs().max(1e-300);
    adaptive_simpson(f, a, b, rough * 1e-12)
}

/// Upper-tail probability of the chi-squared distribution, as the ratio of
/// two quadratures of the (unnormalized) density. The substitution u = v^2
/// removes the integrable singularity at zero for df = 1.
pub fn chi2_survival(x: f64, df: u32) -> f64 {
    assert!(df >= 1 && x >= 0.0);
    let a = f64::from(df) / 2.0;
    // u^(a-1) e^(-u/2) du  ->  2 v^(2a-1) e^(-v^2/2) dv
    let g = move |v: f64| 2.0 * v.powf(2.0 * a - 1.0) * (-0.5 * v * v).exp();
    let top = x.sqrt() + 16.0;
    let tail = integrate(&g, x.sqrt(), top);
    let full = integrate(&g, 0.0, top);
    tail / full
}

/// Upper-tail probability of Student's t distribution. The substitution
/// x = sqrt(df) tan(theta) maps the density to cos^(df-1) on a finite
/// interval.
pub fn t_survival(t: f64, df: u32) -> f64 {
    assert!(df >= 1);
    let g = move |theta: f64| theta.cos().powi(df as i32 - 1);
    let lo = (t / f64::from(df).sqrt()).atan();
    let half_pi = std::f64::consts::FRAC_PI_2;
    let tail = integrate(&g, lo, half_pi);
    let full = integrate(&g, -half_pi, half_pi);
    tail / full
}

/// Upper-tail probability of the standard normal distribution.
pub fn normal_upper_tail(z: f64) -> f64 {
    let g = |v: f64| (-0.5 * v * v).exp();
    let top = z.abs() + 16.0;
    let tail = integrate(&g, z, top);
    let full = integrate(&g, -top, top);
    tail / full
}
