use std::f64::consts::{PI, TAU};

use nalgebra::Vector2;

use super::ExtentFunction;
use crate::error::{check_dim, Error, Result};

const RADIAL_TOL: f64 = 1e-12;
const MAX_BRACKET_DOUBLINGS: usize = 64;

/// Where the samples of a boundary net are placed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SamplingMode {
    /// Equally spaced body-frame angles `phase + 2 pi k / n`.
    UniformAngle,
    /// Equally spaced in arc length; better for eccentric shapes.
    ArcLength,
}

#[derive(Clone, Debug)]
pub struct NetOptions {
    pub mode: SamplingMode,
    /// Angular offset of the first sample. `None` means `pi / n`, which puts
    /// two samples at +-90 degrees and four samples on the diagonals.
    pub phase: Option<f64>,
    /// Probe points per sample when measuring the covering radius.
    pub probe_factor: usize,
    pub min_probes: usize,
}

impl Default for NetOptions {
    fn default() -> Self {
        NetOptions {
            mode: SamplingMode::UniformAngle,
            phase: None,
            probe_factor: 100,
            min_probes: 1000,
        }
    }
}

/// A finite subset of the extent boundary together with its measured
/// covering radius.
#[derive(Clone, Debug)]
pub struct BoundaryNet {
    pub samples: Vec<Vector2<f64>>,
    /// Body-frame parameter angle of each sample, increasing.
    pub angles: Vec<f64>,
    /// `2 * covering_radius`, the tightest net parameter the probe supports.
    pub tau: f64,
    pub covering_radius: f64,
}

impl BoundaryNet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The same body-frame angles, re-solved on the boundary at state `x`.
    /// The covering radius is unchanged under the rigid motions the built-in
    /// extents undergo, so `tau` is carried over.
    pub fn moved_to(&self, extent: &ExtentFunction, x: &[f64]) -> Result<BoundaryNet> {
        let samples = self
            .angles
            .iter()
            .map(|&a| boundary_point(extent, x, a))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundaryNet {
            samples,
            angles: self.angles.clone(),
            tau: self.tau,
            covering_radius: self.covering_radius,
        })
    }
}

fn require_planar(extent: &ExtentFunction) -> Result<()> {
    if extent.point_dimension() != 2 {
        return Err(Error::Unsupported(
            "boundary sampling is only available for planar extents".into(),
        ));
    }
    Ok(())
}

/// Point where the ray from the extent center at body-frame angle `angle`
/// leaves the extent.
pub fn boundary_point(extent: &ExtentFunction, x: &[f64], angle: f64) -> Result<Vector2<f64>> {
    require_planar(extent)?;
    check_dim("extent state", extent.state_dimension(), x.len())?;
    let center = extent.center(x)?;
    let world = angle + extent.heading(x);
    let dir = Vector2::new(world.cos(), world.sin());
    let e = |r: f64| {
        let p = center + dir * r;
        extent.value_unchecked(x, &[p.x, p.y])
    };

    let e0 = e(0.0);
    if !(e0 < 0.0) {
        return Err(Error::Geometry(format!(
            "extent center is not interior (E = {e0})"
        )));
    }
    let mut hi = 1.0;
    let mut bracketed = false;
    for _ in 0..MAX_BRACKET_DOUBLINGS {
        let v = e(hi);
        if !v.is_finite() {
            break;
        }
        if v > 0.0 {
            bracketed = true;
            break;
        }
        hi *= 2.0;
    }
    if !bracketed {
        return Err(Error::Geometry(format!(
            "no boundary crossing along angle {angle}"
        )));
    }
    // Shrink the bracket first so tiny extents keep full relative accuracy.
    let mut lo = 0.0;
    while hi > 1e-300 && e(hi * 0.5) > 0.0 {
        hi *= 0.5;
    }
    if e(hi * 0.5) <= 0.0 {
        lo = hi * 0.5;
    }
    while hi - lo > RADIAL_TOL * hi.max(1e-3) {
        let mid = 0.5 * (lo + hi);
        if e(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // Of the two bracket ends, keep whichever is closer to the zero level.
    let r = if e(lo).abs() <= e(hi).abs() { lo } else { hi };
    Ok(center + dir * r)
}

fn uniform_angles(n: usize, phase: f64) -> Vec<f64> {
    (0..n).map(|k| phase + TAU * k as f64 / n as f64).collect()
}

/// Angles placing `n` samples at equal arc-length spacing, computed from a
/// dense polygonal approximation of the boundary.
fn arc_length_angles(extent: &ExtentFunction, x: &[f64], n: usize, dense: usize) -> Result<Vec<f64>> {
    let grid = uniform_angles(dense, 0.0);
    let pts = grid
        .iter()
        .map(|&a| boundary_point(extent, x, a))
        .collect::<Result<Vec<_>>>()?;
    let mut cumulative = Vec::with_capacity(dense + 1);
    cumulative.push(0.0);
    for i in 0..dense {
        let d = (pts[(i + 1) % dense] - pts[i]).norm();
        cumulative.push(cumulative[i] + d);
    }
    let total = cumulative[dense];
    let step = total / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let target = step * (k as f64 + 0.5);
        while cumulative[seg + 1] < target {
            seg += 1;
        }
        let frac = (target - cumulative[seg]) / (cumulative[seg + 1] - cumulative[seg]);
        out.push(grid[seg] + frac * TAU / dense as f64);
    }
    Ok(out)
}

/// Largest distance from a boundary point to its nearest sample: a pass over
/// `probes` boundary points at uniform angles starting from zero, then
/// golden-section refinement around every local maximum of the probe pass.
pub fn covering_radius(
    extent: &ExtentFunction,
    x: &[f64],
    samples: &[Vector2<f64>],
    probes: usize,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::contract("covering radius of an empty net"));
    }
    let nearest = |a: f64| -> Result<f64> {
        let p = boundary_point(extent, x, a)?;
        Ok(samples
            .iter()
            .map(|s| (s - p).norm_squared())
            .fold(f64::INFINITY, f64::min)
            .sqrt())
    };
    let probes = probes.max(3);
    let angles = uniform_angles(probes, 0.0);
    let d = angles.iter().map(|&a| nearest(a)).collect::<Result<Vec<_>>>()?;
    let mut worst = d.iter().copied().fold(0.0, f64::max);
    let step = TAU / probes as f64;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for k in 0..probes {
        let (prev, next) = (d[(k + probes - 1) % probes], d[(k + 1) % probes]);
        if d[k] < prev || d[k] < next {
            continue;
        }
        let (mut lo, mut hi) = (angles[k] - step, angles[k] + step);
        let mut c = hi - inv_phi * (hi - lo);
        let mut e = lo + inv_phi * (hi - lo);
        let (mut fc, mut fe) = (nearest(c)?, nearest(e)?);
        while hi - lo > 1e-12 {
            if fc > fe {
                hi = e;
                e = c;
                fe = fc;
                c = hi - inv_phi * (hi - lo);
                fc = nearest(c)?;
            } else {
                lo = c;
                c = e;
                fc = fe;
                e = lo + inv_phi * (hi - lo);
                fe = nearest(e)?;
            }
        }
        worst = worst.max(fc).max(fe);
    }
    Ok(worst)
}

pub fn sample_boundary(extent: &ExtentFunction, x: &[f64], n: usize) -> Result<BoundaryNet> {
    sample_boundary_with(extent, x, n, &NetOptions::default())
}

pub fn sample_boundary_with(
    extent: &ExtentFunction,
    x: &[f64],
    n: usize,
    opts: &NetOptions,
) -> Result<BoundaryNet> {
    if n < 2 {
        return Err(Error::contract("a boundary net needs at least two samples"));
    }
    require_planar(extent)?;
    let probes = (opts.probe_factor * n).max(opts.min_probes);
    let angles = match opts.mode {
        SamplingMode::UniformAngle => uniform_angles(n, opts.phase.unwrap_or(PI / n as f64)),
        SamplingMode::ArcLength => {
            let mut a = arc_length_angles(extent, x, n, probes)?;
            if let Some(phase) = opts.phase {
                a.iter_mut().for_each(|v| *v += phase);
            }
            a
        }
    };
    let samples = angles
        .iter()
        .map(|&a| boundary_point(extent, x, a))
        .collect::<Result<Vec<_>>>()?;
    let covering = covering_radius(extent, x, &samples, probes)?;
    Ok(BoundaryNet {
        samples,
        angles,
        tau: 2.0 * covering,
        covering_radius: covering,
    })
}

/// Minimum of `field` over the extent boundary: a uniform probe with
/// `probes` points followed by golden-section refinement around the best one.
pub fn boundary_minimum<F>(
    extent: &ExtentFunction,
    x: &[f64],
    probes: usize,
    field: F,
) -> Result<(f64, Vector2<f64>)>
where
    F: Fn(&[f64]) -> f64,
{
    let probes = probes.max(8);
    let step = TAU / probes as f64;
    let eval = |a: f64| -> Result<(f64, Vector2<f64>)> {
        let p = boundary_point(extent, x, a)?;
        Ok((field(&[p.x, p.y]), p))
    };
    let mut best = (f64::INFINITY, Vector2::zeros(), 0.0);
    for k in 0..probes {
        let a = step * k as f64;
        let (v, p) = eval(a)?;
        if v < best.0 {
            best = (v, p, a);
        }
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (best.2 - step, best.2 + step);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    for _ in 0..60 {
        if hi - lo < 1e-10 {
            break;
        }
        if fc.0 < fd.0 {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = eval(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = eval(d)?;
        }
    }
    for cand in [fc, fd] {
        if cand.0 < best.0 {
            best = (cand.0, cand.1, 0.0);
        }
    }
    Ok((best.0, best.1))
}
