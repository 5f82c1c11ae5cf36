//! Self-contained SVG plot: safe-set zero contour, extent outlines and the
//! reference-point path.

use std::fmt::Write as _;

use nalgebra::Vector2;

use super::config::Scenario;
use super::run::Trajectory;
use crate::error::Result;
use crate::geometry::{boundary_point, ExtentFunction, SafeFunction, SafeKind};

const WIDTH: f64 = 640.0;
const GRID: usize = 240;
const OUTLINE_POINTS: usize = 96;

/// Boundary points of the extent at `x`, equally spaced in body angle.
pub fn extent_outline(extent: &ExtentFunction, x: &[f64], points: usize) -> Result<Vec<Vector2<f64>>> {
    (0..points)
        .map(|k| boundary_point(extent, x, std::f64::consts::TAU * k as f64 / points as f64))
        .collect()
}

/// Zero-level segments of `h` over the box by marching squares.
pub fn zero_contour(
    safe: &SafeFunction,
    lo: Vector2<f64>,
    hi: Vector2<f64>,
    grid: usize,
) -> Result<Vec<[Vector2<f64>; 2]>> {
    let dx = (hi.x - lo.x) / grid as f64;
    let dy = (hi.y - lo.y) / grid as f64;
    let at = |i: usize, j: usize| Vector2::new(lo.x + i as f64 * dx, lo.y + j as f64 * dy);
    let mut vals = vec![0.0; (grid + 1) * (grid + 1)];
    for j in 0..=grid {
        for i in 0..=grid {
            let p = at(i, j);
            vals[j * (grid + 1) + i] = safe.value(&[p.x, p.y])?;
        }
    }
    let v = |i: usize, j: usize| vals[j * (grid + 1) + i];
    let mut segs = Vec::new();
    for j in 0..grid {
        for i in 0..grid {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let mut cross = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (corners[e], corners[(e + 1) % 4]);
                let (va, vb) = (v(a.0, a.1), v(b.0, b.1));
                if (va >= 0.0) != (vb >= 0.0) {
                    let s = va / (va - vb);
                    cross.push(at(a.0, a.1) + (at(b.0, b.1) - at(a.0, a.1)) * s);
                }
            }
            // saddle cells produce four crossings; pair them in edge order
            for pair in cross.chunks_exact(2) {
                segs.push([pair[0], pair[1]]);
            }
        }
    }
    Ok(segs)
}

fn safe_bounds(safe: &SafeFunction) -> Option<(Vector2<f64>, Vector2<f64>)> {
    match safe.kind() {
        SafeKind::Ball { center, radius } if center.len() == 2 => Some((
            Vector2::new(center[0] - radius, center[1] - radius),
            Vector2::new(center[0] + radius, center[1] + radius),
        )),
        _ => None,
    }
}

/// Renders the run. Without a scenario only the path is drawn.
pub fn render(sc: Option<&Scenario>, traj: &Trajectory, stride: usize) -> Result<String> {
    let path: Vec<Vector2<f64>> = traj
        .steps
        .iter()
        .map(|s| &s.x)
        .chain(std::iter::once(&traj.terminal_state))
        .filter(|x| x.len() >= 2)
        .map(|x| Vector2::new(x[0], x[1]))
        .collect();
    let mut outlines = Vec::new();
    if let Some(sc) = sc {
        let stride = stride.max(1);
        for s in traj.steps.iter().step_by(stride) {
            outlines.push(extent_outline(&sc.extent, &s.x, OUTLINE_POINTS)?);
        }
        if !traj.terminal_state.is_empty() {
            outlines.push(extent_outline(&sc.extent, &traj.terminal_state, OUTLINE_POINTS)?);
        }
    }

    let mut lo = Vector2::repeat(f64::INFINITY);
    let mut hi = Vector2::repeat(f64::NEG_INFINITY);
    let mut grow = |p: &Vector2<f64>| {
        lo = lo.inf(p);
        hi = hi.sup(p);
    };
    path.iter().chain(outlines.iter().flatten()).for_each(&mut grow);
    if let Some((a, b)) = sc.and_then(|s| safe_bounds(&s.safe)) {
        grow(&a);
        grow(&b);
    }
    if !lo.x.is_finite() {
        lo = Vector2::repeat(-1.0);
        hi = Vector2::repeat(1.0);
    }
    let pad = 0.1 * (hi - lo).max().max(1e-3);
    lo -= Vector2::repeat(pad);
    hi += Vector2::repeat(pad);
    let scale = WIDTH / (hi.x - lo.x);
    let height = (hi.y - lo.y) * scale;
    let px = |p: &Vector2<f64>| ((p.x - lo.x) * scale, (hi.y - p.y) * scale);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.3} {height:.3}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(sc) = sc {
        let segs = zero_contour(&sc.safe, lo, hi, GRID)?;
        let mut d = String::new();
        for [a, b] in &segs {
            let (ax, ay) = px(a);
            let (bx, by) = px(b);
            let _ = write!(d, "M{ax:.2},{ay:.2}L{bx:.2},{by:.2}");
        }
        let _ = writeln!(out, r#"<path id="safe-set" d="{d}" stroke="steelblue" stroke-width="2" fill="none"/>"#);
        for o in &outlines {
            let pts: Vec<String> = o.iter().map(|p| {
                let (x, y) = px(p);
                format!("{x:.2},{y:.2}")
            }).collect();
            let _ = writeln!(
                out,
                r#"<polygon class="extent" points="{}" stroke="darkorange" stroke-width="1" fill="orange" fill-opacity="0.15"/>"#,
                pts.join(" ")
            );
        }
    }
    let pts: Vec<String> = path.iter().map(|p| {
        let (x, y) = px(p);
        format!("{x:.2},{y:.2}")
    }).collect();
    let _ = writeln!(
        out,
        r#"<polyline id="path" points="{}" stroke="black" stroke-width="1.5" fill="none"/>"#,
        pts.join(" ")
    );
    out.push_str("</svg>\n");
    Ok(out)
}
