//! Neumann data at a single point of a flat boundary.
//!
//! A hemisphere of radius `a` is placed on the boundary at `x`. The normal
//! derivative splits into a cap term `sigma1` (walk-on-spheres potentials on
//! the cap weighted by the kernel `h`) and a base term `sigma2` (the
//! Dirichlet data on the flat disk against the hyper-singular kernel
//! `(1/2pi)(1/rho^3 - 1/a^3)`). Both are regularized by subtracting the
//! constant solution `phi(x)`, which leaves the base integrand weakly
//! singular; the disk of radius `delta` about `x` is then dropped at
//! O(delta) cost.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, SolverError};
use crate::geometry::{Rect, Scene, Shape};
use crate::greens::{h_kernel_cos, HemisphereFrame};
use crate::quadrature::{cap_rule, gauss_legendre, ring_rule, GaussRule};
use crate::vec3::Point3;
use crate::wos::{Sampler, WosConfig, WosSampler};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointParams {
    pub a: f64,
    /// Exclusion radius as a fraction of `a`.
    pub delta_ratio: f64,
    pub n_g1: usize,
    pub n_g2: usize,
}

impl Default for PointParams {
    fn default() -> Self {
        Self { a: 0.5, delta_ratio: 1e-4, n_g1: 20, n_g2: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointNeumannResult {
    pub sigma1: f64,
    pub sigma2: f64,
    pub total: f64,
    pub std_error: f64,
    /// Walks launched, `n_g1^2 * n_paths`.
    pub paths: u64,
    pub params: PointParams,
}

/// Hemisphere at a point of a flat boundary, its axis pointing into the
/// solution domain.
pub fn frame_at(scene: &Scene, x: Point3, a: f64) -> Result<HemisphereFrame, SolverError> {
    if !scene.is_flat() {
        return Err(GeometryError::NotFlat(x).into());
    }
    let (d, _) = scene.nearest(x);
    if d > 1e-9 * a.max(1.0) {
        return Err(SolverError::Invalid(format!("point is {d} away from the boundary")));
    }
    let (q, _) = scene.project(x);
    Ok(HemisphereFrame::new(q, a, -scene.outward_normal(q))?)
}

fn phi_at_center(scene: &Scene, frame: &HemisphereFrame) -> Result<f64, SolverError> {
    Ok(scene.eval_dirichlet(frame.center, 1e-9 * frame.radius.max(1.0))?)
}

/// Base-disk term. `delta` is the absolute exclusion radius.
pub fn sigma2_prime(scene: &Scene, frame: &HemisphereFrame, delta: f64, n_g2: usize) -> Result<f64, SolverError> {
    let a = frame.radius;
    if !(delta > 0.0 && delta < a) {
        return Err(crate::error::QuadratureError::BadRing { a, delta }.into());
    }
    if let (Shape::PlateSet { plates }, Some(levels)) = (scene.shape(), scene.constant_levels()) {
        return sigma2_plates(plates, &levels, frame, delta, phi_at_center(scene, frame)?);
    }
    let phi_x = phi_at_center(scene, frame)?;
    let rule = ring_rule(a, delta, n_g2)?;
    let tol = 1e-9 * a.max(1.0);
    let mut sum = 0.0;
    for n in &rule.nodes {
        let y = frame.on_base(n.rho, n.psi);
        let (d, id) = scene.nearest(y);
        if d > tol {
            return Err(SolverError::DataUndefined(format!(
                "base point at rho = {} is {d} off the boundary",
                n.rho
            )));
        }
        let (q, _) = scene.project(y);
        let phi = scene.dirichlet_on(q, id);
        sum += n.weight * (1.0 / n.rho.powi(3) - 1.0 / a.powi(3)) * (phi - phi_x);
    }
    // written so that zero data gives +0 rather than -0
    Ok(0.0 - sum / TAU)
}

/// Radial antiderivative of `rho (1/rho^3 - 1/a^3)`.
#[inline]
fn radial_primitive(rho: f64, a: f64) -> f64 {
    -1.0 / rho - rho * rho / (2.0 * a * a * a)
}

/// Base term for piecewise-constant data on coplanar rectangles, integrated
/// exactly in the radial direction: along each ray from `x` the data is
/// constant on the ray's intersection with each plate. The azimuthal
/// integral is split at every angle where that structure changes and done
/// by Gauss-Legendre on the smooth pieces.
fn sigma2_plates(
    plates: &[Rect],
    levels: &[f64],
    frame: &HemisphereFrame,
    delta: f64,
    phi_x: f64,
) -> Result<f64, SolverError> {
    let a = frame.radius;
    let c = frame.center;
    let mut breaks = vec![0.0, FRAC_PI_2, PI, 1.5 * PI, TAU];
    let push_line = |breaks: &mut Vec<f64>, off: f64, vertical: bool| {
        for r in [delta, a] {
            if off.abs() <= r {
                let s = (r * r - off * off).sqrt();
                for t in [s, -s] {
                    let ang = if vertical { t.atan2(off) } else { off.atan2(t) };
                    breaks.push(ang.rem_euclid(TAU));
                }
            }
        }
    };
    for p in plates {
        for (x, y) in [(p.x0, p.y0), (p.x1, p.y0), (p.x0, p.y1), (p.x1, p.y1)] {
            breaks.push((y - c.y).atan2(x - c.x).rem_euclid(TAU));
        }
        push_line(&mut breaks, p.x0 - c.x, true);
        push_line(&mut breaks, p.x1 - c.x, true);
        push_line(&mut breaks, p.y0 - c.y, false);
        push_line(&mut breaks, p.y1 - c.y, false);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|u, v| (*u - *v).abs() < 1e-14);

    let g: GaussRule = gauss_legendre(32)?;
    let mut total = 0.0;
    for w in breaks.windows(2) {
        if w[1] - w[0] < 1e-15 {
            continue;
        }
        for (psi, wt) in g.on(w[0], w[1]) {
            let (s, co) = psi.sin_cos();
            let mut covered = 0.0;
            let mut ray = 0.0;
            for (p, &level) in plates.iter().zip(levels) {
                let Some((t0, t1)) = ray_rect(c.x, c.y, co, s, p) else { continue };
                let (t0, t1) = (t0.max(delta), t1.min(a));
                if t1 <= t0 {
                    continue;
                }
                covered += t1 - t0;
                ray += (level - phi_x) * (radial_primitive(t1, a) - radial_primitive(t0, a));
            }
            if covered < (a - delta) * (1.0 - 1e-9) {
                return Err(SolverError::DataUndefined(format!(
                    "disk of radius {a} leaves the plates in direction {psi:.6}"
                )));
            }
            total += wt * ray;
        }
    }
    Ok(0.0 - total / TAU)
}

/// Parameter interval `[t0, t1]` (t >= 0) where the ray `(x, y) + t (cx, cy)`
/// lies in the rectangle.
fn ray_rect(x: f64, y: f64, cx: f64, cy: f64, r: &Rect) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for (p, d, a, b) in [(x, cx, r.x0, r.x1), (y, cy, r.y0, r.y1)] {
        if d.abs() < 1e-300 {
            if p < a || p > b {
                return None;
            }
        } else {
            let (u, v) = ((a - p) / d, (b - p) / d);
            lo = lo.max(u.min(v));
            hi = hi.min(u.max(v));
        }
    }
    (hi > lo).then_some((lo, hi))
}

/// Cap term with its standard error.
pub fn sigma1_prime<S: Sampler + ?Sized>(
    scene: &Scene,
    frame: &HemisphereFrame,
    n_g1: usize,
    sampler: &S,
    first_id: u64,
) -> Result<(f64, f64), SolverError> {
    let a = frame.radius;
    let phi_x = phi_at_center(scene, frame)?;
    let rule = cap_rule(frame, n_g1)?;
    let points: Vec<Point3> = rule.nodes.iter().map(|n| n.point).collect();
    let est = sampler.sample(&points, first_id)?;
    let mut sum = 0.0;
    let mut var = 0.0;
    for (n, e) in rule.nodes.iter().zip(&est) {
        let w = n.weight * h_kernel_cos(a, n.theta.cos());
        sum += w * (e.mean - phi_x);
        var += (w * e.std_error()).powi(2);
    }
    Ok((-sum, var.sqrt()))
}

pub fn solve_point_with<S: Sampler + ?Sized>(
    scene: &Scene,
    frame: &HemisphereFrame,
    params: &PointParams,
    sampler: &S,
    first_id: u64,
) -> Result<PointNeumannResult, SolverError> {
    if frame.radius != params.a {
        return Err(SolverError::Invalid("frame radius differs from params.a".into()));
    }
    let sigma2 = sigma2_prime(scene, frame, params.delta_ratio * params.a, params.n_g2)?;
    let (sigma1, std_error) = sigma1_prime(scene, frame, params.n_g1, sampler, first_id)?;
    Ok(PointNeumannResult {
        sigma1,
        sigma2,
        total: sigma1 + sigma2,
        std_error,
        paths: (params.n_g1 * params.n_g1) as u64 * sampler.paths_per_point(),
        params: *params,
    })
}

/// Neumann data at `x` along the outward normal of the solution domain.
pub fn solve_point(
    scene: &Scene,
    x: Point3,
    params: &PointParams,
    cfg: &WosConfig,
) -> Result<PointNeumannResult, SolverError> {
    let frame = frame_at(scene, x, params.a)?;
    solve_point_with(scene, &frame, params, &WosSampler { scene, cfg: *cfg }, 0)
}
