//! Dense first-kind single-layer BEM for flat conductors in `z = 0`: an
//! independent oracle for the walk-on-spheres solvers.
//!
//! Plates are split into rectangular panels whose single-layer integrals
//! have closed forms. The disk uses axisymmetric ring elements, integrating
//! the ring potential (a complete elliptic integral) numerically in the
//! radial direction. Densities are totals over both faces of the
//! zero-thickness conductor; [`ReferenceSolution::density_at`] reports one face.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::geometry::{Rect, Scene, Shape};
use crate::quadrature::gauss_legendre;
use crate::vec3::{Point3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectPanel {
    pub plate: usize,
    pub rect: Rect,
}

impl RectPanel {
    pub fn centroid(&self) -> Point3 {
        let r = &self.rect;
        Vec3::new(0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1), 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReferenceSolution {
    Plates {
        n_per_side: usize,
        plates: Vec<Rect>,
        panels: Vec<RectPanel>,
        /// Density summed over both faces, per panel.
        sigma: Vec<f64>,
    },
    Disk {
        radius: f64,
        /// Ring edges, `n + 1` radii from 0 to the rim.
        edges: Vec<f64>,
        sigma: Vec<f64>,
    },
}

/// `int int dx dy / sqrt(x^2 + y^2)` antiderivative.
#[inline]
fn prim(x: f64, y: f64) -> f64 {
    let mut s = 0.0;
    if x != 0.0 {
        s += x * (y / x.abs()).asinh();
    }
    if y != 0.0 {
        s += y * (x / y.abs()).asinh();
    }
    s
}

/// `(1/4pi) int_rect dA / |p - y|` for `p` in the plane of the rectangle.
pub fn rect_single_layer(p: Point3, r: &Rect) -> f64 {
    let (x1, x2, y1, y2) = (r.x0 - p.x, r.x1 - p.x, r.y0 - p.y, r.y1 - p.y);
    (prim(x2, y2) - prim(x1, y2) - prim(x2, y1) + prim(x1, y1)) / (4.0 * PI)
}

/// Complete elliptic integral of the first kind `K(m)` by the
/// arithmetic-geometric mean.
pub fn ellip_k(m: f64) -> f64 {
    ellip_k_comp((1.0 - m).max(0.0).sqrt())
}

/// `K` in terms of the complementary modulus `k' = sqrt(1 - m)`.
fn ellip_k_comp(kp: f64) -> f64 {
    let (mut a, mut b) = (1.0f64, kp);
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    PI / (2.0 * a)
}

/// Potential at radius `rho` in the plane of a unit-density ring of radius
/// `s`, per unit radial width: `(1/4pi) s int_0^2pi dpsi / |...|`.
#[inline]
fn ring_kernel(rho: f64, s: f64) -> f64 {
    let sum = rho + s;
    s * 4.0 * ellip_k_comp((rho - s).abs() / sum) / (sum * 4.0 * PI)
}

pub fn solve_charge_density(scene: &Scene, n: usize) -> Result<ReferenceSolution, SolverError> {
    if n == 0 {
        return Err(SolverError::Invalid("need at least one panel per side".into()));
    }
    match scene.shape() {
        Shape::PlateSet { plates } => solve_plates(scene, plates, n),
        Shape::ThinDisk { radius } => solve_disk(scene, *radius, n),
        _ => Err(SolverError::Invalid("reference BEM handles plate sets and thin disks".into())),
    }
}

fn dense_solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<Vec<f64>, SolverError> {
    let lu = a.clone().lu();
    let x = lu.solve(&b).ok_or_else(|| SolverError::SingularSystem("reference BEM matrix".into()))?;
    let res = (&a * &x - &b).norm() / b.norm().max(f64::MIN_POSITIVE);
    if !(res <= 1e-10) {
        return Err(SolverError::SingularSystem(format!("relative residual {res:e}")));
    }
    Ok(x.iter().copied().collect())
}

fn solve_plates(scene: &Scene, plates: &[Rect], n: usize) -> Result<ReferenceSolution, SolverError> {
    let mut panels = Vec::with_capacity(plates.len() * n * n);
    for (k, p) in plates.iter().enumerate() {
        let (dx, dy) = ((p.x1 - p.x0) / n as f64, (p.y1 - p.y0) / n as f64);
        for i in 0..n {
            for j in 0..n {
                let x0 = p.x0 + dx * i as f64;
                let y0 = p.y0 + dy * j as f64;
                panels.push(RectPanel { plate: k, rect: Rect::new(x0, x0 + dx, y0, y0 + dy) });
            }
        }
    }
    let m = panels.len();
    let rows: Vec<Vec<f64>> = panels
        .par_iter()
        .map(|pi| {
            let c = pi.centroid();
            panels.iter().map(|pj| rect_single_layer(c, &pj.rect)).collect()
        })
        .collect();
    let a = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
    let b = DVector::from_iterator(m, panels.iter().map(|p| scene.dirichlet_on(p.centroid(), p.plate)));
    let sigma = dense_solve(a, b)?;
    Ok(ReferenceSolution::Plates { n_per_side: n, plates: plates.to_vec(), panels, sigma })
}

fn solve_disk(scene: &Scene, b: f64, n: usize) -> Result<ReferenceSolution, SolverError> {
    // edges cluster toward the rim, where the density is singular
    let edges: Vec<f64> = (0..=n).map(|k| b * (0.5 * PI * k as f64 / n as f64).sin()).collect();
    let mids: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut rhs = Vec::with_capacity(n);
    for &r in &mids {
        let v0 = scene.dirichlet_on(Vec3::new(r, 0.0, 0.0), 0);
        for t in [0.7, 2.1, 4.4] {
            let v = scene.dirichlet_on(Vec3::new(r * f64::cos(t), r * f64::sin(t), 0.0), 0);
            if (v - v0).abs() > 1e-12 * v0.abs().max(1.0) {
                return Err(SolverError::Invalid("disk reference needs axisymmetric data".into()));
            }
        }
        rhs.push(v0);
    }
    let g = gauss_legendre(20)?;
    // integral of ring_kernel over [lo, hi], with t^2 grading toward `e`,
    // the end nearest the log singularity at `rho`
    let piece = |rho: f64, lo: f64, hi: f64| -> f64 {
        let (e, len, sign) = if (rho - lo).abs() <= (rho - hi).abs() { (lo, hi - lo, 1.0) } else { (hi, hi - lo, -1.0) };
        g.on(0.0, len.sqrt()).map(|(t, w)| w * 2.0 * t * ring_kernel(rho, e + sign * t * t)).sum()
    };
    let rows: Vec<Vec<f64>> = mids
        .par_iter()
        .map(|&rho| {
            edges
                .windows(2)
                .map(|w| {
                    if rho > w[0] && rho < w[1] {
                        piece(rho, w[0], rho) + piece(rho, rho, w[1])
                    } else {
                        piece(rho, w[0], w[1])
                    }
                })
                .collect()
        })
        .collect();
    let a = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let sigma = dense_solve(a, DVector::from_vec(rhs))?;
    Ok(ReferenceSolution::Disk { radius: b, edges, sigma })
}

impl ReferenceSolution {
    pub fn panel_count(&self) -> usize {
        match self {
            Self::Plates { panels, .. } => panels.len(),
            Self::Disk { sigma, .. } => sigma.len(),
        }
    }

    /// Total charge (both faces).
    pub fn total_charge(&self) -> f64 {
        match self {
            Self::Plates { panels, sigma, .. } => panels.iter().zip(sigma).map(|(p, s)| s * p.rect.area()).sum(),
            Self::Disk { edges, sigma, .. } => {
                edges.windows(2).zip(sigma).map(|(w, s)| s * PI * (w[1] * w[1] - w[0] * w[0])).sum()
            }
        }
    }

    /// Charge density on one face at a point of the conductor, interpolated
    /// (bilinearly on plates, linearly in radius on the disk) between
    /// panel centres and held constant beyond the outermost centres.
    pub fn density_at(&self, p: Point3) -> Result<f64, SolverError> {
        match self {
            Self::Plates { n_per_side, plates, sigma, .. } => {
                let n = *n_per_side;
                let k = plates
                    .iter()
                    .position(|r| r.contains_xy(p.x, p.y))
                    .ok_or_else(|| SolverError::Invalid("query point is not on a plate".into()))?;
                let r = &plates[k];
                let fx = ((p.x - r.x0) / (r.x1 - r.x0) * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
                let fy = ((p.y - r.y0) / (r.y1 - r.y0) * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
                let (i, j) = ((fx.floor() as usize).min(n.saturating_sub(2)), (fy.floor() as usize).min(n.saturating_sub(2)));
                let at = |i: usize, j: usize| sigma[k * n * n + i.min(n - 1) * n + j.min(n - 1)];
                let (tx, ty) = (fx - i as f64, fy - j as f64);
                let v = (1.0 - tx) * (1.0 - ty) * at(i, j)
                    + tx * (1.0 - ty) * at(i + 1, j)
                    + (1.0 - tx) * ty * at(i, j + 1)
                    + tx * ty * at(i + 1, j + 1);
                Ok(0.5 * v)
            }
            Self::Disk { radius, edges, sigma } => {
                let rho = p.x.hypot(p.y);
                if rho > *radius {
                    return Err(SolverError::Invalid("query point is off the disk".into()));
                }
                let mids: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
                let k = mids.partition_point(|&m| m <= rho);
                let v = if k == 0 {
                    sigma[0]
                } else if k == mids.len() {
                    sigma[k - 1]
                } else {
                    let t = (rho - mids[k - 1]) / (mids[k] - mids[k - 1]);
                    (1.0 - t) * sigma[k - 1] + t * sigma[k]
                };
                Ok(0.5 * v)
            }
        }
    }
}
