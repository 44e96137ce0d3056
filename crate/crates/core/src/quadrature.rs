//! Gauss-Legendre rules and the product rules built from them: the
//! hemispherical cap, the annulus around a boundary point, and triangles
//! (regular and with a singular point).

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::QuadratureError;
use crate::greens::HemisphereFrame;
use crate::vec3::{Point3, Vec3};

pub const MAX_ORDER: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped affinely onto `[lo, hi]`.
    pub fn on(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.on(lo, hi).map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss-Legendre rule of order `n` on `[-1, 1]`, by Newton iteration on
/// the three-term recurrence.
pub fn gauss_legendre(n: usize) -> Result<GaussRule, QuadratureError> {
    if !(1..=MAX_ORDER).contains(&n) {
        return Err(QuadratureError::OrderOutOfRange(n));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(GaussRule { nodes, weights })
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A quadrature node on a sphere or cap, with its local polar angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapNode {
    pub point: Point3,
    pub theta: f64,
    pub phi: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapRule {
    pub nodes: Vec<CapNode>,
}

impl CapRule {
    pub fn integrate(&self, f: impl Fn(&CapNode) -> f64) -> f64 {
        self.nodes.iter().map(|n| n.weight * f(n)).sum()
    }
}

/// `n x n` tensor rule on the cap of `frame`, `theta in [0, pi/2]`,
/// `phi in [0, 2 pi]`, weights including the surface element `a^2 sin(theta)`.
pub fn cap_rule(frame: &HemisphereFrame, n: usize) -> Result<CapRule, QuadratureError> {
    if n < 2 {
        return Err(QuadratureError::BadParameter(format!("cap rule order {n} < 2")));
    }
    spherical_band_rule(frame, frame.radius, FRAC_PI_2, n, n)
}

/// Tensor rule on the spherical cap `theta in [0, theta_max]` of radius `r`
/// about `frame.center`, measured from `frame.axis`.
pub fn spherical_band_rule(
    frame: &HemisphereFrame,
    r: f64,
    theta_max: f64,
    n_theta: usize,
    n_phi: usize,
) -> Result<CapRule, QuadratureError> {
    if !(theta_max > 0.0 && theta_max <= PI) {
        return Err(QuadratureError::BadParameter(format!("cap angle {theta_max}")));
    }
    let gt = gauss_legendre(n_theta)?;
    let gp = gauss_legendre(n_phi)?;
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    for (theta, wt) in gt.on(0.0, theta_max) {
        let ds = r * r * theta.sin();
        for (phi, wp) in gp.on(0.0, 2.0 * PI) {
            nodes.push(CapNode { point: frame.spherical(r, theta, phi), theta, phi, weight: wt * wp * ds });
        }
    }
    Ok(CapRule { nodes })
}

/// Node of an annulus rule in local polar coordinates about the disk centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingNode {
    pub rho: f64,
    pub psi: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RingRule {
    pub delta: f64,
    pub nodes: Vec<RingNode>,
}

impl RingRule {
    pub fn integrate(&self, f: impl Fn(&RingNode) -> f64) -> f64 {
        self.nodes.iter().map(|n| n.weight * f(n)).sum()
    }
}

/// `n x n` rule on the annulus `delta <= rho <= a`: Gauss in `rho` (linear
/// placement) times Gauss in azimuth, with the polar Jacobian in the weights.
pub fn ring_rule(a: f64, delta: f64, n: usize) -> Result<RingRule, QuadratureError> {
    if !(delta > 0.0 && delta < a) {
        return Err(QuadratureError::BadRing { a, delta });
    }
    let g = gauss_legendre(n)?;
    let mut nodes = Vec::with_capacity(n * n);
    for (rho, wr) in g.on(delta, a) {
        for (psi, wp) in g.on(0.0, 2.0 * PI) {
            nodes.push(RingNode { rho, psi, weight: wr * wp * rho });
        }
    }
    Ok(RingRule { delta, nodes })
}

/// Flat triangle in space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub v: [Point3; 3],
}

impl Triangle {
    pub fn new(a: Point3, b: Point3, c: Point3) -> Self {
        Self { v: [a, b, c] }
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.v[1] - self.v[0]).cross(self.v[2] - self.v[0]).norm()
    }

    pub fn centroid(&self) -> Point3 {
        (self.v[0] + self.v[1] + self.v[2]) / 3.0
    }

    pub fn diameter(&self) -> f64 {
        let [a, b, c] = self.v;
        a.dist(b).max(b.dist(c)).max(c.dist(a))
    }

    /// The four midpoint subtriangles.
    pub fn split4(&self) -> [Triangle; 4] {
        let [a, b, c] = self.v;
        let (ab, bc, ca) = ((a + b) * 0.5, (b + c) * 0.5, (c + a) * 0.5);
        [
            Triangle::new(a, ab, ca),
            Triangle::new(ab, b, bc),
            Triangle::new(ca, bc, c),
            Triangle::new(ab, bc, ca),
        ]
    }
}

/// Quadrature on the reference triangle `{(u, v): u, v >= 0, u + v <= 1}`;
/// weights sum to 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct TriRule {
    pub uv: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl TriRule {
    /// Collapsed (Duffy) tensor Gauss rule with `n x n` nodes.
    pub fn collapsed(n: usize) -> Result<Self, QuadratureError> {
        let g = gauss_legendre(n)?;
        let mut uv = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (s, ws) in g.on(0.0, 1.0) {
            for (t, wt) in g.on(0.0, 1.0) {
                uv.push((s * (1.0 - t), s * t));
                weights.push(ws * wt * s);
            }
        }
        Ok(Self { uv, weights })
    }

    /// Map to a physical triangle: `(point, weight)` with weights summing to its area.
    pub fn map<'a>(&'a self, tri: &'a Triangle) -> impl Iterator<Item = (Point3, f64)> + 'a {
        let [a, b, c] = tri.v;
        let (e1, e2) = (b - a, c - a);
        let jac = 2.0 * tri.area();
        self.uv.iter().zip(&self.weights).map(move |(&(u, v), &w)| (a + e1 * u + e2 * v, w * jac))
    }

    pub fn integrate(&self, tri: &Triangle, f: impl Fn(Point3) -> f64) -> f64 {
        self.map(tri).map(|(p, w)| w * f(p)).sum()
    }
}

/// Rule for integrands singular like `1/|y - p|` (or weakened `1/|y - p|^2`
/// after regularization) at a point `p` of the triangle: the triangle is
/// split into the three subtriangles sharing `p`, and each is integrated in
/// polar-type coordinates `(s, t)` about `p`, whose Jacobian `s` cancels the
/// `1/r` singularity.
pub fn polar_rule(tri: &Triangle, p: Point3, n: usize) -> Result<Vec<(Point3, f64)>, QuadratureError> {
    let g = gauss_legendre(n)?;
    let mut out = Vec::with_capacity(3 * n * n);
    for k in 0..3 {
        let (a, b) = (tri.v[k], tri.v[(k + 1) % 3]);
        let twice = (a - p).cross(b - p).norm();
        if twice <= 1e-14 * tri.diameter().powi(2) {
            continue;
        }
        for (s, ws) in g.on(0.0, 1.0) {
            for (t, wt) in g.on(0.0, 1.0) {
                let q = a + (b - a) * t;
                out.push((p + (q - p) * s, ws * wt * s * twice));
            }
        }
    }
    Ok(out)
}

/// Unit normal of a flat triangle by the right-hand rule.
pub fn triangle_normal(tri: &Triangle) -> Vec3 {
    let n = (tri.v[1] - tri.v[0]).cross(tri.v[2] - tri.v[0]);
    n / n.norm()
}
