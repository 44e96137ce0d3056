//! Potential away from the boundary from Dirichlet and Neumann data, by the
//! Green representation formula with a midpoint rule per panel.

use rayon::prelude::*;

use crate::error::SolverError;
use crate::greens::fundamental_dny;
use crate::quadrature::Triangle;
use crate::vec3::{Point3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataPanel {
    pub centroid: Point3,
    pub area: f64,
    pub diameter: f64,
    /// Outward normal of the solution domain.
    pub normal: Vec3,
    pub u: f64,
    pub dudn: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryData {
    pub panels: Vec<DataPanel>,
}

impl BoundaryData {
    /// `alpha * self + beta * other` on identical panels.
    pub fn combine(&self, alpha: f64, other: &BoundaryData, beta: f64) -> BoundaryData {
        BoundaryData {
            panels: self
                .panels
                .iter()
                .zip(&other.panels)
                .map(|(p, q)| DataPanel { u: alpha * p.u + beta * q.u, dudn: alpha * p.dudn + beta * q.dudn, ..*p })
                .collect(),
        }
    }
}

/// `u(x) = sum_panels [G(x, y) dudn(y) - dG/dn_y(x, y) u(y)] area`, with the
/// normal pointing out of the solution domain. Refuses targets closer than
/// one panel diameter to any panel centroid.
pub fn evaluate(data: &BoundaryData, x: Point3) -> Result<f64, SolverError> {
    let mut sum = 0.0;
    for (i, p) in data.panels.iter().enumerate() {
        let d = x.dist(p.centroid);
        if d < p.diameter {
            return Err(SolverError::NearField { panel: i, distance: d, min: p.diameter });
        }
        let g = 1.0 / (4.0 * std::f64::consts::PI * d);
        sum += (g * p.dudn - fundamental_dny(x, p.centroid, p.normal) * p.u) * p.area;
    }
    Ok(sum)
}

pub fn evaluate_many(data: &BoundaryData, xs: &[Point3]) -> Result<Vec<f64>, SolverError> {
    xs.par_iter().map(|x| evaluate(data, *x)).collect()
}

/// Closed sphere surface as flat triangles: a geodesic subdivision of an
/// icosahedron, `20 * 4^level` panels.
pub fn sphere_panels(center: Point3, radius: f64, level: usize) -> Vec<Triangle> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ];
    let v: Vec<Vec3> = raw.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect();
    let faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    let on = |p: Vec3| center + p * (radius / p.norm());
    let mut tris: Vec<Triangle> = faces.iter().map(|f| Triangle::new(on(v[f[0]]), on(v[f[1]]), on(v[f[2]]))).collect();
    for _ in 0..level {
        tris = tris
            .iter()
            .flat_map(|tr| {
                let [a, b, c] = tr.v;
                let (ab, bc, ca) = (on((a + b) * 0.5 - center), on((b + c) * 0.5 - center), on((c + a) * 0.5 - center));
                [Triangle::new(a, ab, ca), Triangle::new(ab, b, bc), Triangle::new(ca, bc, c), Triangle::new(ab, bc, ca)]
            })
            .collect();
    }
    tris
}

/// Boundary data on panels from point functions of the centroid projected
/// onto the sphere. Normals point toward the centre (out of the exterior domain).
pub fn exterior_sphere_data(
    center: Point3,
    radius: f64,
    level: usize,
    u: impl Fn(Point3) -> f64,
    dudn: impl Fn(Point3) -> f64,
) -> BoundaryData {
    BoundaryData {
        panels: sphere_panels(center, radius, level)
            .iter()
            .map(|t| {
                let c = t.centroid();
                let on = center + (c - center) * (radius / (c - center).norm());
                DataPanel {
                    centroid: c,
                    area: t.area(),
                    diameter: t.diameter(),
                    normal: (center - c) / (center - c).norm(),
                    u: u(on),
                    dudn: dudn(on),
                }
            })
            .collect(),
    }
}
