//! Triangulated boundary patches.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::geometry::{Scene, Shape};
use crate::quadrature::{triangle_normal, Triangle};
use crate::vec3::{Basis, Point3, UnitVec3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub tri: Triangle,
    pub centroid: Point3,
    pub area: f64,
    pub diameter: f64,
    /// Unit normal, oriented out of the solution domain.
    pub normal: Vec3,
}

impl Panel {
    pub fn new(tri: Triangle, outward_hint: Vec3) -> Self {
        let mut n = triangle_normal(&tri);
        let mut tri = tri;
        if n.dot(outward_hint) < 0.0 {
            n = -n;
            tri.v.swap(1, 2);
        }
        Self { centroid: tri.centroid(), area: tri.area(), diameter: tri.diameter(), normal: n, tri }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
    #[serde(skip)]
    pub panels: Vec<Panel>,
}

impl PatchMesh {
    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    /// Plain-text dump: vertex lines `v x y z`, then triangle lines `f i j k`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    /// Same panels with triangles listed in a different order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            vertices: self.vertices.clone(),
            triangles: order.iter().map(|&i| self.triangles[i]).collect(),
            panels: order.iter().map(|&i| self.panels[i]).collect(),
        }
    }
}

/// Part of the boundary inside the ball of radius `a` about `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PatchSurface {
    /// Flat disk of radius `a`.
    Disk,
    /// Cap of a sphere of radius `big_r` about `origin`, of angular radius `alpha`.
    SphereCap { origin: Point3, big_r: f64, alpha: f64 },
}

impl PatchSurface {
    pub fn of(scene: &Scene, center: Point3, a: f64) -> Result<Self, SolverError> {
        match scene.shape() {
            Shape::Sphere { center: o, radius } => {
                if a >= 2.0 * radius {
                    return Err(SolverError::Mesh(format!("patch radius {a} swallows the sphere")));
                }
                Ok(Self::SphereCap {
                    origin: *o,
                    big_r: *radius,
                    alpha: (1.0 - a * a / (2.0 * radius * radius)).acos(),
                })
            }
            Shape::HalfSpace { .. } => Ok(Self::Disk),
            _ => {
                let _ = center;
                Err(SolverError::Mesh("patch meshing supports half-space and sphere scenes".into()))
            }
        }
    }
}

/// Hex-polar triangulation: ring `k` (of `n_rings`) carries `6k` vertices,
/// giving `6 n_rings^2` triangles. Ring vertices are placed on the true
/// surface; panels are the flat triangles between them.
pub fn patch_mesh(scene: &Scene, center: Point3, a: f64, n_rings: usize) -> Result<PatchMesh, SolverError> {
    if n_rings == 0 {
        return Err(SolverError::Mesh("need at least one ring".into()));
    }
    let surface = PatchSurface::of(scene, center, a)?;
    let normal = scene.outward_normal(center);
    let basis = Basis::from_axis(-normal);
    let place = |k: usize, m: usize| -> Point3 {
        if k == 0 {
            return center;
        }
        let phi = std::f64::consts::TAU * m as f64 / (6 * k) as f64;
        let (sp, cp) = phi.sin_cos();
        match surface {
            PatchSurface::Disk => center + (basis.t1 * cp + basis.t2 * sp) * (a * k as f64 / n_rings as f64),
            PatchSurface::SphereCap { origin, big_r, alpha } => {
                let ang = alpha * k as f64 / n_rings as f64;
                let radial = UnitVec3::new(center - origin).expect("center off origin");
                let b = Basis::from_axis(radial);
                let (sa, ca) = ang.sin_cos();
                origin + (b.t1 * (sa * cp) + b.t2 * (sa * sp) + b.n * ca) * big_r
            }
        }
    };
    let mut vertices = vec![center];
    let mut ring_start = vec![0usize];
    for k in 1..=n_rings {
        ring_start.push(vertices.len());
        for m in 0..6 * k {
            vertices.push(place(k, m));
        }
    }
    let idx = |k: usize, m: usize| -> usize {
        if k == 0 {
            0
        } else {
            ring_start[k] + m % (6 * k)
        }
    };
    let mut triangles = Vec::with_capacity(6 * n_rings * n_rings);
    for k in 1..=n_rings {
        for s in 0..6 {
            for j in 0..k {
                let o0 = idx(k, s * k + j);
                let o1 = idx(k, s * k + j + 1);
                let i0 = idx(k - 1, s * (k - 1) + j);
                triangles.push([i0, o0, o1]);
                if j + 1 < k {
                    let i1 = idx(k - 1, s * (k - 1) + j + 1);
                    triangles.push([i0, o1, i1]);
                }
            }
        }
    }
    let panels = triangles
        .iter()
        .map(|t| {
            let tri = Triangle::new(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            let hint = scene.outward_normal(scene.project(tri.centroid()).0).get();
            Panel::new(tri, hint)
        })
        .collect::<Vec<_>>();
    if let Some(p) = panels.iter().find(|p| !(p.area > 0.0)) {
        return Err(SolverError::Mesh(format!("degenerate panel at {:?}", p.centroid)));
    }
    Ok(PatchMesh { vertices, triangles, panels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DirichletData, DomainSide};
    use std::collections::HashMap;

    fn sphere() -> Scene {
        Scene::new(
            Shape::Sphere { center: Vec3::ZERO, radius: 3.0 },
            DirichletData::Constant(0.0),
            DomainSide::Exterior,
        )
        .unwrap()
    }

    #[test]
    fn counts_and_conformity() {
        let m = patch_mesh(&sphere(), Vec3::new(0.0, 0.0, 3.0), 1.0, 5).unwrap();
        assert_eq!(m.len(), 150);
        assert_eq!(m.vertices.len(), 1 + 3 * 5 * 6);
        // every interior edge is shared by exactly two triangles, boundary edges by one
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &m.triangles {
            for k in 0..3 {
                let (u, v) = (t[k], t[(k + 1) % 3]);
                *edges.entry((u.min(v), u.max(v))).or_default() += 1;
            }
        }
        assert!(edges.values().all(|&c| c == 1 || c == 2));
        assert_eq!(edges.values().filter(|&&c| c == 1).count(), 30);
    }

    #[test]
    fn sphere_cap_geometry() {
        let s = sphere();
        let c = Vec3::new(0.0, 3.0, 0.0);
        let m = patch_mesh(&s, c, 1.0, 8).unwrap();
        for v in &m.vertices {
            assert!((v.norm() - 3.0).abs() < 1e-12);
            assert!(v.dist(c) <= 1.0 + 1e-12);
        }
        for p in &m.panels {
            // outward of the exterior domain points toward the sphere centre
            assert!(p.normal.dot(p.centroid) < 0.0);
        }
        let area: f64 = m.panels.iter().map(|p| p.area).sum();
        // cap area 2 pi R^2 (1 - cos alpha) = pi a^2 for a chord radius a
        assert!((area / std::f64::consts::PI - 1.0).abs() < 0.01, "{area}");
    }

    #[test]
    fn flat_disk_area() {
        let s = Scene::exterior(Shape::HalfSpace { height: 0.0 }, DirichletData::Constant(0.0)).unwrap();
        let m = patch_mesh(&s, Vec3::ZERO, 1.0, 10).unwrap();
        let area: f64 = m.panels.iter().map(|p| p.area).sum();
        // inscribed polygon with 60 sides
        let polygon = 0.5 * 60.0 * (std::f64::consts::TAU / 60.0).sin();
        assert!((area - polygon).abs() < 1e-12);
        assert!(m.panels.iter().all(|p| (p.normal.z + 1.0).abs() < 1e-12));
        assert!(m.dump().lines().count() == m.vertices.len() + m.triangles.len());
    }
}
