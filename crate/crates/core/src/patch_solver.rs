//! Neumann data over a boundary patch by collocation on a local integral
//! equation.
//!
//! A sphere of radius `a` is centred on the boundary point `x0`. The region
//! `Omega_S` it cuts from the solution domain is bounded by the patch `S`
//! (boundary inside the sphere) and `Gamma` (sphere inside the domain). With
//! the whole-sphere Green's function `G`, which vanishes on `Gamma`, the
//! unknown Neumann data on `S` satisfies either
//!
//! * first kind: `int_S G q = int_S dG/dn_y (u - u(x)) + int_Gamma dG/dn_y (u - u(x))`, or
//! * second kind: `q/2 - int_S dG/dn_x q = -int (u - v_x) d2G - int_S dG/dn_x (grad v_x . n_y)`,
//!
//! where `v_x` is the linear function matching `u` and its tangential
//! gradient at the collocation point. Subtracting it reduces the
//! hyper-singular kernel to an integrable one. `u` on `Gamma` comes from
//! walk-on-spheres estimates on a regular `(theta, phi)` grid.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::geometry::Scene;
use crate::greens::{
    sphere_d2g_raw, sphere_dg_dnx_raw, sphere_dg_dny_raw, sphere_g_raw, HemisphereFrame, SphereFrame,
};
use crate::mesh::{patch_mesh, Panel, PatchMesh, PatchSurface};
use crate::quadrature::{polar_rule, spherical_band_rule, CapRule, TriRule, Triangle};
use crate::vec3::{Basis, Point3, UnitVec3, Vec3};
use crate::wos::Sampler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BieKind {
    FirstKind,
    SecondKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatchParams {
    pub a: f64,
    pub n_rings: usize,
    /// Grid rows strictly inside `Gamma`; one more row lies on the rim.
    pub n_theta: usize,
    pub n_phi: usize,
    /// Tensor order of the `Gamma` quadrature.
    pub gamma_order: usize,
    pub self_order: usize,
    pub kind: BieKind,
}

impl Default for PatchParams {
    fn default() -> Self {
        Self { a: 1.0, n_rings: 12, n_theta: 64, n_phi: 128, gamma_order: 30, self_order: 20, kind: BieKind::SecondKind }
    }
}

#[derive(Debug, Clone)]
pub struct PatchSetup {
    pub sphere: SphereFrame,
    /// Frame at the patch centre, axis into the solution domain; polar
    /// angles on `Gamma` are measured from it.
    pub frame: HemisphereFrame,
    pub mesh: PatchMesh,
    /// Polar angle of the rim where `Gamma` meets the boundary.
    pub theta_rim: f64,
    pub params: PatchParams,
}

impl PatchSetup {
    pub fn new(scene: &Scene, x0: Point3, params: PatchParams) -> Result<Self, SolverError> {
        let a = params.a;
        let (c, _) = scene.project(x0);
        if c.dist(x0) > 1e-9 * a.max(1.0) {
            return Err(SolverError::Invalid("patch centre is off the boundary".into()));
        }
        if params.n_theta < 2 || params.n_phi < 3 {
            return Err(SolverError::Invalid("Gamma grid needs n_theta >= 2 and n_phi >= 3".into()));
        }
        let axis = -scene.outward_normal(c);
        let theta_rim = match PatchSurface::of(scene, c, a)? {
            PatchSurface::Disk => PI / 2.0,
            PatchSurface::SphereCap { origin, big_r, .. } => {
                // axis . (origin - c) is +R for an interior domain, -R for an exterior one
                let s = axis.get().dot(origin - c) / big_r;
                (s * a / (2.0 * big_r)).acos()
            }
        };
        Ok(Self {
            sphere: SphereFrame::new(c, a)?,
            frame: HemisphereFrame::new(c, a, axis)?,
            mesh: patch_mesh(scene, c, a, params.n_rings)?,
            theta_rim,
            params,
        })
    }

    pub fn center(&self) -> Point3 {
        self.sphere.center
    }

    fn angles(&self, y: Point3) -> (f64, f64) {
        let d = self.frame.basis().to_local(y - self.center()) / self.params.a;
        (d.z.clamp(-1.0, 1.0).acos(), d.y.atan2(d.x).rem_euclid(TAU))
    }

    fn d_theta(&self) -> f64 {
        self.theta_rim / self.params.n_theta as f64
    }
}

/// Potential samples on `Gamma` at `theta_j = j * theta_rim / n_theta`,
/// `phi_k = 2 pi k / n_phi`. Row 0 is the pole; row `n_theta` is the rim,
/// where `u` equals the Dirichlet data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    pub theta_max: f64,
    /// Row-major, `(n_theta + 1) * n_phi`.
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Walks launched in total.
    pub paths: u64,
}

impl GammaGrid {
    fn node(setup: &PatchSetup, j: usize, k: usize) -> Point3 {
        let theta = j as f64 * setup.d_theta();
        setup.frame.spherical(setup.params.a, theta, TAU * k as f64 / setup.params.n_phi as f64)
    }

    /// Grid filled from a known field (rim row included).
    pub fn from_fn(setup: &PatchSetup, f: impl Fn(Point3) -> f64) -> Self {
        let (nt, np) = (setup.params.n_theta, setup.params.n_phi);
        let mut values = Vec::with_capacity((nt + 1) * np);
        for j in 0..=nt {
            for k in 0..np {
                values.push(f(Self::node(setup, j, k)));
            }
        }
        Self { n_theta: nt, n_phi: np, theta_max: setup.theta_rim, std_errors: vec![0.0; values.len()], values, paths: 0 }
    }

    #[inline]
    fn idx(&self, j: usize, k: usize) -> usize {
        j * self.n_phi + k % self.n_phi
    }

    /// Bilinear interpolation weights in `(theta, phi)`, periodic in `phi`.
    pub fn weights(&self, theta: f64, phi: f64) -> Result<[(usize, f64); 4], SolverError> {
        let dt = self.theta_max / self.n_theta as f64;
        if !(theta >= 0.0 && theta <= self.theta_max * (1.0 + 1e-12)) {
            return Err(SolverError::Extrapolation { theta, max: self.theta_max });
        }
        let s = (theta / dt).min(self.n_theta as f64);
        let j = (s.floor() as usize).min(self.n_theta - 1);
        let t = s - j as f64;
        let p = phi.rem_euclid(TAU) / TAU * self.n_phi as f64;
        let k = (p.floor() as usize) % self.n_phi;
        let w = p - p.floor();
        Ok([
            (self.idx(j, k), (1.0 - t) * (1.0 - w)),
            (self.idx(j, k + 1), (1.0 - t) * w),
            (self.idx(j + 1, k), t * (1.0 - w)),
            (self.idx(j + 1, k + 1), t * w),
        ])
    }

    pub fn interp(&self, theta: f64, phi: f64) -> Result<f64, SolverError> {
        Ok(self.weights(theta, phi)?.iter().map(|&(i, w)| w * self.values[i]).sum())
    }
}

/// Interpolated potential at a point of `Gamma`.
pub fn interp_gamma(grid: &GammaGrid, setup: &PatchSetup, y: Point3) -> Result<f64, SolverError> {
    let (theta, phi) = setup.angles(y);
    grid.interp(theta, phi)
}

/// Walk-on-spheres estimates at every interior grid node. The pole row is
/// sampled once and replicated; the rim row takes the boundary data.
pub fn sample_gamma_grid<S: Sampler + ?Sized>(
    scene: &Scene,
    setup: &PatchSetup,
    sampler: &S,
) -> Result<GammaGrid, SolverError> {
    let (nt, np) = (setup.params.n_theta, setup.params.n_phi);
    let mut points = vec![GammaGrid::node(setup, 0, 0)];
    for j in 1..nt {
        for k in 0..np {
            points.push(GammaGrid::node(setup, j, k));
        }
    }
    let est = sampler.sample(&points, 0)?;
    let mut values = Vec::with_capacity((nt + 1) * np);
    let mut std_errors = Vec::with_capacity((nt + 1) * np);
    for _ in 0..np {
        values.push(est[0].mean);
        std_errors.push(est[0].std_error());
    }
    for e in &est[1..] {
        values.push(e.mean);
        std_errors.push(e.std_error());
    }
    let eps = 1e-9 * setup.params.a.max(1.0);
    for k in 0..np {
        let y = GammaGrid::node(setup, nt, k);
        let (q, id) = scene.project(y);
        if q.dist(y) > eps {
            return Err(SolverError::Invalid(format!("rim node {k} is {} off the boundary", q.dist(y))));
        }
        values.push(scene.dirichlet_on(q, id));
        std_errors.push(0.0);
    }
    Ok(GammaGrid {
        n_theta: nt,
        n_phi: np,
        theta_max: setup.theta_rim,
        values,
        std_errors,
        paths: points.len() as u64 * sampler.paths_per_point(),
    })
}

/// Potential on `Gamma`: a sampled grid, or an exact field for tests.
#[derive(Clone)]
pub enum GammaField {
    Grid(GammaGrid),
    Exact(Arc<dyn Fn(Point3) -> f64 + Send + Sync>),
}

impl GammaField {
    fn value(&self, setup: &PatchSetup, y: Point3) -> Result<f64, SolverError> {
        match self {
            Self::Grid(g) => interp_gamma(g, setup, y),
            Self::Exact(f) => Ok(f(y)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenseSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub kind: BieKind,
    /// Standard error of each `b_i` due to `Gamma` sampling noise.
    pub b_std_error: Vec<f64>,
}

/// Quadrature points on panel `j` for a target at `x`, refined toward `x`.
fn panel_points(x: Point3, j: usize, i: usize, p: &Panel, rules: &Rules, out: &mut Vec<(Point3, f64)>) {
    out.clear();
    if i == j {
        out.extend(polar_rule(&p.tri, p.centroid, rules.self_order).expect("valid order"));
        return;
    }
    refine(x, &p.tri, rules, 0, out);
}

const FAR_RATIO: f64 = 4.0;
const MAX_DEPTH: usize = 6;

fn refine(x: Point3, t: &Triangle, rules: &Rules, depth: usize, out: &mut Vec<(Point3, f64)>) {
    let ratio = x.dist(t.centroid()) / t.diameter();
    if ratio > FAR_RATIO {
        out.extend(rules.far.map(t));
    } else if depth == MAX_DEPTH {
        out.extend(rules.near.map(t));
    } else {
        for s in t.split4() {
            refine(x, &s, rules, depth + 1, out);
        }
    }
}

struct Rules {
    far: TriRule,
    near: TriRule,
    self_order: usize,
}

struct Collocation {
    x: Point3,
    n: Vec3,
    phi: f64,
    grad: Vec3,
}

/// Dirichlet data at the projection of a point near the boundary.
#[inline]
fn data(scene: &Scene, y: Point3) -> f64 {
    let (q, id) = scene.project(y);
    scene.dirichlet_on(q, id)
}

/// Tangential gradient of `data` within the plane of a panel, by central differences.
fn panel_gradient(scene: &Scene, p: &Panel, h: f64) -> Vec3 {
    let b = Basis::from_axis(UnitVec3::new(p.normal).expect("unit normal"));
    let d = |t: Vec3| (data(scene, p.centroid + t * h) - data(scene, p.centroid - t * h)) / (2.0 * h);
    b.t1 * d(b.t1) + b.t2 * d(b.t2)
}

pub fn assemble(
    scene: &Scene,
    setup: &PatchSetup,
    kind: BieKind,
    gamma: &GammaField,
) -> Result<DenseSystem, SolverError> {
    let panels = &setup.mesh.panels;
    let n = panels.len();
    let a = setup.params.a;
    let sphere = setup.sphere;
    let rules = Rules {
        far: TriRule::collapsed(3)?,
        near: TriRule::collapsed(4)?,
        self_order: setup.params.self_order,
    };
    let cap: CapRule = spherical_band_rule(
        &setup.frame,
        a,
        setup.theta_rim,
        setup.params.gamma_order,
        setup.params.gamma_order,
    )?;
    // Gamma values and (for sampled grids) their interpolation weights
    let mut gamma_u = Vec::with_capacity(cap.nodes.len());
    let mut gamma_w = Vec::with_capacity(cap.nodes.len());
    for node in &cap.nodes {
        gamma_u.push(gamma.value(setup, node.point)?);
        if let GammaField::Grid(g) = gamma {
            gamma_w.push(g.weights(node.theta, node.phi)?);
        }
    }
    let h = 1e-5 * a;
    let colloc: Vec<Collocation> = panels
        .iter()
        .map(|p| Collocation { x: p.centroid, n: p.normal, phi: data(scene, p.centroid), grad: panel_gradient(scene, p, h) })
        .collect();

    let rows: Vec<(Vec<f64>, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let c = &colloc[i];
            let mut row = vec![0.0; n];
            let mut b = 0.0;
            let mut pts = Vec::new();
            for (j, p) in panels.iter().enumerate() {
                panel_points(c.x, j, i, p, &rules, &mut pts);
                let ny = p.normal;
                let mut aij = 0.0;
                for &(y, w) in &pts {
                    let u = data(scene, y);
                    match kind {
                        BieKind::FirstKind => {
                            aij += w * sphere_g_raw(&sphere, c.x, y);
                            b += w * sphere_dg_dny_raw(&sphere, c.x, y, ny) * (u - c.phi);
                        }
                        BieKind::SecondKind => {
                            let dnx = sphere_dg_dnx_raw(&sphere, c.x, c.n, y);
                            aij += w * dnx;
                            let v = c.phi + c.grad.dot(y - c.x);
                            b -= w * ((u - v) * sphere_d2g_raw(&sphere, c.x, c.n, y, ny) + dnx * c.grad.dot(ny));
                        }
                    }
                }
                row[j] = match kind {
                    BieKind::FirstKind => aij,
                    BieKind::SecondKind => (if i == j { 0.5 } else { 0.0 }) - aij,
                };
            }
            // Gamma contribution and its sampling variance
            let mut var = 0.0;
            let mut grid_coef: Vec<f64> = match gamma {
                GammaField::Grid(g) => vec![0.0; g.values.len()],
                GammaField::Exact(_) => Vec::new(),
            };
            for (k, node) in cap.nodes.iter().enumerate() {
                let y = node.point;
                let ny = (y - sphere.center) / a;
                let (kernel, shift) = match kind {
                    BieKind::FirstKind => (sphere_dg_dny_raw(&sphere, c.x, y, ny), c.phi),
                    BieKind::SecondKind => (
                        -sphere_d2g_raw(&sphere, c.x, c.n, y, ny),
                        c.phi + c.grad.dot(y - c.x),
                    ),
                };
                b += node.weight * kernel * (gamma_u[k] - shift);
                if !grid_coef.is_empty() {
                    for &(g, wt) in &gamma_w[k] {
                        grid_coef[g] += node.weight * kernel * wt;
                    }
                }
            }
            if let GammaField::Grid(g) = gamma {
                var = grid_coef.iter().zip(&g.std_errors).map(|(c, s)| (c * s).powi(2)).sum();
            }
            (row, b, var.sqrt())
        })
        .collect();

    let mut mat = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    let mut b_se = Vec::with_capacity(n);
    for (i, (row, b, se)) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            mat[(i, j)] = v;
        }
        rhs[i] = b;
        b_se.push(se);
    }
    Ok(DenseSystem { a: mat, b: rhs, kind, b_std_error: b_se })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannField {
    /// Normal derivative per panel, along the outward normal of the solution domain.
    pub values: Vec<f64>,
    /// Distance of each panel centroid from the patch centre.
    pub r: Vec<f64>,
    /// Upper bound on the standard error of each value from `Gamma` sampling noise.
    pub std_errors: Vec<f64>,
    pub residual: f64,
    pub kind: BieKind,
    /// Walks spent on the `Gamma` grid.
    pub paths: u64,
}

/// Solve by LU with partial pivoting and check the relative residual.
pub fn solve_system(sys: &DenseSystem) -> Result<(DVector<f64>, f64, DMatrix<f64>), SolverError> {
    let lu = sys.a.clone().lu();
    let x = lu.solve(&sys.b).ok_or_else(|| {
        SolverError::SingularSystem(match sys.kind {
            BieKind::FirstKind => "first-kind matrix is singular; try the second-kind form".into(),
            BieKind::SecondKind => "second-kind matrix is singular".into(),
        })
    })?;
    let bn = sys.b.norm();
    let residual = if bn > 0.0 { (&sys.a * &x - &sys.b).norm() / bn } else { (&sys.a * &x).norm() };
    if !(residual <= 1e-10) {
        return Err(SolverError::SingularSystem(format!("relative residual {residual:e}")));
    }
    let inv = lu.try_inverse().ok_or_else(|| SolverError::SingularSystem("matrix not invertible".into()))?;
    Ok((x, residual, inv))
}

pub fn solve_assembled(setup: &PatchSetup, sys: &DenseSystem, paths: u64) -> Result<NeumannField, SolverError> {
    let (x, residual, inv) = solve_system(sys)?;
    let n = x.len();
    let std_errors = (0..n)
        .map(|i| (0..n).map(|j| inv[(i, j)].abs() * sys.b_std_error[j]).sum())
        .collect();
    Ok(NeumannField {
        values: x.iter().copied().collect(),
        r: setup.mesh.panels.iter().map(|p| p.centroid.dist(setup.center())).collect(),
        std_errors,
        residual,
        kind: sys.kind,
        paths,
    })
}

pub fn solve_patch<S: Sampler + ?Sized>(
    scene: &Scene,
    setup: &PatchSetup,
    kind: BieKind,
    sampler: &S,
) -> Result<NeumannField, SolverError> {
    let grid = sample_gamma_grid(scene, setup, sampler)?;
    let paths = grid.paths;
    let sys = assemble(scene, setup, kind, &GammaField::Grid(grid))?;
    solve_assembled(setup, &sys, paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DirichletData, DomainSide, Shape};
    use crate::wos::ExactSampler;

    fn sphere_scene() -> Scene {
        Scene::new(
            Shape::Sphere { center: Vec3::ZERO, radius: 3.0 },
            DirichletData::PointCharge { strength: 1.0 / (4.0 * PI), location: Vec3::ZERO },
            DomainSide::Exterior,
        )
        .unwrap()
    }

    fn coulomb(p: Point3) -> f64 {
        1.0 / (4.0 * PI * p.norm())
    }

    fn small(kind: BieKind) -> PatchParams {
        PatchParams { n_rings: 6, n_theta: 16, n_phi: 32, kind, ..Default::default() }
    }

    #[test]
    fn rim_angles() {
        let s = sphere_scene();
        let setup = PatchSetup::new(&s, Vec3::new(0.0, 0.0, 3.0), small(BieKind::SecondKind)).unwrap();
        assert!((setup.theta_rim - (-1.0f64 / 6.0).acos()).abs() < 1e-14);
        // the rim row lies on the boundary sphere
        let y = GammaGrid::node(&setup, setup.params.n_theta, 5);
        assert!((y.norm() - 3.0).abs() < 1e-12);
        let inner = Scene::new(Shape::Sphere { center: Vec3::ZERO, radius: 3.0 }, DirichletData::Constant(0.0), DomainSide::Interior)
            .unwrap();
        let setup = PatchSetup::new(&inner, Vec3::new(3.0, 0.0, 0.0), small(BieKind::SecondKind)).unwrap();
        assert!((setup.theta_rim - (1.0f64 / 6.0).acos()).abs() < 1e-14);
    }

    #[test]
    fn grid_interpolation() {
        let s = sphere_scene();
        let setup = PatchSetup::new(&s, Vec3::new(0.0, 3.0, 0.0), PatchParams::default()).unwrap();
        let grid = GammaGrid::from_fn(&setup, coulomb);
        // node values are reproduced
        let y = GammaGrid::node(&setup, 7, 11);
        assert!((interp_gamma(&grid, &setup, y).unwrap() - coulomb(y)).abs() < 1e-12);
        // fields linear in theta are exact
        let lin = GammaGrid::from_fn(&setup, |p| 2.0 + setup.angles(p).0);
        let y = setup.frame.spherical(1.0, 0.77, 2.2);
        assert!((interp_gamma(&lin, &setup, y).unwrap() - 2.77).abs() < 1e-12);
        // smooth field at 64 x 128
        let mut worst: f64 = 0.0;
        for j in 0..50 {
            for k in 0..37 {
                let th = setup.theta_rim * (j as f64 + 0.37) / 50.0;
                let y = setup.frame.spherical(1.0, th, TAU * (k as f64 + 0.61) / 37.0);
                worst = worst.max((interp_gamma(&grid, &setup, y).unwrap() / coulomb(y) - 1.0).abs());
            }
        }
        assert!(worst < 1e-3, "{worst}");
        let beyond = setup.frame.spherical(1.0, setup.theta_rim + 0.05, 0.0);
        assert!(matches!(interp_gamma(&grid, &setup, beyond), Err(SolverError::Extrapolation { .. })));
    }

    #[test]
    fn constant_grid_from_constant_sampler() {
        let s = Scene::new(Shape::Sphere { center: Vec3::ZERO, radius: 3.0 }, DirichletData::Constant(2.0), DomainSide::Exterior)
            .unwrap();
        let setup = PatchSetup::new(&s, Vec3::new(0.0, 0.0, -3.0), small(BieKind::SecondKind)).unwrap();
        let g = sample_gamma_grid(&s, &setup, &ExactSampler(|_| 2.0)).unwrap();
        assert!(g.values.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn constant_data_is_annihilated() {
        let s = Scene::new(Shape::Sphere { center: Vec3::ZERO, radius: 3.0 }, DirichletData::Constant(2.0), DomainSide::Exterior)
            .unwrap();
        for kind in [BieKind::FirstKind, BieKind::SecondKind] {
            let setup = PatchSetup::new(&s, Vec3::new(0.0, 0.0, 3.0), small(kind)).unwrap();
            let f = solve_patch(&s, &setup, kind, &ExactSampler(|_| 2.0)).unwrap();
            assert!(f.values.iter().all(|v| v.abs() <= 1e-6), "{kind:?}");
        }
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let s = Scene::new(Shape::Sphere { center: Vec3::ZERO, radius: 3.0 }, DirichletData::Constant(0.0), DomainSide::Exterior)
            .unwrap();
        let setup = PatchSetup::new(&s, Vec3::new(0.0, 0.0, 3.0), small(BieKind::SecondKind)).unwrap();
        let f = solve_patch(&s, &setup, BieKind::SecondKind, &ExactSampler(|_| 0.0)).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_field_on_flat_patch() {
        // u = z above z = 0 has normal derivative -1 along the outward (-z) normal
        let s = Scene::exterior(Shape::HalfSpace { height: 0.0 }, DirichletData::Constant(0.0)).unwrap();
        let params = PatchParams { n_rings: 8, ..small(BieKind::SecondKind) };
        let setup = PatchSetup::new(&s, Vec3::ZERO, params).unwrap();
        let sys = assemble(&s, &setup, BieKind::SecondKind, &GammaField::Exact(Arc::new(|p: Point3| p.z))).unwrap();
        let f = solve_assembled(&setup, &sys, 0).unwrap();
        for (v, r) in f.values.iter().zip(&f.r) {
            if *r < 0.7 {
                assert!((v + 1.0).abs() < 0.01, "r={r}: {v}");
            }
        }
    }

    #[test]
    fn exact_coulomb_data_on_sphere_patch() {
        let s = sphere_scene();
        let want = 1.0 / (36.0 * PI);
        for kind in [BieKind::SecondKind, BieKind::FirstKind] {
            let setup = PatchSetup::new(&s, Vec3::new(0.0, 0.0, 3.0), PatchParams { n_rings: 8, ..small(kind) }).unwrap();
            let sys = assemble(&s, &setup, kind, &GammaField::Exact(Arc::new(coulomb))).unwrap();
            let f = solve_assembled(&setup, &sys, 0).unwrap();
            let worst = f
                .values
                .iter()
                .zip(&f.r)
                .filter(|(_, r)| **r < 0.7)
                .map(|(v, _)| (v / want - 1.0).abs())
                .fold(0.0, f64::max);
            assert!(worst < 0.02, "{kind:?}: {worst}");
        }
    }

    /// Largest `|A_ij / A_ji - 1|` (area-normalized) over well-separated
    /// panel pairs away from the rim.
    fn asymmetry(n_rings: usize) -> f64 {
        let s = sphere_scene();
        let params = PatchParams { n_rings, ..small(BieKind::FirstKind) };
        let setup = PatchSetup::new(&s, Vec3::new(0.0, 0.0, 3.0), params).unwrap();
        let sys = assemble(&s, &setup, BieKind::FirstKind, &GammaField::Exact(Arc::new(coulomb))).unwrap();
        let p = &setup.mesh.panels;
        let c = setup.center();
        let mut worst: f64 = 0.0;
        for i in 0..p.len() {
            for j in 0..i {
                let inner = p[i].centroid.dist(c) < 0.6 && p[j].centroid.dist(c) < 0.6;
                if inner && p[i].centroid.dist(p[j].centroid) > 3.0 * p[i].diameter {
                    let gij = sys.a[(i, j)] / p[j].area;
                    let gji = sys.a[(j, i)] / p[i].area;
                    worst = worst.max((gij / gji - 1.0).abs());
                }
            }
        }
        worst
    }

    #[test]
    fn first_kind_matrix_symmetry_improves_with_refinement() {
        let (coarse, fine) = (asymmetry(6), asymmetry(12));
        assert!(fine < coarse, "{coarse} -> {fine}");
        assert!(fine < 1e-2, "{fine}");
    }

    #[test]
    fn renumbering_permutes_the_solution() {
        let s = sphere_scene();
        let mut setup = PatchSetup::new(&s, Vec3::new(0.0, 0.0, 3.0), small(BieKind::SecondKind)).unwrap();
        let gamma = GammaField::Exact(Arc::new(coulomb));
        let base = solve_assembled(&setup, &assemble(&s, &setup, BieKind::SecondKind, &gamma).unwrap(), 0).unwrap();
        let n = setup.mesh.len();
        let order: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        assert!(n % 7 != 0);
        setup.mesh = setup.mesh.permuted(&order);
        let perm = solve_assembled(&setup, &assemble(&s, &setup, BieKind::SecondKind, &gamma).unwrap(), 0).unwrap();
        for (k, &i) in order.iter().enumerate() {
            assert!((perm.values[k] - base.values[i]).abs() < 1e-12 * base.values[i].abs().max(1e-3));
        }
    }
}
