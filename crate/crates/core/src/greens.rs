//! Green's functions of the Laplacian: free space, the whole sphere (one
//! Kelvin image) and the hemisphere (three images).
//!
//! The Kelvin image term is written in the symmetric form
//! `a / sqrt(Q)` with `Q = |x'|^2 |y'|^2 - 2 a^2 x'.y' + a^4`, where primes
//! denote offsets from the sphere centre. It equals `(a/|y'|) / |x - y_k|`
//! for the Kelvin image `y_k` of `y`, but stays finite at `y' = 0` and makes
//! the `x <-> y` symmetry explicit.

use std::f64::consts::PI;

use crate::error::{GeometryError, GreensError};
use crate::vec3::{Basis, Point3, UnitVec3, Vec3};

const FOUR_PI: f64 = 4.0 * PI;

/// Separation (relative to the frame radius) below which kernels refuse to evaluate.
const COINCIDENCE: f64 = 1e-12;

/// Hemisphere of radius `radius` resting on the boundary plane at `center`.
/// `axis` points into the solution domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HemisphereFrame {
    pub center: Point3,
    pub radius: f64,
    pub axis: UnitVec3,
    basis: Basis,
}

impl HemisphereFrame {
    pub fn new(center: Point3, radius: f64, axis: UnitVec3) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return Err(GeometryError::InvalidScene(format!("bad hemisphere radius {radius}")));
        }
        Ok(Self { center, radius, axis, basis: Basis::from_axis(axis) })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// Point at local spherical angles on a sphere of radius `r` about the centre.
    #[inline]
    pub fn spherical(&self, r: f64, theta: f64, phi: f64) -> Point3 {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        self.center + self.basis.to_world(Vec3::new(r * st * cp, r * st * sp, r * ct))
    }

    /// Point at local polar coordinates on the flat base.
    #[inline]
    pub fn on_base(&self, rho: f64, psi: f64) -> Point3 {
        let (s, c) = psi.sin_cos();
        self.center + self.basis.t1 * (rho * c) + self.basis.t2 * (rho * s)
    }

    /// Reflection through the base plane.
    #[inline]
    pub fn mirror(&self, p: Point3) -> Point3 {
        let n = self.axis.get();
        p - n * (2.0 * (p - self.center).dot(n))
    }

    #[inline]
    fn mirror_dir(&self, v: Vec3) -> Vec3 {
        let n = self.axis.get();
        v - n * (2.0 * v.dot(n))
    }

    fn sphere(&self) -> SphereFrame {
        SphereFrame { center: self.center, radius: self.radius }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereFrame {
    pub center: Point3,
    pub radius: f64,
}

impl SphereFrame {
    pub fn new(center: Point3, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return Err(GeometryError::InvalidScene(format!("bad sphere radius {radius}")));
        }
        Ok(Self { center, radius })
    }
}

/// Image charges of a unit source.
pub type ImageSet = Vec<(Point3, f64)>;

#[inline]
fn guard(x: Point3, y: Point3, scale: f64) -> Result<f64, GreensError> {
    let r = x.dist(y);
    if !(r > COINCIDENCE * scale) {
        return Err(GreensError::Singular { separation: r });
    }
    Ok(r)
}

pub fn fundamental(x: Point3, y: Point3) -> Result<f64, GreensError> {
    let r = guard(x, y, 1.0)?;
    Ok(1.0 / (FOUR_PI * r))
}

/// `n_y . grad_y` of the fundamental solution.
#[inline]
pub fn fundamental_dny(x: Point3, y: Point3, n_y: Vec3) -> f64 {
    let d = x - y;
    let r2 = d.norm2();
    n_y.dot(d) / (FOUR_PI * r2 * r2.sqrt())
}

/// `n_x . grad_x` of the fundamental solution.
#[inline]
pub fn fundamental_dnx(x: Point3, y: Point3, n_x: Vec3) -> f64 {
    -fundamental_dny(x, y, n_x)
}

/// Mixed second derivative `(n_x . grad_x)(n_y . grad_y)` of the fundamental solution.
#[inline]
pub fn fundamental_d2(x: Point3, n_x: Vec3, y: Point3, n_y: Vec3) -> f64 {
    let d = x - y;
    let r2 = d.norm2();
    let r = r2.sqrt();
    let r3 = r2 * r;
    (n_x.dot(n_y) / r3 - 3.0 * n_x.dot(d) * n_y.dot(d) / (r3 * r2)) / FOUR_PI
}

struct Kelvin {
    xp: Vec3,
    yp: Vec3,
    q: f64,
}

impl Kelvin {
    #[inline]
    fn new(f: &SphereFrame, x: Point3, y: Point3) -> Self {
        let xp = x - f.center;
        let yp = y - f.center;
        let a2 = f.radius * f.radius;
        let q = xp.norm2() * yp.norm2() - 2.0 * a2 * xp.dot(yp) + a2 * a2;
        Self { xp, yp, q }
    }

    /// `n . grad_y Q`
    #[inline]
    fn dqy(&self, a2: f64, n: Vec3) -> f64 {
        2.0 * self.xp.norm2() * n.dot(self.yp) - 2.0 * a2 * n.dot(self.xp)
    }

    /// `n . grad_x Q`
    #[inline]
    fn dqx(&self, a2: f64, n: Vec3) -> f64 {
        2.0 * self.yp.norm2() * n.dot(self.xp) - 2.0 * a2 * n.dot(self.yp)
    }
}

pub fn sphere_g(f: &SphereFrame, x: Point3, y: Point3) -> Result<f64, GreensError> {
    let r = guard(x, y, f.radius)?;
    let k = Kelvin::new(f, x, y);
    Ok((1.0 / r - f.radius / k.q.sqrt()) / FOUR_PI)
}

pub fn sphere_dg_dny(f: &SphereFrame, x: Point3, y: Point3, n_y: UnitVec3) -> Result<f64, GreensError> {
    guard(x, y, f.radius)?;
    Ok(sphere_dg_dny_raw(f, x, y, n_y.get()))
}

pub fn sphere_dg_dnx(f: &SphereFrame, x: Point3, n_x: UnitVec3, y: Point3) -> Result<f64, GreensError> {
    guard(x, y, f.radius)?;
    Ok(sphere_dg_dnx_raw(f, x, n_x.get(), y))
}

pub fn sphere_d2g(
    f: &SphereFrame,
    x: Point3,
    n_x: UnitVec3,
    y: Point3,
    n_y: UnitVec3,
) -> Result<f64, GreensError> {
    guard(x, y, f.radius)?;
    Ok(sphere_d2g_raw(f, x, n_x.get(), y, n_y.get()))
}

/// Unchecked kernels for inner quadrature loops; callers guarantee `x != y`.
#[inline]
pub fn sphere_g_raw(f: &SphereFrame, x: Point3, y: Point3) -> f64 {
    let k = Kelvin::new(f, x, y);
    (1.0 / x.dist(y) - f.radius / k.q.sqrt()) / FOUR_PI
}

#[inline]
pub fn sphere_dg_dny_raw(f: &SphereFrame, x: Point3, y: Point3, n_y: Vec3) -> f64 {
    let k = Kelvin::new(f, x, y);
    let a2 = f.radius * f.radius;
    fundamental_dny(x, y, n_y) + f.radius * k.dqy(a2, n_y) / (2.0 * FOUR_PI * k.q * k.q.sqrt())
}

#[inline]
pub fn sphere_dg_dnx_raw(f: &SphereFrame, x: Point3, n_x: Vec3, y: Point3) -> f64 {
    let k = Kelvin::new(f, x, y);
    let a2 = f.radius * f.radius;
    fundamental_dnx(x, y, n_x) + f.radius * k.dqx(a2, n_x) / (2.0 * FOUR_PI * k.q * k.q.sqrt())
}

#[inline]
pub fn sphere_d2g_raw(f: &SphereFrame, x: Point3, n_x: Vec3, y: Point3, n_y: Vec3) -> f64 {
    let k = Kelvin::new(f, x, y);
    let a2 = f.radius * f.radius;
    let q32 = k.q * k.q.sqrt();
    let cross = 4.0 * n_y.dot(k.yp) * n_x.dot(k.xp) - 2.0 * a2 * n_x.dot(n_y);
    let img = -1.5 * k.dqx(a2, n_x) * k.dqy(a2, n_y) / (q32 * k.q) + cross / q32;
    fundamental_d2(x, n_x, y, n_y) + f.radius * img / (2.0 * FOUR_PI)
}

/// Source, Kelvin image, mirrored source and mirrored Kelvin image of a unit
/// charge at `y`. `y` must not coincide with the centre.
pub fn hemisphere_images(f: &HemisphereFrame, y: Point3) -> ImageSet {
    let a = f.radius;
    let yp = y - f.center;
    let rho = yp.norm();
    let yk = f.center + yp * (a * a / (rho * rho));
    let s = a / rho;
    vec![(y, 1.0), (yk, -s), (f.mirror(y), -1.0), (f.mirror(yk), s)]
}

pub fn hemisphere_g(f: &HemisphereFrame, x: Point3, y: Point3) -> Result<f64, GreensError> {
    guard(x, y, f.radius)?;
    let s = f.sphere();
    let ym = f.mirror(y);
    Ok(sphere_g_raw(&s, x, y) - sphere_g_raw(&s, x, ym))
}

pub fn hemisphere_dg_dny(f: &HemisphereFrame, x: Point3, y: Point3, n_y: UnitVec3) -> Result<f64, GreensError> {
    guard(x, y, f.radius)?;
    let s = f.sphere();
    let n = n_y.get();
    Ok(sphere_dg_dny_raw(&s, x, y, n) - sphere_dg_dny_raw(&s, x, f.mirror(y), f.mirror_dir(n)))
}

pub fn hemisphere_d2g(
    f: &HemisphereFrame,
    xprime: Point3,
    y: Point3,
    n_x: UnitVec3,
    n_y: UnitVec3,
) -> Result<f64, GreensError> {
    guard(xprime, y, f.radius)?;
    let s = f.sphere();
    let (nx, ny) = (n_x.get(), n_y.get());
    Ok(sphere_d2g_raw(&s, xprime, nx, y, ny)
        - sphere_d2g_raw(&s, xprime, nx, f.mirror(y), f.mirror_dir(ny)))
}

/// Last-passage / cap kernel `(3 / (2 pi a^3)) cos(theta)` at a point of the cap.
pub fn h_kernel(f: &HemisphereFrame, y_on_gamma: Point3) -> Result<f64, GeometryError> {
    let a = f.radius;
    let d = y_on_gamma - f.center;
    let off = d.norm() - a;
    if off.abs() > 1e-9 * a {
        return Err(GeometryError::OffCap { offset: off });
    }
    Ok(h_kernel_cos(a, f.axis.get().dot(d) / a))
}

#[inline]
pub fn h_kernel_cos(a: f64, cos_theta: f64) -> f64 {
    3.0 * cos_theta / (2.0 * PI * a * a * a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frame() -> HemisphereFrame {
        let axis = UnitVec3::new(Vec3::new(0.3, -0.4, 0.8)).unwrap();
        HemisphereFrame::new(Vec3::new(0.2, 0.1, -0.3), 0.7, axis).unwrap()
    }

    fn inside(f: &HemisphereFrame, rng: &mut ChaCha8Rng) -> Point3 {
        loop {
            let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.02..0.98));
            if v.norm() < 0.98 && v.norm() > 0.02 {
                return f.center + f.basis().to_world(v * f.radius);
            }
        }
    }

    fn unit(rng: &mut ChaCha8Rng) -> UnitVec3 {
        UnitVec3::new(Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .unwrap()
    }

    #[test]
    fn fundamental_values() {
        assert_relative_eq!(fundamental(Vec3::ZERO, Vec3::X).unwrap(), 0.0795775, epsilon = 1e-7);
        assert_relative_eq!(fundamental(Vec3::ZERO, Vec3::Z * 4.0).unwrap(), 0.0198944, epsilon = 1e-7);
        assert!(fundamental(Vec3::X, Vec3::X).is_err());
    }

    #[test]
    fn hemisphere_g_vanishes_on_boundary() {
        let f = frame();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = inside(&f, &mut rng);
            let th: f64 = rng.gen_range(0.0..std::f64::consts::FRAC_PI_2);
            let ph: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let cap = f.spherical(f.radius, th, ph);
            let base = f.on_base(rng.gen_range(0.0..f.radius), ph);
            assert!(hemisphere_g(&f, x, cap).unwrap().abs() < 1e-10);
            assert!(hemisphere_g(&f, x, base).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn sphere_g_vanishes_on_surface() {
        let s = SphereFrame::new(Vec3::new(1.0, 0.0, 2.0), 1.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let y = s.center + unit(&mut rng).get() * rng.gen_range(0.0..1.2);
            let x = s.center + unit(&mut rng).get() * s.radius;
            assert!(sphere_g(&s, x, y).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn green_functions_are_symmetric() {
        let f = frame();
        let s = f.sphere();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let (x, y) = (inside(&f, &mut rng), inside(&f, &mut rng));
            let (a, b) = (hemisphere_g(&f, x, y).unwrap(), hemisphere_g(&f, y, x).unwrap());
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-12));
            let (a, b) = (sphere_g(&s, x, y).unwrap(), sphere_g(&s, y, x).unwrap());
            assert!((a - b).abs() <= 1e-10 * a.abs());
        }
    }

    #[test]
    fn image_set_matches_closed_form() {
        let f = frame();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let (x, y) = (inside(&f, &mut rng), inside(&f, &mut rng));
            let imgs = hemisphere_images(&f, y);
            assert_eq!(imgs.len(), 4);
            let sum: f64 = imgs.iter().map(|(p, q)| q / (FOUR_PI * x.dist(*p))).sum();
            assert_relative_eq!(sum, hemisphere_g(&f, x, y).unwrap(), max_relative = 1e-10, epsilon = 1e-13);
        }
    }

    #[test]
    fn green_functions_are_harmonic() {
        let f = frame();
        let s = f.sphere();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-4 * f.radius;
        for _ in 0..200 {
            let (x, y) = (inside(&f, &mut rng), inside(&f, &mut rng));
            if x.dist(y) < 0.1 * f.radius {
                continue;
            }
            for g in [
                &|p: Point3| hemisphere_g(&f, x, p).unwrap(),
                &|p: Point3| sphere_g(&s, x, p).unwrap(),
            ] as [&dyn Fn(Point3) -> f64; 2]
            {
                let c = g(y);
                let lap = [Vec3::X, Vec3::Y, Vec3::Z]
                    .iter()
                    .map(|e| g(y + *e * h) + g(y - *e * h) - 2.0 * c)
                    .sum::<f64>()
                    / (h * h);
                // second differences of an O(1/r) field carry O(h^2 / r^5) truncation
                // plus rounding of order eps * |g| / h^2
                let scale = 1.0 / (FOUR_PI * x.dist(y).powi(3));
                assert!(lap.abs() < 1e-3 * scale.max(1.0), "laplacian {lap}, scale {scale}");
            }
        }
    }

    fn fd_dny(g: &dyn Fn(Point3) -> f64, y: Point3, n: Vec3, h: f64) -> f64 {
        (g(y + n * h) - g(y - n * h)) / (2.0 * h)
    }

    #[test]
    fn sphere_derivatives_match_finite_differences() {
        let f = frame();
        let s = f.sphere();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = 1e-6 * s.radius;
        let mut checked = 0;
        while checked < 200 {
            let (x, y) = (inside(&f, &mut rng), inside(&f, &mut rng));
            if x.dist(y) < 0.2 * s.radius {
                continue;
            }
            checked += 1;
            let (nx, ny) = (unit(&mut rng), unit(&mut rng));
            let exact = sphere_dg_dny(&s, x, y, ny).unwrap();
            let fd = fd_dny(&|p| sphere_g_raw(&s, x, p), y, ny.get(), h);
            assert_relative_eq!(exact, fd, max_relative = 1e-6, epsilon = 1e-9);

            let exact = sphere_dg_dnx(&s, x, nx, y).unwrap();
            let fd = fd_dny(&|p| sphere_g_raw(&s, p, y), x, nx.get(), h);
            assert_relative_eq!(exact, fd, max_relative = 1e-6, epsilon = 1e-9);

            // nested difference: outer FD on the analytic first derivative
            let hx = 1e-5 * s.radius;
            let exact = sphere_d2g(&s, x, nx, y, ny).unwrap();
            let fd = fd_dny(&|p| sphere_dg_dny_raw(&s, p, y, ny.get()), x, nx.get(), hx);
            assert_relative_eq!(exact, fd, max_relative = 1e-5, epsilon = 1e-7);
        }
    }

    #[test]
    fn hemisphere_derivatives_match_finite_differences() {
        let f = frame();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-5 * f.radius;
        let mut checked = 0;
        while checked < 200 {
            let (x, y) = (inside(&f, &mut rng), inside(&f, &mut rng));
            if x.dist(y) < 0.2 * f.radius {
                continue;
            }
            checked += 1;
            let (nx, ny) = (unit(&mut rng), unit(&mut rng));
            let d1 = |p: Point3| hemisphere_dg_dny(&f, p, y, ny).unwrap();
            let exact = hemisphere_d2g(&f, x, y, nx, ny).unwrap();
            let fd = fd_dny(&d1, x, nx.get(), h);
            assert_relative_eq!(exact, fd, max_relative = 1e-5, epsilon = 1e-7);
            let g = |p: Point3| hemisphere_g(&f, x, p).unwrap();
            let fd = fd_dny(&g, y, ny.get(), 1e-6 * f.radius);
            assert_relative_eq!(hemisphere_dg_dny(&f, x, y, ny).unwrap(), fd, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn base_limit_kernel() {
        let f = HemisphereFrame::new(Vec3::ZERO, 0.5, UnitVec3::Z).unwrap();
        let down = -UnitVec3::Z;
        // at the rim the kernel vanishes
        let rim = f.on_base(0.5, 0.3);
        assert!(hemisphere_d2g(&f, Vec3::ZERO, rim, down, down).unwrap().abs() < 1e-12);
        let half = f.on_base(0.25, 1.1);
        let want = (64.0 - 8.0) / (2.0 * PI);
        assert_relative_eq!(want, 8.9127, epsilon = 1e-4);
        assert_relative_eq!(hemisphere_d2g(&f, Vec3::ZERO, half, down, down).unwrap(), want, max_relative = 1e-12);
    }

    #[test]
    fn cap_kernel_matches_image_sum() {
        let f = frame();
        let nx = -f.axis;
        for (th, ph) in [(0.0, 0.0), (0.3, 1.0), (1.2, 4.0), (1.5, 2.5)] {
            let y = f.spherical(f.radius, th, ph);
            let ny = UnitVec3::new(y - f.center).unwrap();
            let d2 = hemisphere_d2g(&f, f.center, y, nx, ny).unwrap();
            let h = h_kernel(&f, y).unwrap();
            assert!((d2 - h).abs() <= 1e-9 * h.abs().max(1e-6), "{d2} vs {h}");
        }
    }

    #[test]
    fn h_kernel_values() {
        let f = HemisphereFrame::new(Vec3::ZERO, 0.5, UnitVec3::Z).unwrap();
        assert_relative_eq!(h_kernel(&f, Vec3::new(0.0, 0.0, 0.5)).unwrap(), 3.819719, epsilon = 1e-6);
        assert!(h_kernel(&f, Vec3::new(0.5, 0.0, 0.0)).unwrap().abs() < 1e-15);
        assert!(matches!(h_kernel(&f, Vec3::new(0.0, 0.0, 0.6)), Err(GeometryError::OffCap { .. })));
    }

    proptest! {
        #[test]
        fn fundamental_is_symmetric(ax in -5.0..5.0f64, ay in -5.0..5.0f64, az in -5.0..5.0f64,
                                    bx in -5.0..5.0f64, by in -5.0..5.0f64, bz in -5.0..5.0f64) {
            let (x, y) = (Vec3::new(ax, ay, az), Vec3::new(bx, by, bz));
            prop_assume!(x.dist(y) > 1e-6);
            prop_assert_eq!(fundamental(x, y).unwrap(), fundamental(y, x).unwrap());
        }
    }
}
