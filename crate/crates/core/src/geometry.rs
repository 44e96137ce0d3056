//! Solvable scenes: boundary geometry, Dirichlet data and the solution side.
//!
//! Every boundary is a finite union of simple features (a plane, zero-thickness
//! rectangles or a disk in `z = 0`, or a sphere). Distance queries are exact,
//! which is what the walk-on-spheres sampler needs to pick the largest empty
//! ball around a point.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::vec3::{Point3, UnitVec3, Vec3};

/// Index of a boundary feature (plane, plate, disk or sphere) within a scene.
pub type FeatureId = usize;

/// Axis-aligned rectangle lying in the plane `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    #[inline]
    fn clamp(&self, p: Point3) -> Point3 {
        Vec3::new(p.x.clamp(self.x0, self.x1), p.y.clamp(self.y0, self.y1), 0.0)
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    fn overlaps(&self, o: &Rect) -> bool {
        let dx = self.x1.min(o.x1) - self.x0.max(o.x0);
        let dy = self.y1.min(o.y1) - self.y0.max(o.y0);
        dx > 0.0 && dy > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    /// Plane `z = height`; the solution domain is `z > height`.
    HalfSpace { height: f64 },
    /// Coplanar zero-thickness rectangles in `z = 0`, one feature per plate.
    PlateSet { plates: Vec<Rect> },
    /// Zero-thickness disk of the given radius centred at the origin in `z = 0`.
    ThinDisk { radius: f64 },
    Sphere { center: Point3, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainSide {
    Exterior,
    Interior,
}

/// Boundary values. Every variant is defined on all of three-space; scenes
/// only ever evaluate it on the boundary.
#[derive(Clone)]
pub enum DirichletData {
    Constant(f64),
    /// One constant per feature, indexed by [`FeatureId`].
    PerFeature(Vec<f64>),
    /// `strength / |p - location|`.
    PointCharge { strength: f64, location: Point3 },
    /// `sin(m x) sin(n y)`.
    SinProduct { m: f64, n: f64 },
    /// `offset + gradient . p`.
    Affine { offset: f64, gradient: Vec3 },
    /// `scale (x^2 - y^2)`.
    Saddle { scale: f64 },
    Custom(Arc<dyn Fn(Point3) -> f64 + Send + Sync>),
}

impl fmt::Debug for DirichletData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Self::PerFeature(v) => f.debug_tuple("PerFeature").field(v).finish(),
            Self::PointCharge { strength, location } => f
                .debug_struct("PointCharge")
                .field("strength", strength)
                .field("location", location)
                .finish(),
            Self::SinProduct { m, n } => {
                f.debug_struct("SinProduct").field("m", m).field("n", n).finish()
            }
            Self::Affine { offset, gradient } => f
                .debug_struct("Affine")
                .field("offset", offset)
                .field("gradient", gradient)
                .finish(),
            Self::Saddle { scale } => f.debug_struct("Saddle").field("scale", scale).finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl DirichletData {
    #[inline]
    fn eval(&self, p: Point3, feature: FeatureId) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::PerFeature(v) => v[feature],
            Self::PointCharge { strength, location } => strength / p.dist(*location),
            Self::SinProduct { m, n } => (m * p.x).sin() * (n * p.y).sin(),
            Self::Affine { offset, gradient } => offset + gradient.dot(p),
            Self::Saddle { scale } => scale * (p.x * p.x - p.y * p.y),
            Self::Custom(f) => f(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceQuery {
    pub distance: f64,
    pub feature: FeatureId,
}

/// Where a walk ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExitFeature {
    Feature(FeatureId),
    Infinity,
}

#[derive(Debug, Clone)]
pub struct Scene {
    shape: Shape,
    dirichlet: DirichletData,
    side: DomainSide,
}

impl Scene {
    pub fn new(shape: Shape, dirichlet: DirichletData, side: DomainSide) -> Result<Self, GeometryError> {
        match &shape {
            Shape::HalfSpace { height } => {
                if !height.is_finite() {
                    return Err(GeometryError::InvalidScene("non-finite plane height".into()));
                }
            }
            Shape::PlateSet { plates } => {
                if plates.is_empty() {
                    return Err(GeometryError::InvalidScene("plate set is empty".into()));
                }
                for (i, p) in plates.iter().enumerate() {
                    if !(p.x1 > p.x0 && p.y1 > p.y0) {
                        return Err(GeometryError::InvalidScene(format!("plate {i} has no area")));
                    }
                    for (j, q) in plates.iter().enumerate().skip(i + 1) {
                        if p.overlaps(q) {
                            return Err(GeometryError::InvalidScene(format!(
                                "plates {i} and {j} overlap"
                            )));
                        }
                    }
                }
            }
            Shape::ThinDisk { radius } | Shape::Sphere { radius, .. } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(GeometryError::InvalidScene("radius must be positive".into()));
                }
            }
        }
        if side == DomainSide::Interior && !matches!(shape, Shape::Sphere { .. }) {
            return Err(GeometryError::InvalidScene(
                "only sphere scenes have an interior solution domain".into(),
            ));
        }
        let n = Self::count_features(&shape);
        if let DirichletData::PerFeature(v) = &dirichlet {
            if v.len() != n {
                return Err(GeometryError::InvalidScene(format!(
                    "{} per-feature values for {n} features",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(GeometryError::InvalidScene("non-finite boundary value".into()));
            }
        }
        Ok(Self { shape, dirichlet, side })
    }

    /// Exterior scene (the usual case for conductors in free space).
    pub fn exterior(shape: Shape, dirichlet: DirichletData) -> Result<Self, GeometryError> {
        Self::new(shape, dirichlet, DomainSide::Exterior)
    }

    fn count_features(shape: &Shape) -> usize {
        match shape {
            Shape::PlateSet { plates } => plates.len(),
            _ => 1,
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dirichlet(&self) -> &DirichletData {
        &self.dirichlet
    }

    pub fn side(&self) -> DomainSide {
        self.side
    }

    pub fn feature_count(&self) -> usize {
        Self::count_features(&self.shape)
    }

    /// True when walks can never leave to infinity.
    pub fn is_bounded(&self) -> bool {
        matches!(self.shape, Shape::Sphere { .. }) && self.side == DomainSide::Interior
    }

    /// Exact distance to the boundary and the nearest feature, without
    /// checking that `p` lies in the solution domain. Ties go to the lowest
    /// feature index.
    #[inline]
    pub fn nearest(&self, p: Point3) -> (f64, FeatureId) {
        match &self.shape {
            Shape::HalfSpace { height } => ((p.z - height).abs(), 0),
            Shape::PlateSet { plates } => {
                let mut best = (f64::INFINITY, 0);
                for (i, r) in plates.iter().enumerate() {
                    let d2 = (p - r.clamp(p)).norm2();
                    if d2 < best.0 {
                        best = (d2, i);
                    }
                }
                (best.0.sqrt(), best.1)
            }
            Shape::ThinDisk { radius } => {
                let rho = p.x.hypot(p.y);
                if rho <= *radius {
                    (p.z.abs(), 0)
                } else {
                    ((rho - radius).hypot(p.z), 0)
                }
            }
            Shape::Sphere { center, radius } => (((p - *center).norm() - radius).abs(), 0),
        }
    }

    /// Nearest boundary point and its feature.
    pub fn project(&self, p: Point3) -> (Point3, FeatureId) {
        match &self.shape {
            Shape::HalfSpace { height } => (Vec3::new(p.x, p.y, *height), 0),
            Shape::PlateSet { plates } => {
                let (_, id) = self.nearest(p);
                (plates[id].clamp(p), id)
            }
            Shape::ThinDisk { radius } => {
                let rho = p.x.hypot(p.y);
                if rho <= *radius {
                    (Vec3::new(p.x, p.y, 0.0), 0)
                } else {
                    let s = radius / rho;
                    (Vec3::new(p.x * s, p.y * s, 0.0), 0)
                }
            }
            Shape::Sphere { center, radius } => {
                let d = p - *center;
                let n = d.norm();
                if n == 0.0 {
                    (*center + Vec3::Z * *radius, 0)
                } else {
                    (*center + d * (radius / n), 0)
                }
            }
        }
    }

    /// Whether `p` lies strictly inside the open solution domain.
    pub fn in_domain(&self, p: Point3) -> bool {
        if !p.is_finite() {
            return false;
        }
        match &self.shape {
            Shape::HalfSpace { height } => p.z > *height,
            Shape::PlateSet { .. } | Shape::ThinDisk { .. } => self.nearest(p).0 > 0.0,
            Shape::Sphere { center, radius } => {
                let r = (p - *center).norm();
                match self.side {
                    DomainSide::Exterior => r > *radius,
                    DomainSide::Interior => r < *radius,
                }
            }
        }
    }

    pub fn distance_to_boundary(&self, p: Point3) -> Result<DistanceQuery, GeometryError> {
        if !self.in_domain(p) {
            return Err(GeometryError::DomainViolation(p));
        }
        let (distance, feature) = self.nearest(p);
        Ok(DistanceQuery { distance, feature })
    }

    /// Boundary value at a point already known to lie on `feature`.
    #[inline]
    pub fn dirichlet_on(&self, p: Point3, feature: FeatureId) -> f64 {
        self.dirichlet.eval(p, feature)
    }

    /// Boundary value at the projection of `p`, which must lie within `eps`
    /// of the boundary.
    pub fn eval_dirichlet(&self, p: Point3, eps: f64) -> Result<f64, GeometryError> {
        let (d, _) = self.nearest(p);
        if d > eps {
            return Err(GeometryError::Unclassifiable { point: p, distance: d, eps });
        }
        let (q, id) = self.project(p);
        Ok(self.dirichlet.eval(q, id))
    }

    pub fn classify_exit(&self, p: Point3, eps: f64, trunc_radius: f64) -> Result<ExitFeature, GeometryError> {
        if !self.is_bounded() && p.norm() > trunc_radius {
            return Ok(ExitFeature::Infinity);
        }
        let (d, id) = self.nearest(p);
        if d <= eps {
            Ok(ExitFeature::Feature(id))
        } else {
            Err(GeometryError::Unclassifiable { point: p, distance: d, eps })
        }
    }

    /// Unit normal at a boundary point pointing out of the solution domain.
    ///
    /// Thin plates and disks are two-sided; the normal returned is the one
    /// for the upper (`z > 0`) side.
    pub fn outward_normal(&self, p: Point3) -> UnitVec3 {
        match &self.shape {
            Shape::HalfSpace { .. } | Shape::PlateSet { .. } | Shape::ThinDisk { .. } => -UnitVec3::Z,
            Shape::Sphere { center, .. } => {
                let radial = UnitVec3::new(p - *center).unwrap_or(UnitVec3::Z);
                match self.side {
                    DomainSide::Exterior => -radial,
                    DomainSide::Interior => radial,
                }
            }
        }
    }

    /// Whether the boundary around `p` is a plane (every feature except a sphere).
    pub fn is_flat(&self) -> bool {
        !matches!(self.shape, Shape::Sphere { .. })
    }

    /// Distinct boundary levels when the data is piecewise constant.
    pub fn constant_levels(&self) -> Option<Vec<f64>> {
        match &self.dirichlet {
            DirichletData::Constant(c) => Some(vec![*c; self.feature_count()]),
            DirichletData::PerFeature(v) => Some(v.clone()),
            _ => None,
        }
    }
}

/// The four-plate layout: unit squares tiling `[-1,1]^2` by quadrant, listed
/// as plates I (`x>0,y>0`), II, III, IV counter-clockwise.
pub fn four_plates() -> Vec<Rect> {
    vec![
        Rect::new(0.0, 1.0, 0.0, 1.0),
        Rect::new(-1.0, 0.0, 0.0, 1.0),
        Rect::new(-1.0, 0.0, -1.0, 0.0),
        Rect::new(0.0, 1.0, -1.0, 0.0),
    ]
}
