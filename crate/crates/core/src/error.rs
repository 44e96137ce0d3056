use thiserror::Error;

use crate::vec3::Point3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point ({x}, {y}, {z}) is not inside the open solution domain", x = .0.x, y = .0.y, z = .0.z)]
    DomainViolation(Point3),
    #[error("point ({x}, {y}, {z}) is {distance} from the nearest boundary feature (tolerance {eps})", x = .point.x, y = .point.y, z = .point.z)]
    Unclassifiable { point: Point3, distance: f64, eps: f64 },
    #[error("point is {offset} away from the hemisphere cap")]
    OffCap { offset: f64 },
    #[error("vector has zero or non-finite length")]
    DegenerateVector,
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("boundary near ({x}, {y}, {z}) is not flat", x = .0.x, y = .0.y, z = .0.z)]
    NotFlat(Point3),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreensError {
    #[error("coincident source and target points (separation {separation})")]
    Singular { separation: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("Gauss-Legendre order {0} outside supported range 1..=64")]
    OrderOutOfRange(usize),
    #[error("ring exclusion radius {delta} must satisfy 0 < delta < a = {a}")]
    BadRing { a: f64, delta: f64 },
    #[error("quadrature parameter out of range: {0}")]
    BadParameter(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WosError {
    #[error("{failed} of {total} walks exceeded the step budget (limit 0.1%)")]
    Unreliable { failed: u64, total: u64 },
    #[error("invalid walk configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Greens(#[from] GreensError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Wos(#[from] WosError),
    #[error("Dirichlet data undefined on the local disk: {0}")]
    DataUndefined(String),
    #[error("last-passage estimator not applicable: {0}")]
    NotApplicable(String),
    #[error("grid lookup outside covered range (theta = {theta}, max {max})")]
    Extrapolation { theta: f64, max: f64 },
    #[error("dense system is singular or ill-conditioned: {0}")]
    SingularSystem(String),
    #[error("mesh problem: {0}")]
    Mesh(String),
    #[error("target point is within {distance} of panel {panel} (minimum {min})")]
    NearField { panel: usize, distance: f64, min: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}
