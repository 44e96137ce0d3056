//! Hybrid walk-on-spheres / boundary-integral solver for the Laplace
//! Dirichlet-to-Neumann map.
//!
//! The Neumann data (surface charge density) at a boundary point or over a
//! boundary patch is computed from local boundary integral equations on a
//! hemisphere or sphere placed on the boundary. Potential values on the
//! curved part of that surface come from walk-on-spheres estimates.

pub mod error;
pub mod field_eval;
pub mod geometry;
pub mod greens;
pub mod last_passage;
pub mod mesh;
pub mod patch_solver;
pub mod quadrature;
pub mod reference_bem;
pub mod point_solver;
pub mod rng;
pub mod vec3;
pub mod wos;

pub use error::{GeometryError, GreensError, QuadratureError, SolverError, WosError};
pub use geometry::{DirichletData, DomainSide, Rect, Scene, Shape};
pub use vec3::{Point3, UnitVec3, Vec3};
pub use wos::{Estimate, WosConfig};
