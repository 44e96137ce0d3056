//! Last-passage Monte Carlo estimate of the charge density at a point of a
//! flat conductor held at unit potential.
//!
//! Walks start on the hemisphere cap with density proportional to the cap
//! kernel `h`, i.e. `cos(theta)` per unit area. A path that never returns to
//! the unit-potential conductor contributes `3/(2a)`; one that does
//! contributes nothing.

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::geometry::Scene;
use crate::greens::HemisphereFrame;
use crate::point_solver::frame_at;
use crate::rng::{path_rng, PathRng};
use crate::vec3::Point3;
use crate::wos::{check_reliability, simulate, walk, Exit, PathOutcome, StreamKey, WosConfig};

use rand::Rng;

/// Stream namespace for start-point sampling, distinct from walk streams.
const START_STREAM: u64 = u64::MAX;
const WALK_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Applicability {
    /// Only two-level (0/1) piecewise-constant data with the base on a 1 V feature.
    Strict,
    /// Any data: each path is weighted by `phi(x) - phi(exit)`. Reproduces
    /// the estimator's behaviour outside its range of validity.
    Permissive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastPassageResult {
    pub sigma_lp: f64,
    pub std_error: f64,
    pub n_paths: u64,
    pub n_infinity: u64,
    pub n_failed: u64,
    /// Exits per boundary feature.
    pub per_feature: Vec<u64>,
}

/// Point on the cap with area density proportional to `cos(theta)`.
pub fn sample_start_point(frame: &HemisphereFrame, rng: &mut PathRng) -> Point3 {
    let u: f64 = rng.gen();
    let v: f64 = rng.gen();
    let theta = u.sqrt().asin();
    frame.spherical(frame.radius, theta, std::f64::consts::TAU * v)
}

fn check_applicable(scene: &Scene, phi_x: f64) -> Result<(), SolverError> {
    let Some(levels) = scene.constant_levels() else {
        return Err(SolverError::NotApplicable("Dirichlet data is not piecewise constant".into()));
    };
    if levels.iter().any(|&l| l != 0.0 && l != 1.0) {
        return Err(SolverError::NotApplicable(format!("levels {levels:?} are not all 0 or 1")));
    }
    if phi_x != 1.0 {
        return Err(SolverError::NotApplicable("hemisphere base is not on a 1 V feature".into()));
    }
    Ok(())
}

pub fn estimate_lp(
    scene: &Scene,
    x: Point3,
    a: f64,
    n_paths: u64,
    cfg: &WosConfig,
    mode: Applicability,
) -> Result<LastPassageResult, SolverError> {
    cfg.validate()?;
    let frame = frame_at(scene, x, a)?;
    let phi_x = scene.eval_dirichlet(frame.center, 1e-9 * a.max(1.0))?;
    if mode == Applicability::Strict {
        check_applicable(scene, phi_x)?;
    }
    estimate_lp_with(&frame, n_paths, cfg.seed, |start, key| {
        let r = walk(scene, start, cfg, key).unwrap_or(crate::wos::ExitRecord {
            point: start,
            exit: Exit::Failed,
            steps: 0,
        });
        let value = match r.exit {
            Exit::Feature(id) => Some(scene.dirichlet_on(r.point, id)),
            Exit::Infinity => Some(0.0),
            Exit::Failed => None,
        };
        (r.exit, value.map(|v| phi_x - v), r.steps)
    })
}

/// Core estimator with a pluggable walker returning `(exit, weight, steps)`,
/// where the weight is `None` for failed paths.
pub fn estimate_lp_with<W>(frame: &HemisphereFrame, n_paths: u64, seed: u64, walker: W) -> Result<LastPassageResult, SolverError>
where
    W: Fn(Point3, StreamKey) -> (Exit, Option<f64>, u64) + Sync,
{
    if n_paths == 0 {
        return Err(SolverError::Invalid("n_paths must be positive".into()));
    }
    let tally = simulate(1, n_paths, |_, k| {
        let mut rng = path_rng(seed, START_STREAM, k);
        let start = sample_start_point(frame, &mut rng);
        let (exit, value, steps) = walker(start, StreamKey { point: WALK_STREAM, path: k });
        PathOutcome { value, exit, steps }
    })
    .remove(0);
    check_reliability(tally.n_failed, n_paths)?;
    let scale = 1.5 / frame.radius;
    Ok(LastPassageResult {
        sigma_lp: scale * tally.stats.mean,
        std_error: scale * (tally.stats.variance() / tally.stats.n as f64).sqrt(),
        n_paths,
        n_infinity: tally.n_infinity,
        n_failed: tally.n_failed,
        per_feature: tally.per_feature,
    })
}
