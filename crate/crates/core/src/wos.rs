//! Walk on spheres: Brownian exit points and Monte Carlo estimates of the
//! harmonic extension of the Dirichlet data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, WosError};
use crate::geometry::{FeatureId, Scene};
use crate::rng::{path_rng, unit_sphere};
use crate::vec3::Point3;

/// Paths per parallel work item. Fixed so that the reduction tree, and thus
/// every floating-point sum, is independent of the worker count.
const CHUNK: u64 = 1024;

/// Largest tolerated fraction of walks that hit the step budget.
pub const MAX_FAILED_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WosConfig {
    pub eps_shell: f64,
    pub trunc_radius: f64,
    pub n_paths: u64,
    pub max_steps: u64,
    pub seed: u64,
}

impl Default for WosConfig {
    fn default() -> Self {
        Self { eps_shell: 1e-5, trunc_radius: 1e5, n_paths: 1000, max_steps: 10_000, seed: 0 }
    }
}

impl WosConfig {
    pub fn validate(&self) -> Result<(), WosError> {
        if !(self.eps_shell > 0.0 && self.trunc_radius > 0.0 && self.eps_shell < 1e-2 * self.trunc_radius) {
            return Err(WosError::BadConfig(format!(
                "need 0 < eps_shell ({}) << trunc_radius ({})",
                self.eps_shell, self.trunc_radius
            )));
        }
        if self.n_paths == 0 || self.max_steps == 0 {
            return Err(WosError::BadConfig("n_paths and max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Identifies one walk's random stream within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub point: u64,
    pub path: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Feature(FeatureId),
    Infinity,
    /// The step budget ran out first.
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitRecord {
    /// Projection onto the hit feature, the last position otherwise.
    pub point: Point3,
    pub exit: Exit,
    pub steps: u64,
}

pub fn walk(scene: &Scene, start: Point3, cfg: &WosConfig, key: StreamKey) -> Result<ExitRecord, WosError> {
    if !scene.in_domain(start) {
        return Err(GeometryError::DomainViolation(start).into());
    }
    Ok(walk_unchecked(scene, start, cfg, key))
}

fn walk_unchecked(scene: &Scene, start: Point3, cfg: &WosConfig, key: StreamKey) -> ExitRecord {
    let mut rng = path_rng(cfg.seed, key.point, key.path);
    let bounded = scene.is_bounded();
    let trunc2 = cfg.trunc_radius * cfg.trunc_radius;
    let mut p = start;
    let mut steps = 0;
    loop {
        let (d, id) = scene.nearest(p);
        if d <= cfg.eps_shell {
            let (q, id2) = scene.project(p);
            debug_assert_eq!(id, id2);
            return ExitRecord { point: q, exit: Exit::Feature(id), steps };
        }
        if !bounded && p.norm2() > trunc2 {
            return ExitRecord { point: p, exit: Exit::Infinity, steps };
        }
        if steps >= cfg.max_steps {
            return ExitRecord { point: p, exit: Exit::Failed, steps };
        }
        p += unit_sphere(&mut rng) * d;
        steps += 1;
    }
}

/// Streaming mean/variance (Welford), mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Welford {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, o: &Welford) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * (self.n as f64 * o.n as f64 / n as f64);
        self.n = n;
    }

    /// Unbiased sample variance (0 for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

/// Outcome of one simulated path as seen by a reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    /// `None` for a failed path.
    pub value: Option<f64>,
    pub exit: Exit,
    pub steps: u64,
}

/// Reduction over the paths of one point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tally {
    pub stats: Welford,
    pub n_infinity: u64,
    pub n_failed: u64,
    pub per_feature: Vec<u64>,
    pub steps: u64,
}

impl Tally {
    fn push(&mut self, o: PathOutcome) {
        self.steps += o.steps;
        match o.exit {
            Exit::Infinity => self.n_infinity += 1,
            Exit::Failed => self.n_failed += 1,
            Exit::Feature(id) => {
                if self.per_feature.len() <= id {
                    self.per_feature.resize(id + 1, 0);
                }
                self.per_feature[id] += 1;
            }
        }
        if let Some(v) = o.value {
            self.stats.push(v);
        }
    }

    fn merge(&mut self, o: &Tally) {
        self.stats.merge(&o.stats);
        self.n_infinity += o.n_infinity;
        self.n_failed += o.n_failed;
        self.steps += o.steps;
        if self.per_feature.len() < o.per_feature.len() {
            self.per_feature.resize(o.per_feature.len(), 0);
        }
        for (a, b) in self.per_feature.iter_mut().zip(&o.per_feature) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.n_failed + self.per_feature.iter().sum::<u64>() + self.n_infinity
    }
}

/// Run `n_paths` paths for each of `n_points` points in parallel, reducing
/// per point in path order. The result does not depend on the thread count.
pub fn simulate<F>(n_points: usize, n_paths: u64, path: F) -> Vec<Tally>
where
    F: Fn(usize, u64) -> PathOutcome + Sync,
{
    let chunks_per_point = n_paths.div_ceil(CHUNK);
    let tasks: Vec<(usize, u64)> =
        (0..n_points).flat_map(|i| (0..chunks_per_point).map(move |c| (i, c))).collect();
    let partial: Vec<Tally> = tasks
        .par_iter()
        .map(|&(i, c)| {
            let mut t = Tally::default();
            for k in c * CHUNK..((c + 1) * CHUNK).min(n_paths) {
                t.push(path(i, k));
            }
            t
        })
        .collect();
    let mut out = vec![Tally::default(); n_points];
    for (&(i, _), t) in tasks.iter().zip(&partial) {
        out[i].merge(t);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub variance: f64,
    /// Successful paths.
    pub n: u64,
    pub n_infinity: u64,
    pub n_failed: u64,
}

impl Estimate {
    /// A noiseless value, e.g. from an exact oracle.
    pub fn exact(value: f64) -> Self {
        Self { mean: value, variance: 0.0, n: 1, n_infinity: 0, n_failed: 0 }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance / self.n as f64).sqrt()
        }
    }
}

pub(crate) fn check_reliability(failed: u64, total: u64) -> Result<(), WosError> {
    if failed as f64 > MAX_FAILED_FRACTION * total as f64 {
        return Err(WosError::Unreliable { failed, total });
    }
    Ok(())
}

fn potential_path(scene: &Scene, p: Point3, cfg: &WosConfig, key: StreamKey) -> PathOutcome {
    let r = walk_unchecked(scene, p, cfg, key);
    let value = match r.exit {
        Exit::Feature(id) => Some(scene.dirichlet_on(r.point, id)),
        Exit::Infinity => Some(0.0),
        Exit::Failed => None,
    };
    PathOutcome { value, exit: r.exit, steps: r.steps }
}

pub fn estimate_u(scene: &Scene, p: Point3, cfg: &WosConfig) -> Result<Estimate, WosError> {
    Ok(estimate_u_batch(scene, &[p], cfg)?.remove(0))
}

/// Estimates at many points; point `i` uses stream keys `(i, 0..n_paths)`.
pub fn estimate_u_batch(scene: &Scene, points: &[Point3], cfg: &WosConfig) -> Result<Vec<Estimate>, WosError> {
    estimate_u_batch_keyed(scene, points, cfg, 0)
}

/// As [`estimate_u_batch`] with point ids starting at `first_id`, so that
/// separate batches in one run draw from disjoint streams.
pub fn estimate_u_batch_keyed(
    scene: &Scene,
    points: &[Point3],
    cfg: &WosConfig,
    first_id: u64,
) -> Result<Vec<Estimate>, WosError> {
    cfg.validate()?;
    if let Some(p) = points.iter().find(|p| !scene.in_domain(**p)) {
        return Err(GeometryError::DomainViolation(*p).into());
    }
    let tallies = simulate(points.len(), cfg.n_paths, |i, k| {
        potential_path(scene, points[i], cfg, StreamKey { point: first_id + i as u64, path: k })
    });
    tallies
        .into_iter()
        .map(|t| {
            check_reliability(t.n_failed, cfg.n_paths)?;
            Ok(Estimate {
                mean: t.stats.mean,
                variance: t.stats.variance(),
                n: t.stats.n,
                n_infinity: t.n_infinity,
                n_failed: t.n_failed,
            })
        })
        .collect()
}

/// Source of potential values at interior points, so that solvers can be
/// driven by walk on spheres or by an exact field in tests.
pub trait Sampler: Sync {
    /// `first_id` namespaces the random streams of this batch.
    fn sample(&self, points: &[Point3], first_id: u64) -> Result<Vec<Estimate>, WosError>;

    /// Total paths spent per point (0 for exact samplers).
    fn paths_per_point(&self) -> u64 {
        0
    }
}

pub struct WosSampler<'a> {
    pub scene: &'a Scene,
    pub cfg: WosConfig,
}

impl Sampler for WosSampler<'_> {
    fn sample(&self, points: &[Point3], first_id: u64) -> Result<Vec<Estimate>, WosError> {
        estimate_u_batch_keyed(self.scene, points, &self.cfg, first_id)
    }

    fn paths_per_point(&self) -> u64 {
        self.cfg.n_paths
    }
}

/// Evaluates a known potential exactly.
pub struct ExactSampler<F>(pub F);

impl<F: Fn(Point3) -> f64 + Sync> Sampler for ExactSampler<F> {
    fn sample(&self, points: &[Point3], _first_id: u64) -> Result<Vec<Estimate>, WosError> {
        Ok(points.iter().map(|p| Estimate::exact((self.0)(*p))).collect())
    }
}
