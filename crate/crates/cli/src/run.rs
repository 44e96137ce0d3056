//! Executes a [`RunConfig`]: expands the sweep, runs each method per sweep
//! point and collects one results table.

use std::fmt;
use std::time::Instant;

use biewos_core::field_eval::{evaluate_many, exterior_sphere_data};
use biewos_core::last_passage::{estimate_lp, Applicability};
use biewos_core::patch_solver::{solve_patch, BieKind, PatchParams, PatchSetup};
use biewos_core::point_solver::{frame_at, sigma2_prime, solve_point, PointParams};
use biewos_core::reference_bem::solve_charge_density;
use biewos_core::wos::{ExactSampler, WosSampler};
use biewos_core::{DirichletData, DomainSide, Scene, Shape, SolverError, Vec3};
use serde::Serialize;
use toml::{Table, Value};

use crate::config::{self, ConfigError, KindSpec, LpMode, MethodSpec, Reference, RunConfig, SamplerSpec, WalkSpec};

/// Bumped whenever a method's column set changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{method}")]
    Solver { method: String, source: SolverError },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Empty => Ok(()),
        }
    }
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        }
    }
}

fn value_cell(v: &Value) -> Cell {
    match v {
        Value::Float(x) => Cell::Num(*x),
        Value::Integer(i) if *i >= 0 => Cell::Int(*i as u64),
        Value::Integer(i) => Cell::Num(*i as f64),
        Value::String(s) => Cell::Text(s.clone()),
        Value::Table(t) => Cell::Text(t.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")),
        other => Cell::Text(other.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub git: Option<String>,
    pub schema: String,
    pub config: Table,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Wall-clock seconds spent on each sweep point (all methods).
    pub point_seconds: Vec<f64>,
    pub total_seconds: f64,
    pub total_paths: u64,
}

impl RunRecord {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of a column, `None` for empty cells.
    pub fn values(&self, name: &str) -> Vec<Option<f64>> {
        match self.column(name) {
            Some(k) => self.rows.iter().map(|r| r[k].as_f64()).collect(),
            None => Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<String, RunError> {
        let mut out = String::new();
        out.push_str(&format!("# {} {}\n", self.tool, self.version));
        out.push_str(&format!("# schema: {}\n", self.schema));
        if let Some(seed) = self.config.get("walk").and_then(|w| w.get("seed")) {
            out.push_str(&format!("# seed: {seed}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|c| c.to_string()))?;
        }
        let body = w.into_inner().map_err(|e| RunError::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        Ok(out)
    }
}

struct MethodOutput {
    rows: Vec<Vec<Cell>>,
    primary: Option<f64>,
    paths: u64,
}

fn columns_of(m: &MethodSpec) -> &'static [&'static str] {
    match m {
        MethodSpec::BiewosPoint { .. } => &["sigma1", "sigma2", "total", "err_pct", "se", "paths"],
        MethodSpec::LastPassage { .. } => &["sigma_lp", "err_pct", "se", "paths", "n_infinity", "n_failed"],
        MethodSpec::BiewosPatch { .. } => &["panel", "cx", "cy", "cz", "r", "dudn", "se_bound", "err_pct", "paths"],
        MethodSpec::ReferenceBem { .. } => &["sigma", "err_pct", "total_charge", "panels"],
        MethodSpec::FieldEval { .. } => &["tx", "ty", "tz", "u", "exact", "err_pct", "panels"],
    }
}

fn schema_of(cfg: &RunConfig) -> String {
    let methods: Vec<&str> = cfg.method.iter().map(MethodSpec::name).collect();
    format!("biewos/v{SCHEMA_VERSION} {}", methods.join("+"))
}

/// Sweep points as lists of (key, value), Cartesian product in key order.
fn sweep_points(cfg: &RunConfig) -> Vec<Vec<(String, Value)>> {
    let mut points: Vec<Vec<(String, Value)>> = vec![Vec::new()];
    for (k, vals) in &cfg.sweep {
        points = points
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((k.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    points
}

fn err_pct(value: Option<f64>, reference: Option<f64>) -> Cell {
    match (value, reference) {
        (Some(v), Some(r)) if r != 0.0 => Cell::Num(100.0 * (v / r - 1.0)),
        _ => Cell::Empty,
    }
}

fn solver(m: &MethodSpec) -> impl Fn(SolverError) -> RunError + '_ {
    move |source| RunError::Solver { method: m.label(), source }
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn resolve_reference(scene: &Scene, walk: &WalkSpec, m: &MethodSpec, r: &Option<Reference>) -> Result<Option<f64>, RunError> {
    match r {
        None => Ok(None),
        Some(Reference::Value(v)) => Ok(Some(*v)),
        Some(Reference::Rerun(over)) => {
            let mut t = Value::try_from(m).map_err(|e| RunError::Unsupported(e.to_string()))?;
            let tab = t.as_table_mut().expect("methods serialize to tables");
            tab.remove("reference");
            for (k, v) in over {
                tab.insert(k.clone(), v.clone());
            }
            let spec: MethodSpec = t.try_into().map_err(|e: toml::de::Error| ConfigError::Field {
                path: format!("{}.reference", m.label()),
                msg: e.to_string(),
            })?;
            Ok(run_method(scene, walk, &spec)?.primary)
        }
    }
}

fn run_method(scene: &Scene, walk: &WalkSpec, m: &MethodSpec) -> Result<MethodOutput, RunError> {
    let e = solver(m);
    match m {
        MethodSpec::BiewosPoint { x, a, delta_ratio, n_g1, n_g2, n_paths, sigma2_only, reference, .. } => {
            let x = v3(*x);
            let params = PointParams { a: *a, delta_ratio: *delta_ratio, n_g1: *n_g1, n_g2: *n_g2 };
            let reference = resolve_reference(scene, walk, m, reference)?;
            if *sigma2_only {
                let frame = frame_at(scene, x, *a).map_err(&e)?;
                let s2 = sigma2_prime(scene, &frame, delta_ratio * a, *n_g2).map_err(&e)?;
                let row = vec![Cell::Empty, Cell::Num(s2), Cell::Empty, err_pct(Some(s2), reference), Cell::Empty, Cell::Int(0)];
                return Ok(MethodOutput { rows: vec![row], primary: Some(s2), paths: 0 });
            }
            let r = solve_point(scene, x, &params, &walk.wos(*n_paths)).map_err(&e)?;
            let row = vec![
                Cell::Num(r.sigma1),
                Cell::Num(r.sigma2),
                Cell::Num(r.total),
                err_pct(Some(r.total), reference),
                Cell::Num(r.std_error),
                Cell::Int(r.paths),
            ];
            Ok(MethodOutput { rows: vec![row], primary: Some(r.total), paths: r.paths })
        }
        MethodSpec::LastPassage { x, a, n_paths, mode, reference, .. } => {
            let mode = match mode {
                LpMode::Strict => Applicability::Strict,
                LpMode::Permissive => Applicability::Permissive,
            };
            let reference = resolve_reference(scene, walk, m, reference)?;
            let r = estimate_lp(scene, v3(*x), *a, *n_paths, &walk.wos(*n_paths), mode).map_err(&e)?;
            let row = vec![
                Cell::Num(r.sigma_lp),
                err_pct(Some(r.sigma_lp), reference),
                Cell::Num(r.std_error),
                Cell::Int(r.n_paths),
                Cell::Int(r.n_infinity),
                Cell::Int(r.n_failed),
            ];
            Ok(MethodOutput { rows: vec![row], primary: Some(r.sigma_lp), paths: r.n_paths })
        }
        MethodSpec::ReferenceBem { x, n_panels, reference, .. } => {
            let reference = resolve_reference(scene, walk, m, reference)?;
            let sol = solve_charge_density(scene, *n_panels).map_err(&e)?;
            let s = sol.density_at(v3(*x)).map_err(&e)?;
            let row = vec![Cell::Num(s), err_pct(Some(s), reference), Cell::Num(sol.total_charge()), Cell::Int(sol.panel_count() as u64)];
            Ok(MethodOutput { rows: vec![row], primary: Some(s), paths: 0 })
        }
        MethodSpec::BiewosPatch { x, a, n_rings, n_theta, n_phi, n_paths, kind, sampler, reference, .. } => {
            let kind = match kind {
                KindSpec::First => BieKind::FirstKind,
                KindSpec::Second => BieKind::SecondKind,
            };
            let params = PatchParams { a: *a, n_rings: *n_rings, n_theta: *n_theta, n_phi: *n_phi, kind, ..Default::default() };
            let setup = PatchSetup::new(scene, v3(*x), params).map_err(&e)?;
            let field = match sampler {
                SamplerSpec::Walk => solve_patch(scene, &setup, kind, &WosSampler { scene, cfg: walk.wos(*n_paths) }),
                SamplerSpec::Exact => {
                    if matches!(scene.dirichlet(), DirichletData::PerFeature(_)) {
                        return Err(RunError::Unsupported("exact sampler needs data given by a formula".into()));
                    }
                    solve_patch(scene, &setup, kind, &ExactSampler(|p| scene.dirichlet_on(p, 0)))
                }
            }
            .map_err(&e)?;
            let rows = setup
                .mesh
                .panels
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    vec![
                        Cell::Int(i as u64),
                        Cell::Num(p.centroid.x),
                        Cell::Num(p.centroid.y),
                        Cell::Num(p.centroid.z),
                        Cell::Num(field.r[i]),
                        Cell::Num(field.values[i]),
                        Cell::Num(field.std_errors[i]),
                        err_pct(Some(field.values[i]), *reference),
                        Cell::Int(field.paths),
                    ]
                })
                .collect();
            Ok(MethodOutput { rows, primary: None, paths: field.paths })
        }
        MethodSpec::FieldEval { level, targets, .. } => {
            let (Shape::Sphere { center, radius }, DirichletData::PointCharge { strength, location }, DomainSide::Exterior) =
                (scene.shape(), scene.dirichlet(), scene.side())
            else {
                return Err(RunError::Unsupported(
                    "field_eval needs closed-form Neumann data: an exterior sphere with a point charge at its centre".into(),
                ));
            };
            if location.dist(*center) > 1e-12 * radius {
                return Err(RunError::Unsupported("field_eval: the point charge must sit at the sphere centre".into()));
            }
            let (s, loc, r) = (*strength, *location, *radius);
            let data = exterior_sphere_data(*center, r, *level, |p| s / p.dist(loc), |_| s / (r * r));
            let xs: Vec<Vec3> = targets.iter().map(|t| v3(*t)).collect();
            let us = evaluate_many(&data, &xs).map_err(&e)?;
            let rows = xs
                .iter()
                .zip(us)
                .map(|(x, u)| {
                    let exact = s / x.dist(loc);
                    vec![
                        Cell::Num(x.x),
                        Cell::Num(x.y),
                        Cell::Num(x.z),
                        Cell::Num(u),
                        Cell::Num(exact),
                        err_pct(Some(u), Some(exact)),
                        Cell::Int(data.panels.len() as u64),
                    ]
                })
                .collect();
            Ok(MethodOutput { rows, primary: None, paths: 0 })
        }
    }
}

/// Run a validated configuration. `doc` is the TOML it was parsed from
/// (with overrides applied); sweep values are applied to it per point.
pub fn execute(doc: &Table, cfg: &RunConfig) -> Result<RunRecord, RunError> {
    let start = Instant::now();
    let sweep_keys: Vec<String> = cfg.sweep.keys().cloned().collect();
    let multi = cfg.method.len() > 1;
    let mut columns = sweep_keys.clone();
    for m in &cfg.method {
        for c in columns_of(m) {
            columns.push(if multi { format!("{}.{c}", m.label()) } else { (*c).to_string() });
        }
    }
    let mut rows = Vec::new();
    let mut point_seconds = Vec::new();
    let mut total_paths = 0;
    for point in sweep_points(cfg) {
        let t0 = Instant::now();
        let mut d = doc.clone();
        d.remove("sweep");
        for (k, v) in &point {
            match v {
                // a table sets several parameters together; its key is only a column name
                Value::Table(t) => {
                    for (k2, v2) in t {
                        config::set_path(&mut d, k2, v2.clone())?;
                    }
                }
                _ => config::set_path(&mut d, k, v.clone())?,
            }
        }
        let pcfg = config::from_table(&d)?;
        let scene = pcfg.scene.build()?;
        let prefix: Vec<Cell> = point.iter().map(|(_, v)| value_cell(v)).collect();
        let mut joined = prefix.clone();
        let mut method_rows = Vec::new();
        for m in &pcfg.method {
            let out = run_method(&scene, &pcfg.walk, m)?;
            total_paths += out.paths;
            if multi {
                joined.extend(out.rows.into_iter().next().expect("single-row method"));
            } else {
                method_rows = out.rows;
            }
        }
        if multi {
            rows.push(joined);
        } else {
            rows.extend(method_rows.into_iter().map(|r| prefix.iter().cloned().chain(r).collect()));
        }
        point_seconds.push(t0.elapsed().as_secs_f64());
    }
    Ok(RunRecord {
        tool: "biewos".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        git: option_env!("BIEWOS_GIT_REV").map(String::from),
        schema: schema_of(cfg),
        config: doc.clone(),
        columns,
        rows,
        point_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
        total_paths,
    })
}

/// Load, run and write outputs named in the config.
pub fn run_file(text: &str, sets: &[String]) -> Result<RunRecord, RunError> {
    let (doc, cfg) = config::load(text, sets)?;
    let rec = execute(&doc, &cfg)?;
    if let Some(p) = &cfg.output.csv {
        std::fs::write(p, rec.to_csv()?)?;
    }
    if let Some(p) = &cfg.output.json {
        std::fs::write(p, serde_json::to_string_pretty(&rec)?)?;
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DISK_BEM: &str = r#"
[scene]
shape = "disk"
radius = 1.0
data = { kind = "constant", value = 1.0 }

[[method]]
name = "reference_bem"
x = [-0.5, 0, 0]
n_panels = 40
reference = 0.735105

[sweep]
n_panels = [20, 40]
"#;

    #[test]
    fn sweep_rows_and_columns() {
        let (doc, cfg) = config::load(DISK_BEM, &[]).unwrap();
        let rec = execute(&doc, &cfg).unwrap();
        assert_eq!(rec.columns, ["n_panels", "sigma", "err_pct", "total_charge", "panels"]);
        assert_eq!(rec.rows.len(), 2);
        assert_eq!(rec.rows[1][4], Cell::Int(40));
        let errs = rec.values("err_pct");
        assert!(errs.iter().all(|e| e.unwrap().abs() < 1.0));
        let csv = rec.to_csv().unwrap();
        assert!(csv.starts_with("# biewos "));
        assert!(csv.contains("# schema: biewos/v1 reference_bem\n"));
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let (doc, cfg) = config::load(&DISK_BEM.replace("[20, 40]", "[]"), &[]).unwrap();
        let rec = execute(&doc, &cfg).unwrap();
        assert!(rec.rows.is_empty());
        let csv = rec.to_csv().unwrap();
        assert_eq!(csv.lines().last().unwrap(), "n_panels,sigma,err_pct,total_charge,panels");
    }

    #[test]
    fn rerun_reference() {
        let text = r#"
[scene]
shape = "half_space"
data = { kind = "point_charge", strength = 1.0, location = [0, 0, -1] }

[[method]]
name = "biewos_point"
x = [0.5, 0, 0]
a = 0.5
sigma2_only = true
reference = { n_g2 = 20, delta_ratio = 1e-6 }

[sweep]
n_g2 = [6, 20]
"#;
        let (doc, cfg) = config::load(text, &[]).unwrap();
        let rec = execute(&doc, &cfg).unwrap();
        let s2 = rec.values("sigma2");
        assert!((s2[1].unwrap() - 0.093054).abs() < 1e-4);
        assert_eq!(rec.rows[0][1], Cell::Empty);
    }

    #[test]
    fn multiple_methods_prefix_columns() {
        let text = r#"
[scene]
shape = "plates"
layout = "four"
data = { kind = "per_feature", levels = [0, 1, 0, 0] }

[[method]]
name = "reference_bem"
label = "coarse"
x = [-0.2273, 0.2273, 0]
n_panels = 3

[[method]]
name = "reference_bem"
label = "fine"
x = [-0.2273, 0.2273, 0]
n_panels = 5
"#;
        let (doc, cfg) = config::load(text, &[]).unwrap();
        let rec = execute(&doc, &cfg).unwrap();
        assert_eq!(rec.rows.len(), 1);
        assert_eq!(rec.columns[0], "coarse.sigma");
        assert_eq!(rec.columns[4], "fine.sigma");
    }

    #[test]
    fn solver_errors_name_the_method() {
        let text = DISK_BEM.replace("x = [-0.5, 0, 0]", "x = [-1.5, 0, 0]");
        let (doc, cfg) = config::load(&text, &[]).unwrap();
        let e = execute(&doc, &cfg).unwrap_err();
        assert!(matches!(e, RunError::Solver { .. }));
        assert_eq!(e.to_string(), "reference_bem");
        assert!(std::error::Error::source(&e).is_some());
    }
}
