//! Run configuration: a TOML document with `[scene]`, `[walk]`, one or more
//! `[[method]]` tables, an optional `[sweep]` and `[output]`.
//!
//! Overrides (`--set` and sweep points) are applied to the parsed TOML
//! before it is deserialized, so they are validated exactly like the file.

use std::collections::BTreeMap;
use std::path::PathBuf;

use biewos_core::geometry::four_plates;
use biewos_core::{DirichletData, DomainSide, Rect, Scene, Shape, Vec3, WosConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Parse(#[from] toml::de::Error),
    #[error("--set {0}: expected key=value")]
    BadOverride(String),
    #[error("{path}: {msg}")]
    Field { path: String, msg: String },
}

fn field(path: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Field { path: path.into(), msg: msg.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scene: SceneSpec,
    #[serde(default)]
    pub walk: WalkSpec,
    pub method: Vec<MethodSpec>,
    /// Parameter name (a method key, or a dotted path) to list of values.
    /// Keys are swept as a Cartesian product in sorted key order, the last
    /// key varying fastest. A value that is a table sets each of its
    /// entries, so paired parameters can move together.
    #[serde(default)]
    pub sweep: BTreeMap<String, Vec<Value>>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    HalfSpace,
    Plates,
    Disk,
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub shape: ShapeKind,
    pub height: Option<f64>,
    pub radius: Option<f64>,
    pub center: Option<[f64; 3]>,
    /// `"four"` for the four unit plates; otherwise give `rects`.
    pub layout: Option<String>,
    /// Plates as `[x0, x1, y0, y1]`.
    pub rects: Option<Vec<[f64; 4]>>,
    #[serde(default)]
    pub side: Side,
    pub data: DataSpec,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    #[default]
    Exterior,
    Interior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Constant { value: f64 },
    PerFeature { levels: Vec<f64> },
    PointCharge { strength: f64, location: [f64; 3] },
    SinProduct { m: f64, n: f64 },
    Affine { offset: f64, gradient: [f64; 3] },
    Saddle { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkSpec {
    pub eps_shell: f64,
    pub trunc_radius: f64,
    pub max_steps: u64,
    pub seed: u64,
}

impl Default for WalkSpec {
    fn default() -> Self {
        let d = WosConfig::default();
        Self { eps_shell: d.eps_shell, trunc_radius: d.trunc_radius, max_steps: d.max_steps, seed: d.seed }
    }
}

impl WalkSpec {
    pub fn wos(&self, n_paths: u64) -> WosConfig {
        WosConfig {
            eps_shell: self.eps_shell,
            trunc_radius: self.trunc_radius,
            n_paths,
            max_steps: self.max_steps,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reference {
    Value(f64),
    /// Re-run the same method with these parameter overrides and use its
    /// primary value.
    Rerun(Table),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpMode {
    #[default]
    Strict,
    Permissive,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindSpec {
    First,
    #[default]
    Second,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerSpec {
    #[default]
    Walk,
    /// The scene's Dirichlet formula evaluated off the boundary; exact when
    /// that formula is the harmonic solution.
    Exact,
}

fn d_delta() -> f64 {
    1e-4
}
fn d_20() -> usize {
    20
}
fn d_paths() -> u64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    BiewosPoint {
        label: Option<String>,
        x: [f64; 3],
        a: f64,
        #[serde(default = "d_delta")]
        delta_ratio: f64,
        #[serde(default = "d_20")]
        n_g1: usize,
        #[serde(default = "d_20")]
        n_g2: usize,
        #[serde(default = "d_paths")]
        n_paths: u64,
        /// Skip the walks and report only the deterministic disk term.
        #[serde(default)]
        sigma2_only: bool,
        reference: Option<Reference>,
    },
    LastPassage {
        label: Option<String>,
        x: [f64; 3],
        a: f64,
        n_paths: u64,
        #[serde(default)]
        mode: LpMode,
        reference: Option<Reference>,
    },
    BiewosPatch {
        label: Option<String>,
        x: [f64; 3],
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "d_12")]
        n_rings: usize,
        #[serde(default = "d_64")]
        n_theta: usize,
        #[serde(default = "d_128")]
        n_phi: usize,
        #[serde(default = "d_paths")]
        n_paths: u64,
        #[serde(default)]
        kind: KindSpec,
        #[serde(default)]
        sampler: SamplerSpec,
        reference: Option<f64>,
    },
    ReferenceBem {
        label: Option<String>,
        x: [f64; 3],
        n_panels: usize,
        reference: Option<Reference>,
    },
    FieldEval {
        label: Option<String>,
        /// Sphere subdivision level; `20 * 4^level` panels.
        level: usize,
        targets: Vec<[f64; 3]>,
    },
}

fn one() -> f64 {
    1.0
}
fn d_12() -> usize {
    12
}
fn d_64() -> usize {
    64
}
fn d_128() -> usize {
    128
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BiewosPoint { .. } => "biewos_point",
            Self::LastPassage { .. } => "last_passage",
            Self::BiewosPatch { .. } => "biewos_patch",
            Self::ReferenceBem { .. } => "reference_bem",
            Self::FieldEval { .. } => "field_eval",
        }
    }

    pub fn label(&self) -> String {
        let l = match self {
            Self::BiewosPoint { label, .. }
            | Self::LastPassage { label, .. }
            | Self::BiewosPatch { label, .. }
            | Self::ReferenceBem { label, .. }
            | Self::FieldEval { label, .. } => label,
        };
        l.clone().unwrap_or_else(|| self.name().to_string())
    }

    /// Methods producing several rows per sweep point.
    pub fn is_multi_row(&self) -> bool {
        matches!(self, Self::BiewosPatch { .. } | Self::FieldEval { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

impl SceneSpec {
    pub fn build(&self) -> Result<Scene, ConfigError> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| field(&format!("scene.{name}"), "required for this shape"));
        let shape = match self.shape {
            ShapeKind::HalfSpace => Shape::HalfSpace { height: self.height.unwrap_or(0.0) },
            ShapeKind::Disk => Shape::ThinDisk { radius: need(self.radius, "radius")? },
            ShapeKind::Sphere => Shape::Sphere { center: v3(self.center.unwrap_or([0.0; 3])), radius: need(self.radius, "radius")? },
            ShapeKind::Plates => {
                let plates = match (&self.layout, &self.rects) {
                    (Some(l), None) if l == "four" => four_plates(),
                    (Some(l), None) => return Err(field("scene.layout", format!("unknown layout {l:?}; known: \"four\""))),
                    (None, Some(r)) => r.iter().map(|r| Rect::new(r[0], r[1], r[2], r[3])).collect(),
                    _ => return Err(field("scene", "plates need exactly one of `layout` or `rects`")),
                };
                Shape::PlateSet { plates }
            }
        };
        let data = match &self.data {
            DataSpec::Constant { value } => DirichletData::Constant(*value),
            DataSpec::PerFeature { levels } => DirichletData::PerFeature(levels.clone()),
            DataSpec::PointCharge { strength, location } => DirichletData::PointCharge { strength: *strength, location: v3(*location) },
            DataSpec::SinProduct { m, n } => DirichletData::SinProduct { m: *m, n: *n },
            DataSpec::Affine { offset, gradient } => DirichletData::Affine { offset: *offset, gradient: v3(*gradient) },
            DataSpec::Saddle { scale } => DirichletData::Saddle { scale: *scale },
        };
        let side = match self.side {
            Side::Exterior => DomainSide::Exterior,
            Side::Interior => DomainSide::Interior,
        };
        Scene::new(shape, data, side).map_err(|e| field("scene", e.to_string()))
    }
}

/// Parse a `--set` value: a TOML literal if it parses as one, else a string.
fn parse_value(s: &str) -> Value {
    let doc = format!("v = {s}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(s.into())),
        Err(_) => Value::String(s.into()),
    }
}

/// Set `path` (dotted) in `doc`. A bare key (no dot) addresses every
/// `[[method]]` table that has such a parameter.
pub fn set_path(doc: &mut Table, path: &str, value: Value) -> Result<(), ConfigError> {
    if !path.contains('.') {
        let methods = doc
            .get_mut("method")
            .and_then(Value::as_array_mut)
            .ok_or_else(|| field(path, "no [[method]] tables to apply to"))?;
        let mut applied = 0;
        for m in methods {
            let t = m.as_table_mut().ok_or_else(|| field("method", "expected a table"))?;
            let mut trial = t.clone();
            trial.insert(path.into(), value.clone());
            let accepts = match MethodSpec::deserialize(Value::Table(trial)) {
                Ok(_) => true,
                Err(e) => !e.to_string().contains("unknown field"),
            };
            if accepts {
                t.insert(path.into(), value.clone());
                applied += 1;
            }
        }
        if applied == 0 {
            return Err(field(path, "no method takes this parameter"));
        }
        return Ok(());
    }
    // `label.key` addresses the method with that label
    if let Some((head, key)) = path.split_once('.') {
        if let Some(Value::Array(methods)) = doc.get_mut("method") {
            let target = methods.iter_mut().filter_map(Value::as_table_mut).find(|t| {
                let label = t.get("label").or_else(|| t.get("name"));
                label.and_then(Value::as_str) == Some(head)
            });
            if let Some(t) = target {
                t.insert(key.into(), value);
                return Ok(());
            }
        }
    }
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().expect("non-empty path");
    let mut cur = doc;
    for p in parts {
        cur = cur
            .entry(p)
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| field(path, format!("`{p}` is not a table")))?;
    }
    cur.insert(last.into(), value);
    Ok(())
}

pub fn apply_overrides(doc: &mut Table, sets: &[String]) -> Result<(), ConfigError> {
    for s in sets {
        let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::BadOverride(s.clone()))?;
        set_path(doc, k.trim(), parse_value(v.trim()))?;
    }
    Ok(())
}

/// Parse TOML text, apply overrides and validate.
pub fn load(text: &str, sets: &[String]) -> Result<(Table, RunConfig), ConfigError> {
    let mut doc: Table = text.parse()?;
    if sets.is_empty() {
        // errors then point into the file as written
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        return Ok((doc, cfg));
    }
    apply_overrides(&mut doc, sets)?;
    let cfg = from_table(&doc)?;
    Ok((doc, cfg))
}

pub fn from_table(doc: &Table) -> Result<RunConfig, ConfigError> {
    // round-trip through text so that errors carry line and column
    let text = toml::to_string(doc).map_err(|e| field("config", e.to_string()))?;
    let cfg: RunConfig = toml::from_str(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scene.build()?;
        if self.method.is_empty() {
            return Err(field("method", "at least one [[method]] is required"));
        }
        if self.method.len() > 1 && self.method.iter().any(MethodSpec::is_multi_row) {
            return Err(field("method", "biewos_patch and field_eval cannot share a run with other methods"));
        }
        let mut labels: Vec<String> = self.method.iter().map(MethodSpec::label).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != self.method.len() {
            return Err(field("method", "labels must be distinct; set `label` on repeated methods"));
        }
        if !(self.walk.eps_shell > 0.0 && self.walk.trunc_radius > 100.0 * self.walk.eps_shell && self.walk.max_steps > 0) {
            return Err(field("walk", "need 0 < eps_shell << trunc_radius and max_steps > 0"));
        }
        for (i, m) in self.method.iter().enumerate() {
            let at = |k: &str| format!("method[{i}].{k}");
            match m {
                MethodSpec::BiewosPoint { a, delta_ratio, n_g1, n_g2, n_paths, .. } => {
                    positive(*a, &at("a"))?;
                    if !(*delta_ratio > 0.0 && *delta_ratio < 1.0) {
                        return Err(field(&at("delta_ratio"), "must lie in (0, 1)"));
                    }
                    gauss(*n_g1, &at("n_g1"))?;
                    gauss(*n_g2, &at("n_g2"))?;
                    nonzero(*n_paths, &at("n_paths"))?;
                }
                MethodSpec::LastPassage { a, n_paths, .. } => {
                    positive(*a, &at("a"))?;
                    nonzero(*n_paths, &at("n_paths"))?;
                }
                MethodSpec::BiewosPatch { a, n_rings, n_theta, n_phi, n_paths, .. } => {
                    positive(*a, &at("a"))?;
                    nonzero(*n_rings as u64, &at("n_rings"))?;
                    if *n_theta < 2 || *n_phi < 3 {
                        return Err(field(&at("n_theta"), "grid needs n_theta >= 2 and n_phi >= 3"));
                    }
                    nonzero(*n_paths, &at("n_paths"))?;
                }
                MethodSpec::ReferenceBem { n_panels, .. } => nonzero(*n_panels as u64, &at("n_panels"))?,
                MethodSpec::FieldEval { level, .. } => {
                    if *level > 6 {
                        return Err(field(&at("level"), "at most 6 (81920 panels)"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn positive(v: f64, path: &str) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field(path, format!("must be positive, got {v}")))
    }
}

fn nonzero(v: u64, path: &str) -> Result<(), ConfigError> {
    if v > 0 {
        Ok(())
    } else {
        Err(field(path, "must be positive"))
    }
}

fn gauss(n: usize, path: &str) -> Result<(), ConfigError> {
    if (1..=64).contains(&n) {
        Ok(())
    } else {
        Err(field(path, format!("Gauss order must be in 1..=64, got {n}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[scene]
shape = "half_space"
data = { kind = "point_charge", strength = 1.0, location = [0, 0, -1] }

[[method]]
name = "biewos_point"
x = [0.5, 0, 0]
a = 0.5
"#;

    #[test]
    fn defaults_and_overrides() {
        let (_, cfg) = load(BASE, &["n_paths=50".into(), "walk.seed=7".into()]).unwrap();
        assert!(load(BASE, &["n_panels=5".into()]).unwrap_err().to_string().contains("no method"));
        let MethodSpec::BiewosPoint { n_paths, n_g1, delta_ratio, .. } = &cfg.method[0] else { panic!() };
        assert_eq!((*n_paths, *n_g1, *delta_ratio), (50, 20, 1e-4));
        assert_eq!(cfg.walk.seed, 7);
        let (_, cfg) = load(BASE, &["biewos_point.n_g1=4".into()]).unwrap();
        assert!(matches!(cfg.method[0], MethodSpec::BiewosPoint { n_g1: 4, .. }));
        assert!(cfg.sweep.is_empty());
    }

    #[test]
    fn errors_name_the_field() {
        let e = load(&BASE.replace("a = 0.5", "a = -1.0"), &[]).unwrap_err().to_string();
        assert!(e.contains("method[0].a"), "{e}");
        let e = load(&BASE.replace("a = 0.5", "a = 0.5\nbogus = 1"), &[]).unwrap_err().to_string();
        assert!(e.contains("bogus"), "{e}");
        let e = load(BASE, &["walk.eps_shell=0".into()]).unwrap_err().to_string();
        assert!(e.starts_with("walk"), "{e}");
        assert!(matches!(load(BASE, &["novalue".into()]), Err(ConfigError::BadOverride(_))));
    }

    #[test]
    fn parse_errors_carry_a_line() {
        let e = load("[scene]\nshape = \n", &[]).unwrap_err().to_string();
        assert!(e.contains("line 2") || e.contains("2:"), "{e}");
    }

    #[test]
    fn plates_need_a_layout() {
        let text = r#"
[scene]
shape = "plates"
data = { kind = "constant", value = 1.0 }
[[method]]
name = "reference_bem"
x = [0.5, 0.5, 0]
n_panels = 4
"#;
        assert!(load(text, &[]).unwrap_err().to_string().contains("layout"));
        assert!(load(text, &["scene.layout=four".into()]).is_ok());
    }

    #[test]
    fn override_values_keep_their_type() {
        assert_eq!(parse_value("3"), Value::Integer(3));
        assert_eq!(parse_value("[1, 2]"), Value::Array(vec![Value::Integer(1), Value::Integer(2)]));
        assert_eq!(parse_value("four"), Value::String("four".into()));
    }
}
