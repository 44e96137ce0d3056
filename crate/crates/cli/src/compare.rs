//! Row-by-row comparison of a run CSV against a reference CSV.

use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum CompareError {
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("bad tolerance {0:?}: expected a number or col=tol[,col=tol...]")]
    Tolerance(String),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tolerance {
    /// Relative tolerance on every column of the reference.
    All(f64),
    PerColumn(BTreeMap<String, f64>),
}

impl std::str::FromStr for Tolerance {
    type Err = CompareError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CompareError::Tolerance(s.to_string());
        let ok = |v: f64| if v >= 0.0 { Ok(v) } else { Err(bad()) };
        if let Ok(v) = s.trim().parse::<f64>() {
            return Ok(Tolerance::All(ok(v)?));
        }
        let mut m = BTreeMap::new();
        for part in s.split(',') {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            m.insert(k.trim().to_string(), ok(v.trim().parse().map_err(|_| bad())?)?);
        }
        Ok(Tolerance::PerColumn(m))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checked: usize,
    pub failures: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

struct Parsed {
    schema: Option<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn parse(text: &str) -> Result<Parsed, CompareError> {
    let schema = text.lines().find_map(|l| l.strip_prefix("# schema:").map(|s| s.trim().to_string()));
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.map(|r| r.iter().map(String::from).collect())).collect::<Result<_, _>>()?;
    Ok(Parsed { schema, header, rows })
}

fn close(a: &str, b: &str, tol: f64) -> bool {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) if y == 0.0 => x.abs() <= tol,
        (Ok(x), Ok(y)) => (x - y).abs() <= tol * y.abs() || x == y,
        _ => a == b,
    }
}

/// Check `run` against `reference`. The reference's columns (or those named
/// in the tolerance) must exist in both files, with equal row counts and
/// schema lines.
pub fn compare(run: &str, reference: &str, tol: &Tolerance) -> Result<Report, CompareError> {
    let (a, b) = (parse(run)?, parse(reference)?);
    if let (Some(sa), Some(sb)) = (&a.schema, &b.schema) {
        if sa != sb {
            return Err(CompareError::Schema(format!("{sa:?} vs {sb:?}")));
        }
    }
    if a.rows.len() != b.rows.len() {
        return Err(CompareError::Schema(format!("{} rows vs {}", a.rows.len(), b.rows.len())));
    }
    let cols: Vec<(String, f64)> = match tol {
        Tolerance::All(t) => b.header.iter().map(|c| (c.clone(), *t)).collect(),
        Tolerance::PerColumn(m) => m.iter().map(|(c, t)| (c.clone(), *t)).collect(),
    };
    let find = |h: &[String], c: &str, which: &str| {
        h.iter().position(|x| x == c).ok_or_else(|| CompareError::Schema(format!("column {c:?} missing from {which}")))
    };
    let idx = cols
        .iter()
        .map(|(c, t)| Ok((c.as_str(), find(&a.header, c, "run")?, find(&b.header, c, "reference")?, *t)))
        .collect::<Result<Vec<_>, CompareError>>()?;
    let mut report = Report { checked: 0, failures: Vec::new() };
    for (i, (ra, rb)) in a.rows.iter().zip(&b.rows).enumerate() {
        for &(c, ka, kb, t) in &idx {
            let (x, y) = (ra.get(ka).map_or("", String::as_str), rb.get(kb).map_or("", String::as_str));
            report.checked += 1;
            if !close(x, y, t) {
                report.failures.push(format!("row {i} column {c}: {x} vs reference {y} (tol {t})"));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RUN: &str = "# biewos 0.1.0\n# schema: biewos/v1 x\na,total\n0.1,0.7176\n0.2,0.7154\n";

    #[test]
    fn identical_files_pass_at_zero_tolerance() {
        let r = compare(RUN, RUN, &Tolerance::All(0.0)).unwrap();
        assert!(r.passed());
        assert_eq!(r.checked, 4);
    }

    #[test]
    fn perturbed_value_fails_with_row() {
        let other = RUN.replace("0.7154", "0.7300");
        let r = compare(&other, RUN, &"total=0.015".parse().unwrap()).unwrap();
        assert_eq!(r.failures.len(), 1);
        assert!(r.failures[0].starts_with("row 1 column total"));
        assert!(compare(&other, RUN, &"total=0.03".parse().unwrap()).unwrap().passed());
    }

    #[test]
    fn schema_mismatches() {
        let fewer = "a,total\n0.1,0.7\n";
        assert!(matches!(compare(RUN, fewer, &Tolerance::All(0.1)), Err(CompareError::Schema(_))));
        let missing = "a,sigma\n0.1,0.7\n0.2,0.7\n";
        assert!(matches!(compare(RUN, missing, &Tolerance::All(0.1)), Err(CompareError::Schema(_))));
        let other_schema = RUN.replace("v1 x", "v2 x");
        assert!(matches!(compare(RUN, &other_schema, &Tolerance::All(0.1)), Err(CompareError::Schema(_))));
    }

    #[test]
    fn tolerance_parsing() {
        assert_eq!("0.5".parse::<Tolerance>().unwrap(), Tolerance::All(0.5));
        assert!("x=".parse::<Tolerance>().is_err());
        assert!("-1".parse::<Tolerance>().is_err());
    }
}
