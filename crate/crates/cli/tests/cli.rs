use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn biewos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biewos")).args(args).output().expect("spawn biewos")
}

fn config(name: &str) -> String {
    format!("{}/configs/{name}.toml", env!("CARGO_MANIFEST_DIR"))
}

fn solve_small(dir: &Path, name: &str, workers: &str) -> PathBuf {
    let out = dir.join(name);
    let o = biewos(&[
        "--workers",
        workers,
        "solve",
        &config("table1"),
        "--set",
        "lp.n_paths=2000",
        "--set",
        "bie.n_g1=4",
        "--set",
        "bie.n_paths=50",
        "--set",
        "sweep.a=[0.5]",
        "--csv",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn solve_is_reproducible_and_compares_clean() {
    let dir = tempfile::tempdir().unwrap();
    let a = solve_small(dir.path(), "a.csv", "1");
    let b = solve_small(dir.path(), "b.csv", "3");
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("# biewos "));
    let o = biewos(&["compare", a.to_str().unwrap(), b.to_str().unwrap(), "0"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn compare_reports_drift_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let a = solve_small(dir.path(), "a.csv", "1");
    let b = solve_small(dir.path(), "b.csv", "1");
    let text = std::fs::read_to_string(&b).unwrap();
    // bump the seed so the walk columns drift
    let o = biewos(&["solve", &config("table1"), "--seed", "9", "--set", "lp.n_paths=2000", "--set", "bie.n_g1=4", "--set", "bie.n_paths=50", "--set", "sweep.a=[0.5]"]);
    assert!(o.status.success());
    let other = String::from_utf8(o.stdout).unwrap();
    assert_ne!(other, text);
    std::fs::write(&b, other).unwrap();
    let o = biewos(&["compare", a.to_str().unwrap(), b.to_str().unwrap(), "bie.sigma1=1e-9"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_errors_exit_2() {
    let o = biewos(&["solve", &config("table1"), "--set", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[scene]\nshape = \"cube\"\n").unwrap();
    let o = biewos(&["solve", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cube"));
}

#[test]
fn compare_rejects_schema_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let a = solve_small(dir.path(), "a.csv", "1");
    let o = biewos(&["solve", &config("table2"), "--set", "sweep.delta_ratio=[1e-3]", "--set", "sweep.n_g2=[4]"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let b = dir.path().join("b.csv");
    std::fs::write(&b, o.stdout).unwrap();
    let o = biewos(&["compare", a.to_str().unwrap(), b.to_str().unwrap(), "0.01"]);
    assert_eq!(o.status.code(), Some(2));
}
