use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use biewos_cli::compare::{compare, Tolerance};
use biewos_cli::run::{run_file, RunError};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "biewos", version, about = "Neumann data from Dirichlet data by boundary integrals and walk on spheres")]
struct Cli {
    /// Worker threads (default: all cores). Never changes results.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a configuration file.
    Solve {
        config: PathBuf,
        /// Override walk.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override a config value, e.g. `--set a=0.3` or `--set walk.eps_shell=1e-6`.
        /// Bare keys apply to every [[method]].
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Write the CSV here (default: output.csv from the config, else stdout).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the JSON run record here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Compare two result CSVs row by row.
    Compare {
        run: PathBuf,
        reference: PathBuf,
        /// Relative tolerance: a number, or `col=tol,col=tol`.
        tol: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match cli.cmd {
        Cmd::Solve { config, seed, mut sets, csv, json } => {
            if let Some(s) = seed {
                sets.push(format!("walk.seed={s}"));
            }
            if let Some(p) = &csv {
                sets.push(format!("output.csv={:?}", p.display().to_string()));
            }
            if let Some(p) = &json {
                sets.push(format!("output.json={:?}", p.display().to_string()));
            }
            match solve(&config, &sets) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    let config_error = e.downcast_ref::<RunError>().is_some_and(|r| matches!(r, RunError::Config(_)));
                    ExitCode::from(if config_error { 2 } else { 3 })
                }
            }
        }
        Cmd::Compare { run, reference, tol } => match compare_files(&run, &reference, &tol) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}

fn solve(config: &PathBuf, sets: &[String]) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let rec = run_file(&text, sets).with_context(|| config.display().to_string())?;
    if rec.config.get("output").and_then(|o| o.get("csv")).is_none() {
        print!("{}", rec.to_csv()?);
    }
    eprintln!("{} rows, {} paths, {:.2} s", rec.rows.len(), rec.total_paths, rec.total_seconds);
    Ok(())
}

fn compare_files(run: &PathBuf, reference: &PathBuf, tol: &str) -> anyhow::Result<bool> {
    let tol: Tolerance = tol.parse()?;
    let a = std::fs::read_to_string(run).with_context(|| format!("reading {}", run.display()))?;
    let b = std::fs::read_to_string(reference).with_context(|| format!("reading {}", reference.display()))?;
    let report = compare(&a, &b, &tol)?;
    for f in &report.failures {
        println!("FAIL {f}");
    }
    println!("{} cells checked, {} failed", report.checked, report.failures.len());
    Ok(report.passed())
}
