//! Batch front end: scenario configs in, JSON reports and field CSVs out.

pub mod config;
pub mod expr;
pub mod scenario;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use scenario::Outcome;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NO_SOLUTION: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

fn out_dir(base: &Path, dir: &str) -> PathBuf {
    base.join(dir)
}

fn write_outcome(dir: &Path, grid: &cclab_core::Grid, out: &Outcome) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(&out.report).expect("report serializes");
    text.push('\n');
    fs::write(dir.join("report.json"), text)?;
    for (name, field) in &out.fields {
        let mut buf = Vec::new();
        field
            .write_csv(grid, &mut buf)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        fs::write(dir.join(name), buf)?;
    }
    Ok(())
}

fn report_error(e: &CliError) -> i32 {
    eprintln!("cclab: {e}");
    match e {
        CliError::Numerical(_) => EXIT_NOT_CONVERGED,
        _ => EXIT_CONFIG,
    }
}

fn single(config: &Path, yamabe: bool) -> Result<i32, CliError> {
    let loaded = config::load(config)?;
    let cfg = config::typed(&loaded.raw)?;
    let dir = out_dir(&loaded.base, &cfg.output.dir);
    let sc = scenario::build(cfg, &loaded.base)?;
    let out = if yamabe { sc.yamabe()? } else { sc.run()? };
    write_outcome(&dir, &sc.grid, &out)?;
    println!(
        "{}: {} (report {})",
        config.display(),
        out.row.verdict,
        dir.join("report.json").display()
    );
    Ok(out.exit)
}

/// `cclab run`: exit 0 solved or computed, 2 certified nonexistence,
/// 3 not converged, 1 config error.
pub fn run(config: &Path) -> i32 {
    single(config, false).unwrap_or_else(|e| report_error(&e))
}

/// `cclab yamabe`: spectral comparison on the configured regions.
pub fn yamabe(config: &Path) -> i32 {
    single(config, true).unwrap_or_else(|e| report_error(&e))
}

pub fn parse_values(list: &str) -> Result<Vec<f64>, CliError> {
    let items: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::Config("--values: empty list".into()));
    }
    items
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Config(format!("--values: `{s}` is not a finite number")))
        })
        .collect()
}

/// Worker count from `CCLAB_WORKERS`, else the available parallelism.
pub fn workers() -> Result<usize, CliError> {
    match std::env::var("CCLAB_WORKERS") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&w| w > 0)
            .ok_or_else(|| CliError::Config(format!("CCLAB_WORKERS: `{s}` is not a positive integer"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

fn sweep_inner(config: &Path, param: &str, values: &str) -> Result<i32, CliError> {
    let values = parse_values(values)?;
    let loaded = config::load(config)?;
    let cfg0 = config::typed(&loaded.raw)?;
    let dir = out_dir(&loaded.base, &cfg0.output.dir);

    let mut scenarios = Vec::with_capacity(values.len());
    for &v in &values {
        let mut raw = loaded.raw.clone();
        config::set_scalar(&mut raw, param, v)?;
        let cfg = config::typed(&raw)
            .map_err(|e| CliError::Config(format!("{param} = {v}: {e}")))?;
        scenarios.push(scenario::build(cfg, &loaded.base)?);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers()?)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let outcomes: Vec<Result<Outcome, CliError>> =
        pool.install(|| scenarios.par_iter().map(|s| s.run()).collect());

    let mut index = String::from("value,verdict,residual,decay,lambda_z\n");
    for (k, ((v, sc), out)) in values.iter().zip(&scenarios).zip(outcomes).enumerate() {
        let mut out = out?;
        out.report["sweep"] = serde_json::json!({ "param": param, "value": v, "index": k });
        write_outcome(&dir.join("sweep").join(format!("{k:03}")), &sc.grid, &out)?;
        let r = &out.row;
        writeln!(index, "{v},{},{},{},{}", r.verdict, opt(r.residual), opt(r.decay), opt(r.lambda_z))
            .expect("write to string");
    }
    fs::create_dir_all(&dir)?;
    let path = dir.join("sweep_index.csv");
    fs::write(&path, &index)?;
    print!("{index}");
    eprintln!("index written to {}", path.display());
    Ok(EXIT_OK)
}

/// `cclab sweep`: one report per value and an index CSV in input order.
/// Exit 0 once every entry has a report, whatever the verdicts.
pub fn sweep(config: &Path, param: &str, values: &str) -> i32 {
    sweep_inner(config, param, values).unwrap_or_else(|e| report_error(&e))
}
