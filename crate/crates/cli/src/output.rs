//! CSV table plus JSON metadata sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::run::{CellSummary, Table};
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    schema_version: u32,
    engine: &'static str,
    engine_version: &'static str,
    git_describe: &'static str,
    experiment: &'a str,
    seed: u64,
    csv: String,
    columns: &'a [&'static str],
    rows: usize,
    config: &'a ExperimentConfig,
    cells: &'a [CellSummary],
}

pub fn git_describe() -> &'static str {
    env!("ASIAN_HERMITE_GIT_DESCRIBE")
}

pub fn write_csv<W: std::io::Write>(table: &Table, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<dir>/<id>.csv` and `<dir>/<id>.json`; returns both paths.
pub fn write_outputs(cfg: &ExperimentConfig, table: &Table, dir: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", cfg.id));
    let json_path = dir.join(format!("{}.json", cfg.id));
    write_csv(table, fs::File::create(&csv_path)?)?;

    let sidecar = Sidecar {
        schema_version: SCHEMA_VERSION,
        engine: "asian-hermite",
        engine_version: env!("CARGO_PKG_VERSION"),
        git_describe: git_describe(),
        experiment: &cfg.id,
        seed: cfg.mc.seed,
        csv: format!("{}.csv", cfg.id),
        columns: &table.columns,
        rows: table.rows.len(),
        config: cfg,
        cells: &table.cells,
    };
    let mut json = serde_json::to_string_pretty(&sidecar).expect("sidecar is serializable");
    json.push('\n');
    fs::write(&json_path, json)?;
    Ok((csv_path, json_path))
}
