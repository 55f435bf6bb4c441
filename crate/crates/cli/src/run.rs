//! Turns an [`ExperimentConfig`] into a table of rows.
//!
//! Cells (one per strike/drift/scale/m) are priced on the rayon pool and
//! collected in grid order, so the output never depends on scheduling.

use std::time::Instant;

use asian_hermite::bench::{accuracy_gamma, gaussian_call, ou_asian_law};
use asian_hermite::correlator::CorrelatorEngine;
use asian_hermite::hermite::{payoff_coefficients, payoff_l2_error_default, payoff_series_eval, GhpBasis};
use asian_hermite::monte_carlo::{mc_price_strikes, McEstimate};
use asian_hermite::pricer::{asian_price_with, resolve_basis, uniform_grid, DriftPolicy, PriceRequest, ScalePolicy};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DriftEntry, DriftName, ExperimentConfig, Kind, ScaleMode};
use crate::{fmt_f64, CliError};

pub const PRICE_COLUMNS: [&str; 15] = [
    "experiment",
    "model",
    "K",
    "a",
    "b",
    "N",
    "m",
    "price",
    "gamma",
    "gamma_tilde",
    "mc_mean",
    "mc_lo",
    "mc_hi",
    "stopped",
    "wall_ms",
];
pub const PAYOFF_COLUMNS: [&str; 8] = ["experiment", "K", "a", "b", "N", "x", "payoff", "approx"];
pub const L2_COLUMNS: [&str; 7] = ["experiment", "K", "a", "b", "N", "l2_error", "h"];

/// Stop marker on the row of the truncation picked by the γ̃ rule.
pub const MARK_STOP: &str = "stop";
/// Marker on the last row when the rule never fired.
pub const MARK_MAX: &str = "max";

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub timing: bool,
}

/// Per-cell summary written to the JSON sidecar.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CellSummary {
    pub m: usize,
    pub strike: f64,
    pub a: f64,
    pub b: f64,
    pub chosen_n: usize,
    pub converged: bool,
    pub price: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_ci95: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inside_ci: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub cells: Vec<CellSummary>,
}

pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Table, CliError> {
    cfg.validate()?;
    match cfg.kind {
        Kind::Price => price_table(cfg, opts),
        Kind::Payoff => payoff_table(cfg),
        Kind::L2Error => l2_table(cfg),
    }
}

fn fixed_drifts(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.grid
        .a
        .iter()
        .map(|a| match a {
            DriftEntry::Value(v) => *v,
            DriftEntry::Named(_) => unreachable!("rejected by validation"),
        })
        .collect()
}

fn payoff_table(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let p = cfg.payoff.as_ref().expect("validated");
    let orders = cfg.grid.orders.as_ref().expect("validated");
    let step = (p.x_max - p.x_min) / (p.points - 1) as f64;
    let xs: Vec<f64> = (0..p.points).map(|i| p.x_min + i as f64 * step).collect();
    let mut rows = Vec::new();
    for &k in &cfg.grid.strikes {
        for a in fixed_drifts(cfg) {
            for &b in &cfg.grid.b {
                for &n in orders {
                    let exp = payoff_coefficients(k, &GhpBasis::new(a, b, n)?)?;
                    for &x in &xs {
                        rows.push(vec![
                            cfg.id.clone(),
                            fmt_f64(k),
                            fmt_f64(a),
                            fmt_f64(b),
                            n.to_string(),
                            fmt_f64(x),
                            fmt_f64((x - k).max(0.0)),
                            fmt_f64(payoff_series_eval(&exp, x)),
                        ]);
                    }
                }
            }
        }
    }
    Ok(Table {
        columns: PAYOFF_COLUMNS.to_vec(),
        rows,
        cells: Vec::new(),
    })
}

fn l2_table(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let mut rows = Vec::new();
    for &k in &cfg.grid.strikes {
        for a in fixed_drifts(cfg) {
            for &b in &cfg.grid.b {
                let h = b * (-(k - a).powi(2) / (2.0 * b * b)).exp() * asian_hermite::bench::INV_SQRT_2PI;
                for n in 0..=cfg.n_max() {
                    let exp = payoff_coefficients(k, &GhpBasis::new(a, b, n)?)?;
                    rows.push(vec![
                        cfg.id.clone(),
                        fmt_f64(k),
                        fmt_f64(a),
                        fmt_f64(b),
                        n.to_string(),
                        fmt_f64(payoff_l2_error_default(&exp)?),
                        fmt_f64(h),
                    ]);
                }
            }
        }
    }
    Ok(Table {
        columns: L2_COLUMNS.to_vec(),
        rows,
        cells: Vec::new(),
    })
}

struct Cell {
    rows: Vec<Vec<String>>,
    summary: CellSummary,
}

fn price_table(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Table, CliError> {
    let model = cfg.model.as_ref().expect("validated");
    let spec = model.spec()?;
    let label = model.label()?;
    let n_max = cfg.n_max();
    let discount = (-model.rate * (model.maturity - model.t)).exp();
    let mut rows = Vec::new();
    let mut cells = Vec::new();

    for &m in &cfg.grid.m {
        let times = uniform_grid(model.t, model.maturity, m);
        let engine = CorrelatorEngine::new(&spec, model.t, model.y0, &times)?;
        engine.reserve(n_max)?;
        let law = if spec.jumps().is_none() {
            Some(ou_asian_law(&spec, model.t, model.y0, &times)?)
        } else {
            None
        };
        let mc: Option<Vec<McEstimate>> = if cfg.mc.enabled {
            Some(mc_price_strikes(
                &spec,
                model.t,
                model.y0,
                &times,
                model.rate,
                &cfg.grid.strikes,
                &cfg.mc_config(&spec),
            )?)
        } else {
            None
        };

        let mut bases = Vec::new();
        for a in &cfg.grid.a {
            let drift = match a {
                DriftEntry::Value(v) => DriftPolicy::Fixed(*v),
                DriftEntry::Named(DriftName::Mean) => DriftPolicy::Mean,
            };
            for &b in &cfg.grid.b {
                let scale = match cfg.grid.b_mode {
                    ScaleMode::Value => ScalePolicy::Fixed(b),
                    ScaleMode::Ratio => ScalePolicy::FloorRatio(b),
                };
                bases.push(resolve_basis(&engine, drift, scale, n_max)?);
            }
        }

        let jobs: Vec<(usize, GhpBasis)> = (0..cfg.grid.strikes.len())
            .flat_map(|ki| bases.iter().map(move |&basis| (ki, basis)))
            .collect();
        let results: Vec<Result<Cell, CliError>> = jobs
            .par_iter()
            .map(|&(ki, basis)| {
                let k = cfg.grid.strikes[ki];
                let started = Instant::now();
                let req = PriceRequest::new(spec.clone(), model.t, model.y0, times.clone(), k, model.rate, basis)?;
                let report = asian_price_with(&engine, &req)?.restop(cfg.grid.threshold);
                let wall_ms = started.elapsed().as_secs_f64() * 1e3;
                let exact = law.map(|l| discount * gaussian_call(&l, k));
                let est = mc.as_ref().map(|v| v[ki]);
                let chosen = report.chosen_n();
                let marker = if report.converged() { MARK_STOP } else { MARK_MAX };
                let mut cell_rows = Vec::with_capacity(n_max + 1);
                for (n, (&price, &gt)) in report.price_by_n().iter().zip(report.gamma_tilde()).enumerate() {
                    let gamma = exact.and_then(|e| accuracy_gamma(e, price).ok());
                    cell_rows.push(vec![
                        cfg.id.clone(),
                        label.clone(),
                        fmt_f64(k),
                        fmt_f64(basis.drift()),
                        fmt_f64(basis.scale()),
                        n.to_string(),
                        m.to_string(),
                        fmt_f64(price),
                        gamma.map(fmt_f64).unwrap_or_default(),
                        if n == 0 { String::new() } else { fmt_f64(gt) },
                        est.map(|e| fmt_f64(e.mean)).unwrap_or_default(),
                        est.map(|e| fmt_f64(e.ci95.0)).unwrap_or_default(),
                        est.map(|e| fmt_f64(e.ci95.1)).unwrap_or_default(),
                        if n == chosen { marker.to_string() } else { String::new() },
                        if opts.timing {
                            format!("{wall_ms:.3}")
                        } else {
                            String::new()
                        },
                    ]);
                }
                let price = report.stopped_price();
                Ok(Cell {
                    rows: cell_rows,
                    summary: CellSummary {
                        m,
                        strike: k,
                        a: basis.drift(),
                        b: basis.scale(),
                        chosen_n: chosen,
                        converged: report.converged(),
                        price,
                        exact,
                        mc_mean: est.map(|e| e.mean),
                        mc_ci95: est.map(|e| e.ci95),
                        inside_ci: est.map(|e| e.contains(price)),
                    },
                })
            })
            .collect();
        for cell in results {
            let cell = cell?;
            rows.extend(cell.rows);
            cells.push(cell.summary);
        }
    }
    Ok(Table {
        columns: PRICE_COLUMNS.to_vec(),
        rows,
        cells,
    })
}
