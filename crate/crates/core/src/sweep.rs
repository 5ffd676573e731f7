//! One-axis sweeps over selection size, pool size, label noise, or the
//! labeled fraction.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::{error, info};
use serde::Serialize;

use crate::config::{RunConfig, Strategy};
use crate::error::{Error, Result};
use crate::report::StrategySummary;
use crate::selftrain::{run_seeds, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepAxis {
    /// Nodes selected per round; `0` runs the raw teacher. The pool follows
    /// with `K = 2k` below 100 and `K = k + 100` from 100 on.
    #[serde(rename = "k")]
    SelectK,
    /// Candidate pool size with `k` fixed.
    #[serde(rename = "K")]
    PoolK,
    #[serde(rename = "sigma")]
    Sigma,
    #[serde(rename = "beta")]
    Beta,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::SelectK => "k",
            SweepAxis::PoolK => "K",
            SweepAxis::Sigma => "sigma",
            SweepAxis::Beta => "beta",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(SweepAxis::SelectK),
            "K" => Ok(SweepAxis::PoolK),
            "sigma" => Ok(SweepAxis::Sigma),
            "beta" => Ok(SweepAxis::Beta),
            _ => Err(Error::Config(format!("unknown sweep axis `{s}` (expected k, K, sigma, beta)"))),
        }
    }
}

pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("bad sweep value `{s}`"))))
        .collect()
}

fn as_count(axis: SweepAxis, value: f64) -> Result<usize> {
    if value < 0.0 || value.fract() != 0.0 {
        return Err(Error::Config(format!("{axis} must be a non-negative integer, got {value}")));
    }
    Ok(value as usize)
}

/// The configuration for one sweep cell.
pub fn apply_axis(base: &RunConfig, axis: SweepAxis, value: f64) -> Result<RunConfig> {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::SelectK => {
            let k = as_count(axis, value)?;
            if k == 0 {
                cfg.strategy = Strategy::Raw;
            } else {
                cfg.select_k = k;
                cfg.pool_size = if k < 100 { 2 * k } else { k + 100 };
            }
        }
        SweepAxis::PoolK => cfg.pool_size = as_count(axis, value)?,
        SweepAxis::Sigma => cfg.noise_sigma = value,
        SweepAxis::Beta => cfg.train_fraction_beta = value,
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub value: f64,
    pub summary: StrategySummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub cells: Vec<SweepCell>,
    /// Cells whose configuration was rejected.
    pub errors: Vec<(f64, String)>,
}

/// Runs every configured seed at every value. Failing cells are recorded
/// and the sweep continues.
pub fn sweep(ws: &Workspace, base: &RunConfig, axis: SweepAxis, values: &[f64]) -> SweepResult {
    let mut cells = Vec::new();
    let mut errors = Vec::new();
    for &value in values {
        match apply_axis(base, axis, value) {
            Ok(cfg) => {
                info!("sweep {axis} = {value}: {} over {} seeds", cfg.strategy, cfg.seeds.len());
                let results = run_seeds(ws, &cfg);
                cells.push(SweepCell {
                    value,
                    summary: StrategySummary::from_runs(cfg.strategy, &results),
                });
            }
            Err(e) => {
                error!("sweep {axis} = {value}: {e}");
                errors.push((value, e.to_string()));
            }
        }
    }
    SweepResult { axis, cells, errors }
}

/// Long format: one row per `(value, seed, protocol)`.
pub fn write_sweep_csv(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e: csv::Error| Error::parse(path.display().to_string(), e);
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["axis", "value", "strategy", "seed", "protocol", "test_acc"]).map_err(io)?;
    for cell in &result.cells {
        for run in &cell.summary.runs {
            for (protocol, acc) in [
                ("raw", run.raw_test),
                ("best_round", run.best_round_test),
                ("early_stopped", run.early_stopped_test),
            ] {
                w.write_record([
                    result.axis.to_string(),
                    cell.value.to_string(),
                    run.strategy.to_string(),
                    run.seed.to_string(),
                    protocol.to_string(),
                    acc.to_string(),
                ])
                .map_err(io)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
