//! On-disk reports: per-run `rounds.csv`, per-strategy `summary.json`, and
//! long-format sweep tables.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::Strategy;
use crate::error::{Error, Result};
use crate::selftrain::{RoundRecord, RunReport, RunSummary};

pub const ROUNDS_HEADER: [&str; 7] = [
    "round",
    "n_selected",
    "pseudo_acc",
    "val_acc",
    "test_acc",
    "objective",
    "wall_time_s",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path.display().to_string(), format!("{other:?}")),
    }
}

/// Writes one row per round in the fixed column order.
pub fn write_rounds_csv(records: &[RoundRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(ROUNDS_HEADER).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.write_record([
            r.round.to_string(),
            r.n_selected.to_string(),
            opt(r.pseudo_acc),
            r.val_acc.to_string(),
            r.test_acc.to_string(),
            opt(r.objective),
            r.wall_time_s.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Mean and sample standard deviation (`n − 1` denominator; zero for a
/// single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Aggregate { mean, std, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub seeds: Vec<u64>,
    pub raw: Option<Aggregate>,
    pub best_round: Option<Aggregate>,
    pub early_stopped: Option<Aggregate>,
    pub runs: Vec<RunSummary>,
    pub failed_seeds: Vec<(u64, String)>,
}

impl StrategySummary {
    pub fn from_runs(strategy: Strategy, results: &[(u64, Result<RunReport>)]) -> Self {
        let runs: Vec<RunSummary> = results.iter().filter_map(|(_, r)| r.as_ref().ok().map(|r| r.summary.clone())).collect();
        let pick = |f: fn(&RunSummary) -> f64| Aggregate::of(&runs.iter().map(f).collect::<Vec<_>>());
        StrategySummary {
            strategy,
            seeds: results.iter().map(|(s, _)| *s).collect(),
            raw: pick(|r| r.raw_test),
            best_round: pick(|r| r.best_round_test),
            early_stopped: pick(|r| r.early_stopped_test),
            failed_seeds: results
                .iter()
                .filter_map(|(s, r)| r.as_ref().err().map(|e| (*s, e.to_string())))
                .collect(),
            runs,
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Writes `seed_<s>/rounds.csv` for every successful run and `summary.json`
/// under `dir`.
pub fn emit_report(strategy: Strategy, results: &[(u64, Result<RunReport>)], dir: impl AsRef<Path>) -> Result<StrategySummary> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (seed, res) in results {
        if let Ok(rep) = res {
            let sub = dir.join(format!("seed_{seed}"));
            fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
            write_rounds_csv(&rep.records, sub.join("rounds.csv"))?;
        }
    }
    let summary = StrategySummary::from_runs(strategy, results);
    write_json(&summary, dir.join("summary.json"))?;
    Ok(summary)
}
