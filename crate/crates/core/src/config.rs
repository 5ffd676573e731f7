//! Run configuration: a flat JSON object whose keys mirror the fields below,
//! with the GCN recipe nested under `"train"`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::banzhaf::{BanzhafMode, SamplingMode};
use crate::calibration::CalibrationKind;
use crate::error::{Error, Result};
use crate::gcn::TrainConfig;
use crate::propagation::PprConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Calibrate, pool the top-K confident nodes, rank by Banzhaf value.
    #[default]
    Bangs,
    /// As `Bangs` without calibration.
    BangsUncal,
    /// Rank the pool by each node's individual utility gain.
    BangsNoBanzhaf,
    ConfCal,
    ConfUncal,
    Random,
    /// Teacher only, no self-training rounds.
    Raw,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Bangs,
        Strategy::BangsUncal,
        Strategy::BangsNoBanzhaf,
        Strategy::ConfCal,
        Strategy::ConfUncal,
        Strategy::Random,
        Strategy::Raw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Bangs => "bangs",
            Strategy::BangsUncal => "bangs_uncal",
            Strategy::BangsNoBanzhaf => "bangs_no_banzhaf",
            Strategy::ConfCal => "conf_cal",
            Strategy::ConfUncal => "conf_uncal",
            Strategy::Random => "random",
            Strategy::Raw => "raw",
        }
    }

    /// Whether the strategy calibrates teacher confidence before selection.
    pub fn calibrates(self) -> bool {
        matches!(self, Strategy::Bangs | Strategy::BangsNoBanzhaf | Strategy::ConfCal)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// GraphPack directory.
    pub data: Option<PathBuf>,
    pub strategy: Strategy,
    pub rounds: usize,
    pub select_k: usize,
    #[serde(rename = "pool_size_K")]
    pub pool_size: usize,
    pub banzhaf_samples: usize,
    pub banzhaf_mode: BanzhafMode,
    pub sampling: SamplingMode,
    pub cache_utilities: bool,
    pub calibration: CalibrationKind,
    pub alpha: f64,
    pub ppr_steps: usize,
    pub ppr_tol: f64,
    pub exact_ppr: bool,
    pub ppr_max_steps: usize,
    pub delta_memory_cap_mb: usize,
    pub exclude_selected_from_objective: bool,
    pub train: TrainConfig,
    /// Row-normalize node features before training.
    pub feature_norm: bool,
    pub seeds: Vec<u64>,
    pub noise_sigma: f64,
    /// Flip validation labels too when `noise_sigma > 0`.
    pub noise_on_validation: bool,
    pub train_fraction_beta: f64,
    /// Stop a run once validation accuracy has not improved for
    /// `round_patience` rounds.
    pub early_stop: bool,
    pub round_patience: usize,
    /// Write measured wall time to `rounds.csv`; zeros when off, which makes
    /// the file byte-reproducible.
    pub record_timing: bool,
    /// Parallel Banzhaf sampling and parallel seeds. Results are identical
    /// either way.
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ppr = PprConfig::default();
        RunConfig {
            data: None,
            strategy: Strategy::Bangs,
            rounds: 40,
            select_k: 100,
            pool_size: 200,
            banzhaf_samples: 500,
            banzhaf_mode: BanzhafMode::Msr,
            sampling: SamplingMode::SizeUniform,
            cache_utilities: false,
            calibration: CalibrationKind::Ets,
            alpha: ppr.alpha,
            ppr_steps: ppr.steps,
            ppr_tol: ppr.tol,
            exact_ppr: ppr.exact,
            ppr_max_steps: ppr.max_steps,
            delta_memory_cap_mb: 512,
            exclude_selected_from_objective: false,
            train: TrainConfig::default(),
            feature_norm: true,
            seeds: (0..10).collect(),
            noise_sigma: 0.0,
            noise_on_validation: true,
            train_fraction_beta: 1.0,
            early_stop: false,
            round_patience: 5,
            record_timing: true,
            parallel: true,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn ppr(&self) -> PprConfig {
        PprConfig {
            alpha: self.alpha,
            steps: self.ppr_steps,
            tol: self.ppr_tol,
            exact: self.exact_ppr,
            max_steps: self.ppr_max_steps,
        }
    }

    /// Calibration actually applied under the configured strategy.
    pub fn effective_calibration(&self) -> CalibrationKind {
        if self.strategy.calibrates() {
            self.calibration
        } else {
            CalibrationKind::None
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.strategy != Strategy::Raw && self.select_k == 0 {
            return bad("select_k must be positive".into());
        }
        if self.select_k > self.pool_size {
            return bad(format!(
                "select_k = {} exceeds pool_size_K = {}",
                self.select_k, self.pool_size
            ));
        }
        if self.banzhaf_samples == 0 {
            return bad("banzhaf_samples must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.noise_sigma) {
            return bad(format!("noise_sigma must be in [0, 1], got {}", self.noise_sigma));
        }
        if !(self.train_fraction_beta > 0.0 && self.train_fraction_beta <= 1.0) {
            return bad(format!(
                "train_fraction_beta must be in (0, 1], got {}",
                self.train_fraction_beta
            ));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        self.ppr().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.train.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// Parses `"1,2,5"` or a range `"0..10"`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| Error::Config(format!("bad seed range `{text}`")))?;
        let b: u64 = b.trim().parse().map_err(|_| Error::Config(format!("bad seed range `{text}`")))?;
        return Ok((a..b).collect());
    }
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("bad seed `{s}`"))))
        .collect()
}
