//! Confidence calibration: temperature scaling, ensemble temperature scaling
//! (a simplex mixture of the tempered, raw, and uniform distributions), and
//! expected calibration error.

use log::warn;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::softmax_rows;

const LOG_T_MIN: f64 = -2.995_732_273_553_991; // ln 0.05
const LOG_T_MAX: f64 = 2.995_732_273_553_991; // ln 20
const GOLDEN_TOL: f64 = 1e-4;
const ETS_GRID_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationKind {
    None,
    Ts,
    #[default]
    Ets,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureScaler {
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtsCalibrator {
    pub temperature: f64,
    /// Weights of (tempered softmax, raw softmax, uniform).
    pub weights: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Calibrator {
    Identity,
    Temperature(TemperatureScaler),
    Ets(EtsCalibrator),
}

fn scaled(logits: ArrayView2<'_, f64>, t: f64) -> Array2<f64> {
    logits.mapv(|z| z / t)
}

/// Mean negative log-likelihood of `softmax(logits / t)`.
pub fn nll_at_temperature(logits: ArrayView2<'_, f64>, labels: &[usize], t: f64) -> f64 {
    let n = logits.nrows();
    let mut total = 0.0;
    for (row, &y) in logits.rows().into_iter().zip(labels) {
        let max = row.fold(f64::NEG_INFINITY, |m, &z| m.max(z)) / t;
        let lse = max + row.iter().map(|&z| (z / t - max).exp()).sum::<f64>().ln();
        total += lse - row[y] / t;
    }
    total / n as f64
}

/// Mean negative log-likelihood of already-normalized probabilities.
pub fn nll_of_probabilities(probs: ArrayView2<'_, f64>, labels: &[usize]) -> f64 {
    let n = probs.nrows();
    probs
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(row, &y)| -row[y].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / n as f64
}

fn check_inputs(logits: ArrayView2<'_, f64>, labels: &[usize]) -> Result<bool> {
    if logits.nrows() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} logit rows for {} labels",
            logits.nrows(),
            labels.len()
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= logits.ncols()) {
        return Err(Error::LabelOutOfRange {
            node: 0,
            label: y,
            n_classes: logits.ncols(),
        });
    }
    let distinct = labels.iter().any(|&y| y != labels[0]);
    if labels.len() < 2 || !distinct {
        warn!("degenerate calibration set ({} nodes, single class); using T = 1", labels.len());
        return Ok(false);
    }
    Ok(true)
}

/// Fits `T` by golden-section search over `ln T ∈ [ln 0.05, ln 20]`, keeping
/// `T = 1` if the search result does not beat it.
pub fn fit_temperature(logits: ArrayView2<'_, f64>, labels: &[usize]) -> Result<TemperatureScaler> {
    if !check_inputs(logits, labels)? {
        return Ok(TemperatureScaler { temperature: 1.0 });
    }
    let f = |log_t: f64| nll_at_temperature(logits, labels, log_t.exp());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (LOG_T_MIN, LOG_T_MAX);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let t = ((a + b) / 2.0).exp();
    let temperature = if f(t.ln()) <= f(0.0) { t } else { 1.0 };
    Ok(TemperatureScaler { temperature })
}

/// Fits the temperature first, then the mixture weights by exhaustive search
/// over the 2-simplex at step 0.01. The grid contains `(1, 0, 0)`, so the
/// result never has a higher validation NLL than temperature scaling.
pub fn fit_ets(logits: ArrayView2<'_, f64>, labels: &[usize]) -> Result<EtsCalibrator> {
    let ts = fit_temperature(logits, labels)?;
    let t = ts.temperature;
    if !check_inputs(logits, labels)? {
        return Ok(EtsCalibrator {
            temperature: t,
            weights: [1.0, 0.0, 0.0],
        });
    }
    let c = logits.ncols() as f64;
    let tempered = softmax_rows(&scaled(logits, t));
    let raw = softmax_rows(&logits.to_owned());
    let comp: Vec<(f64, f64)> = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| (tempered[[i, y]], raw[[i, y]]))
        .collect();
    let nll = |w: [f64; 3]| -> f64 {
        comp.iter()
            .map(|&(a, b)| -(w[0] * a + w[1] * b + w[2] / c).max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / comp.len() as f64
    };
    let mut best_w = [1.0, 0.0, 0.0];
    let mut best = nll(best_w);
    let steps = ETS_GRID_STEPS;
    for i in (0..=steps).rev() {
        for j in 0..=(steps - i) {
            let w1 = i as f64 / steps as f64;
            let w2 = j as f64 / steps as f64;
            let w = [w1, w2, ((steps - i - j) as f64 / steps as f64).max(0.0)];
            let v = nll(w);
            if v < best {
                best = v;
                best_w = w;
            }
        }
    }
    Ok(EtsCalibrator {
        temperature: t,
        weights: best_w,
    })
}

impl Calibrator {
    pub fn fit(kind: CalibrationKind, logits: ArrayView2<'_, f64>, labels: &[usize]) -> Result<Self> {
        Ok(match kind {
            CalibrationKind::None => Calibrator::Identity,
            CalibrationKind::Ts => Calibrator::Temperature(fit_temperature(logits, labels)?),
            CalibrationKind::Ets => Calibrator::Ets(fit_ets(logits, labels)?),
        })
    }

    /// Calibrated class probabilities.
    pub fn apply(&self, logits: &Array2<f64>) -> Array2<f64> {
        match *self {
            Calibrator::Identity => softmax_rows(logits),
            Calibrator::Temperature(ts) => softmax_rows(&scaled(logits.view(), ts.temperature)),
            Calibrator::Ets(ets) => {
                let c = logits.ncols() as f64;
                let [w1, w2, w3] = ets.weights;
                let mut p = softmax_rows(&scaled(logits.view(), ets.temperature));
                p *= w1;
                p.scaled_add(w2, &softmax_rows(logits));
                p.mapv_inplace(|v| v + w3 / c);
                p
            }
        }
    }

    /// Logits whose softmax equals [`Calibrator::apply`]: `z / T` for
    /// temperature scaling, log-probabilities for the mixture.
    pub fn calibrated_logits(&self, logits: &Array2<f64>) -> Array2<f64> {
        match *self {
            Calibrator::Identity => logits.clone(),
            Calibrator::Temperature(ts) => scaled(logits.view(), ts.temperature),
            Calibrator::Ets(_) => self.apply(logits).mapv(|p| p.max(f64::MIN_POSITIVE).ln()),
        }
    }
}

/// Expected calibration error over `nodes` with `n_bins` equal-width bins on
/// the max-probability confidence.
pub fn ece(probs: &Array2<f64>, labels: &[usize], nodes: &[usize], n_bins: usize) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::Empty("node set for ECE"));
    }
    let n_bins = n_bins.max(1);
    let mut count = vec![0usize; n_bins];
    let mut conf_sum = vec![0.0; n_bins];
    let mut hit_sum = vec![0.0; n_bins];
    for &u in nodes {
        let row = probs.row(u);
        let pred = crate::numeric::argmax(row);
        let conf = row[pred];
        let bin = ((conf * n_bins as f64).ceil() as usize).clamp(1, n_bins) - 1;
        count[bin] += 1;
        conf_sum[bin] += conf;
        hit_sum[bin] += f64::from(u8::from(pred == labels[u]));
    }
    let n = nodes.len() as f64;
    Ok((0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| (hit_sum[b] - conf_sum[b]).abs() / n)
        .sum())
}
