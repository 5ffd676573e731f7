//! Personalized-PageRank propagation of teacher logits.
//!
//! The student's logits after pseudo-labeling a set `S` are estimated as
//! `α (I − (1−α) Ã)⁻¹ X̂`, where `X̂` holds teacher logits on anchored nodes
//! and on `S`, and zeros elsewhere. The operator is linear, so a
//! [`PropagationState`] propagates the anchored rows once and every
//! candidate's row separately; any subset is then a sum.

use std::collections::HashMap;

use log::debug;
use ndarray::{s, Array2, ArrayView1, ArrayViewMut1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NormalizationMode, NormalizedAdjacency};

const ROW_STOCHASTIC_TOL: f64 = 1e-9;
/// Below this many matrix entries the sequential product is faster.
const PARALLEL_MIN_ENTRIES: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PprConfig {
    pub alpha: f64,
    pub steps: usize,
    pub tol: f64,
    /// Keep iterating past `steps` until the update falls below `tol` or
    /// `max_steps` is reached.
    pub exact: bool,
    pub max_steps: usize,
}

impl Default for PprConfig {
    fn default() -> Self {
        PprConfig {
            alpha: 0.1,
            steps: 10,
            tol: 1e-9,
            exact: false,
            max_steps: 100,
        }
    }
}

impl PprConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        if self.steps == 0 {
            return Err(Error::invalid("ppr_steps must be at least 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid(format!("ppr_tol must be non-negative, got {}", self.tol)));
        }
        Ok(())
    }

    fn step_limit(&self) -> usize {
        if self.exact {
            self.max_steps.max(self.steps)
        } else {
            self.steps
        }
    }
}

/// Power iteration `X⁽ʰ⁾ = (1−α) Ã X⁽ʰ⁻¹⁾ + α X⁽⁰⁾`, stopping after the
/// configured number of steps or once the max-abs update drops below `tol`.
pub fn ppr_propagate(adj: &NormalizedAdjacency, x0: &Array2<f64>, cfg: &PprConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    if adj.mode() != NormalizationMode::Row {
        return Err(Error::invalid("propagation expects a row-normalized adjacency"));
    }
    adj.check_row_stochastic(ROW_STOCHASTIC_TOL)?;
    if x0.nrows() != adj.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "{} logit rows for {} nodes",
            x0.nrows(),
            adj.n_nodes()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in propagated matrix"));
    }
    Ok(power_iterate(adj, x0, cfg))
}

fn power_iterate(adj: &NormalizedAdjacency, x0: &Array2<f64>, cfg: &PprConfig) -> Array2<f64> {
    let x0 = x0.as_standard_layout().into_owned();
    let parallel = x0.len() >= PARALLEL_MIN_ENTRIES;
    let damp = 1.0 - cfg.alpha;
    let mut cur = x0.clone();
    let mut next = Array2::zeros(x0.raw_dim());
    let limit = cfg.step_limit();
    for step in 1..=limit {
        adj.matmul_into(&cur, &mut next, parallel);
        let mut delta = 0.0f64;
        ndarray::Zip::from(&mut next).and(&x0).and(&cur).for_each(|n, &x, &c| {
            *n = damp * *n + cfg.alpha * x;
            delta = delta.max((*n - c).abs());
        });
        std::mem::swap(&mut cur, &mut next);
        if delta < cfg.tol {
            debug!("power iteration converged after {step} steps (update {delta:.3e})");
            break;
        }
    }
    cur
}

/// `X̂` with teacher logits on `rows` and zeros elsewhere.
pub fn masked_logits(logits: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut x = Array2::zeros(logits.raw_dim());
    for &r in rows {
        x.row_mut(r).assign(&logits.row(r));
    }
    x
}

#[derive(Debug, Clone)]
enum Deltas {
    /// `n × (K·C)`: columns `i·C..(i+1)·C` hold candidate `i`'s propagation.
    Batched(Array2<f64>),
    /// Candidate contributions are propagated per query.
    OnDemand,
}

/// Propagated base logits for the anchored set plus one propagated delta per
/// candidate. Immutable once built; all queries are pure.
#[derive(Debug, Clone)]
pub struct PropagationState<'a> {
    adj: &'a NormalizedAdjacency,
    cfg: PprConfig,
    base: Array2<f64>,
    anchored: Vec<usize>,
    candidates: Vec<usize>,
    index: HashMap<usize, usize>,
    candidate_rows: Array2<f64>,
    deltas: Deltas,
}

/// Builds the state. Deltas are materialized when `K·n·C` doubles fit in
/// `memory_cap_bytes`; otherwise they are recomputed on demand.
pub fn build_state<'a>(
    adj: &'a NormalizedAdjacency,
    teacher_logits: &Array2<f64>,
    anchored: &[usize],
    candidates: &[usize],
    cfg: &PprConfig,
    memory_cap_bytes: usize,
) -> Result<PropagationState<'a>> {
    let n = adj.n_nodes();
    let c = teacher_logits.ncols();
    let mut index = HashMap::with_capacity(candidates.len());
    for (i, &v) in candidates.iter().enumerate() {
        if v >= n {
            return Err(Error::UnknownCandidate(v));
        }
        if index.insert(v, i).is_some() {
            return Err(Error::invalid(format!("candidate {v} listed twice")));
        }
    }
    let mut is_anchor = vec![false; n];
    for &a in anchored {
        if a >= n {
            return Err(Error::invalid(format!("anchored node {a} out of range")));
        }
        if index.contains_key(&a) {
            return Err(Error::AnchorCandidateOverlap(a));
        }
        is_anchor[a] = true;
    }
    let anchored: Vec<usize> = (0..n).filter(|&u| is_anchor[u]).collect();
    let base = ppr_propagate(adj, &masked_logits(teacher_logits, &anchored), cfg)?;

    let k = candidates.len();
    let mut candidate_rows = Array2::zeros((k, c));
    for (i, &v) in candidates.iter().enumerate() {
        candidate_rows.row_mut(i).assign(&teacher_logits.row(v));
    }
    let bytes = n.saturating_mul(k).saturating_mul(c).saturating_mul(8);
    let deltas = if k == 0 || bytes > memory_cap_bytes {
        if k > 0 {
            debug!("candidate deltas need {bytes} bytes, over the cap; computing on demand");
        }
        Deltas::OnDemand
    } else {
        let mut x0 = Array2::zeros((n, k * c));
        for (i, &v) in candidates.iter().enumerate() {
            x0.slice_mut(s![v, i * c..(i + 1) * c]).assign(&teacher_logits.row(v));
        }
        Deltas::Batched(power_iterate(adj, &x0, cfg))
    };
    Ok(PropagationState {
        adj,
        cfg: *cfg,
        base,
        anchored,
        candidates: candidates.to_vec(),
        index,
        candidate_rows,
        deltas,
    })
}

impl PropagationState<'_> {
    pub fn base(&self) -> &Array2<f64> {
        &self.base
    }

    pub fn anchored(&self) -> &[usize] {
        &self.anchored
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn n_classes(&self) -> usize {
        self.base.ncols()
    }

    pub fn is_batched(&self) -> bool {
        matches!(self.deltas, Deltas::Batched(_))
    }

    /// Positions of `subset` within the candidate list.
    pub fn positions(&self, subset: &[usize]) -> Result<Vec<usize>> {
        subset
            .iter()
            .map(|v| self.index.get(v).copied().ok_or(Error::UnknownCandidate(*v)))
            .collect()
    }

    /// Propagated delta of a single candidate (by node id).
    pub fn delta(&self, node: usize) -> Result<Array2<f64>> {
        let i = self.positions(&[node])?[0];
        Ok(match &self.deltas {
            Deltas::Batched(d) => {
                let c = self.n_classes();
                d.slice(s![.., i * c..(i + 1) * c]).to_owned()
            }
            Deltas::OnDemand => self.propagate_positions(&[i]),
        })
    }

    fn propagate_positions(&self, positions: &[usize]) -> Array2<f64> {
        let mut x0 = Array2::zeros(self.base.raw_dim());
        for &i in positions {
            x0.row_mut(self.candidates[i]).assign(&self.candidate_rows.row(i));
        }
        power_iterate(self.adj, &x0, &self.cfg)
    }

    /// `Ĥ(S) = base + Σ_{i∈S} delta_i` over all nodes.
    pub fn compose(&self, subset: &[usize]) -> Result<Array2<f64>> {
        let pos = self.positions(subset)?;
        let mut out = self.base.clone();
        match &self.deltas {
            Deltas::Batched(d) => {
                let c = self.n_classes();
                for &i in &pos {
                    out += &d.slice(s![.., i * c..(i + 1) * c]);
                }
            }
            Deltas::OnDemand if !pos.is_empty() => out += &self.propagate_positions(&pos),
            Deltas::OnDemand => {}
        }
        Ok(out)
    }

    /// Rows `nodes` of `Ĥ(S)`, given candidate positions. This is the hot
    /// path for utility evaluation.
    pub fn compose_rows(&self, positions: &[usize], nodes: &[usize]) -> Array2<f64> {
        let c = self.n_classes();
        let mut out = Array2::zeros((nodes.len(), c));
        match &self.deltas {
            Deltas::Batched(d) => {
                for (mut row, &u) in out.rows_mut().into_iter().zip(nodes) {
                    row.assign(&self.base.row(u));
                    let du = d.row(u);
                    for &i in positions {
                        add_assign(&mut row, du.slice(s![i * c..(i + 1) * c]));
                    }
                }
            }
            Deltas::OnDemand => {
                let extra = (!positions.is_empty()).then(|| self.propagate_positions(positions));
                for (mut row, &u) in out.rows_mut().into_iter().zip(nodes) {
                    row.assign(&self.base.row(u));
                    if let Some(e) = &extra {
                        add_assign(&mut row, e.row(u));
                    }
                }
            }
        }
        out
    }
}

fn add_assign(dst: &mut ArrayViewMut1<'_, f64>, src: ArrayView1<'_, f64>) {
    dst.zip_mut_with(&src, |a, &b| *a += b);
}

/// Compares the normalized Jacobian influence of a linear `L`-layer GCN
/// surrogate `H = Ã^L X W`, measured by central finite differences, against
/// the `L`-step random-walk distribution (rows of `Ã^L`). Returns the largest
/// total-variation distance over target nodes.
pub fn influence_vs_random_walk_check(adj: &NormalizedAdjacency, layers: usize) -> f64 {
    const D: usize = 3;
    const C: usize = 2;
    const EPS: f64 = 1e-5;
    let n = adj.n_nodes();
    let mut rng = crate::rng::rng(0x1f1e);
    let w = Array2::from_shape_simple_fn((D, C), || rng.random_range(-1.0..1.0));
    let x = Array2::from_shape_simple_fn((n, D), || rng.random_range(-1.0..1.0));
    let surrogate = |x: &Array2<f64>| {
        let mut h = x.dot(&w);
        for _ in 0..layers {
            h = adj.matmul(&h);
        }
        h
    };

    // influence[j][i] = Σ |∂h_j / ∂x_i| over all feature/output pairs.
    let mut influence = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for d in 0..D {
            let mut plus = x.clone();
            plus[[i, d]] += EPS;
            let mut minus = x.clone();
            minus[[i, d]] -= EPS;
            let diff = (surrogate(&plus) - surrogate(&minus)) / (2.0 * EPS);
            for j in 0..n {
                influence[[j, i]] += diff.row(j).iter().map(|v| v.abs()).sum::<f64>();
            }
        }
    }

    let dense = adj.to_dense();
    let mut walk = Array2::<f64>::eye(n);
    for _ in 0..layers {
        walk = walk.dot(&dense);
    }

    (0..n)
        .map(|j| {
            let total: f64 = influence.row(j).sum();
            0.5 * (0..n).map(|i| (influence[[j, i]] / total - walk[[j, i]]).abs()).sum::<f64>()
        })
        .fold(0.0, f64::max)
}
