//! Candidate ranking by k-bounded Banzhaf value.
//!
//! Utilities are closures over *pool positions*: `u(&[p0, p1, ...])` receives
//! sorted indices into the candidate pool and returns the subset's utility.

mod msr;
mod robustness;

pub use msr::{msr_banzhaf, BanzhafEstimate, MsrConfig, SamplingMode};
pub use robustness::{rank_robustness_probe, ProbeConfig, RobustnessCertificate, UtilityTable};

use std::cmp::Ordering;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LabelState;
use crate::numeric::argmax;

/// Largest pool the exhaustive oracle accepts.
pub const EXHAUSTIVE_MAX_POOL: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BanzhafMode {
    #[default]
    Msr,
    Exhaustive,
}

/// The `K` most confident unlabeled nodes, ordered by confidence
/// (descending) then node id.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    pub nodes: Vec<usize>,
    pub pseudo_labels: Vec<usize>,
    pub teacher_logit_rows: Array2<f64>,
    pub confidences: Vec<f64>,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Picks the top-`k_pool` unlabeled nodes by max probability; ties go to the
/// smaller node id. Pseudo-labels are the argmax of `probs`.
pub fn select_candidates(
    probs: &Array2<f64>,
    teacher_logits: &Array2<f64>,
    state: &LabelState,
    k_pool: usize,
) -> Result<CandidatePool> {
    if state.unlabeled().is_empty() {
        return Err(Error::PoolExhausted);
    }
    let mut ranked: Vec<(usize, usize, f64)> = state
        .unlabeled()
        .iter()
        .map(|&u| {
            let row = probs.row(u);
            let y = argmax(row);
            (u, y, row[y])
        })
        .collect();
    ranked.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    ranked.truncate(k_pool);
    let nodes: Vec<usize> = ranked.iter().map(|r| r.0).collect();
    Ok(CandidatePool {
        teacher_logit_rows: teacher_logits.select(ndarray::Axis(0), &nodes),
        pseudo_labels: ranked.iter().map(|r| r.1).collect(),
        confidences: ranked.iter().map(|r| r.2).collect(),
        nodes,
    })
}

/// Binomial coefficient as a float; exact for the small arguments used here.
pub fn binomial(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

fn positions_of(mask: u32) -> Vec<usize> {
    (0..32).filter(|b| mask >> b & 1 == 1).collect()
}

/// Exact k-bounded Banzhaf values:
/// `φ(i) = n_s⁻¹ Σ_{m=1..k} Σ_{S ⊆ pool∖i, |S|=m−1} [U(S∪i) − U(S)]`
/// with `n_s = Σ_{m=1..k} C(K−1, m−1)`. Each subset is evaluated once.
pub fn exhaustive_banzhaf<U>(pool_size: usize, k: usize, utility: U) -> Result<Vec<f64>>
where
    U: Fn(&[usize]) -> Result<f64>,
{
    if pool_size > EXHAUSTIVE_MAX_POOL {
        return Err(Error::EnumerationGuard(pool_size, EXHAUSTIVE_MAX_POOL));
    }
    if k == 0 || k > pool_size {
        return Err(Error::invalid(format!("bound k = {k} must lie in 1..={pool_size}")));
    }
    let n_masks = 1usize << pool_size;
    let mut table = vec![f64::NAN; n_masks];
    for mask in 0..n_masks as u32 {
        if mask.count_ones() as usize <= k {
            table[mask as usize] = utility(&positions_of(mask))?;
        }
    }
    Ok(banzhaf_from_table(pool_size, k, &table))
}

/// k-bounded Banzhaf values from a table indexed by subset bitmask (only entries with
/// at most `k` members are read).
pub(crate) fn banzhaf_from_table(pool_size: usize, k: usize, table: &[f64]) -> Vec<f64> {
    let n_s: f64 = (1..=k).map(|m| binomial(pool_size - 1, m - 1)).sum();
    (0..pool_size)
        .map(|i| {
            let bit = 1u32 << i;
            let total: f64 = (0..(1u32 << pool_size))
                .filter(|&s| s & bit == 0 && (s.count_ones() as usize) < k)
                .map(|s| table[(s | bit) as usize] - table[s as usize])
                .sum();
            total / n_s
        })
        .collect()
}

/// Total order used for selection: larger value first, then higher
/// confidence, then smaller node id.
fn selection_order(values: &[f64], pool: &CandidatePool, a: usize, b: usize) -> Ordering {
    values[b]
        .total_cmp(&values[a])
        .then(pool.confidences[b].total_cmp(&pool.confidences[a]))
        .then(pool.nodes[a].cmp(&pool.nodes[b]))
}

/// The `k` pool members with the largest values, as `(node, pseudo_label)`.
pub fn top_k_select(values: &[f64], pool: &CandidatePool, k: usize) -> Result<Vec<(usize, usize)>> {
    if values.len() != pool.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for a pool of {}",
            values.len(),
            pool.len()
        )));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| selection_order(values, pool, a, b));
    Ok(order
        .into_iter()
        .take(k)
        .filter(|&i| values[i] != f64::NEG_INFINITY)
        .map(|i| (pool.nodes[i], pool.pseudo_labels[i]))
        .collect())
}
