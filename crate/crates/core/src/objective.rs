//! Information objective `O = H(mean prediction) − mean H(prediction)` and
//! the subset utility built on propagated logits.

use ndarray::{Array2, ArrayView1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::softmax_in_place;
use crate::propagation::PropagationState;

const RENORM_TOL: f64 = 1e-6;
const NEG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveBreakdown {
    pub mean_individual_entropy: f64,
    pub aggregate_entropy: f64,
    pub value: f64,
}

fn plogp_sum(p: impl Iterator<Item = f64>) -> f64 {
    -p.filter(|&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// Shannon entropy in nats, with `0 log 0 = 0`. Rows within `1e-6` of
/// summing to one are renormalized.
pub fn entropy(p: ArrayView1<'_, f64>) -> Result<f64> {
    if let Some(&v) = p.iter().find(|&&v| v < -NEG_TOL || !v.is_finite()) {
        return Err(Error::invalid(format!("invalid probability entry {v}")));
    }
    let sum: f64 = p.iter().map(|&v| v.max(0.0)).sum();
    if (sum - 1.0).abs() > RENORM_TOL {
        return Err(Error::invalid(format!("probability row sums to {sum}")));
    }
    Ok(plogp_sum(p.iter().map(|&v| v.max(0.0) / sum)))
}

/// Objective over the rows of `probs`.
pub fn objective(probs: &Array2<f64>) -> Result<ObjectiveBreakdown> {
    let n = probs.nrows();
    if n == 0 {
        return Err(Error::Empty("evaluation set for the objective"));
    }
    let mut mean_h = 0.0;
    for row in probs.rows() {
        mean_h += entropy(row)?;
    }
    mean_h /= n as f64;
    let mean_row = probs.mean_axis(ndarray::Axis(0)).expect("non-empty");
    let agg = entropy(mean_row.view())?;
    Ok(ObjectiveBreakdown {
        mean_individual_entropy: mean_h,
        aggregate_entropy: agg,
        value: agg - mean_h,
    })
}

/// Objective of softmaxed logit rows, skipping validation (softmax rows are
/// distributions by construction).
pub fn objective_of_logits(mut logits: Array2<f64>) -> Result<ObjectiveBreakdown> {
    let n = logits.nrows();
    if n == 0 {
        return Err(Error::Empty("evaluation set for the objective"));
    }
    let mut mean_h = 0.0;
    for row in logits.rows_mut() {
        softmax_in_place(row);
    }
    for row in logits.rows() {
        mean_h += plogp_sum(row.iter().copied());
    }
    mean_h /= n as f64;
    let mean_row = logits.mean_axis(ndarray::Axis(0)).expect("non-empty");
    let agg = plogp_sum(mean_row.iter().copied());
    Ok(ObjectiveBreakdown {
        mean_individual_entropy: mean_h,
        aggregate_entropy: agg,
        value: agg - mean_h,
    })
}

/// `Û(S)`: the objective of `softmax(Ĥ(S))` on `eval_nodes`. With
/// `exclude_selected`, rows of the nodes in `S` are dropped.
pub fn utility(state: &PropagationState<'_>, subset: &[usize], eval_nodes: &[usize], exclude_selected: bool) -> Result<f64> {
    let pos = state.positions(subset)?;
    utility_at_positions(state, &pos, eval_nodes, exclude_selected)
}

/// [`utility`] with candidates given by their position in the pool.
pub fn utility_at_positions(
    state: &PropagationState<'_>,
    positions: &[usize],
    eval_nodes: &[usize],
    exclude_selected: bool,
) -> Result<f64> {
    let logits = if exclude_selected {
        let cands = state.candidates();
        let chosen: std::collections::HashSet<usize> = positions.iter().map(|&i| cands[i]).collect();
        let kept: Vec<usize> = eval_nodes.iter().copied().filter(|u| !chosen.contains(u)).collect();
        state.compose_rows(positions, &kept)
    } else {
        state.compose_rows(positions, eval_nodes)
    };
    Ok(objective_of_logits(logits)?.value)
}

/// Mutual information of a joint table `p(y, u)` two ways: the double-sum
/// definition, and `H(E_y[p(u|y)]) − E_y[H(p(u|y))]`. Returns `(lhs, rhs)`.
pub fn mutual_information_decomposition_check(joint: &Array2<f64>) -> (f64, f64) {
    let py = joint.sum_axis(ndarray::Axis(1));
    let pu = joint.sum_axis(ndarray::Axis(0));
    let mut lhs = 0.0;
    for ((y, u), &p) in joint.indexed_iter() {
        if p > 0.0 {
            lhs += p * (p / (py[y] * pu[u])).ln();
        }
    }
    let mut mean_cond = 0.0;
    for (y, row) in joint.rows().into_iter().enumerate() {
        if py[y] > 0.0 {
            mean_cond += py[y] * plogp_sum(row.iter().map(|&p| p / py[y]));
        }
    }
    let rhs = plogp_sum(pu.iter().copied()) - mean_cond;
    (lhs, rhs)
}
