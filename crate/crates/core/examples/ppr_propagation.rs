//! Personalized-PageRank propagation of teacher logits, and how adding a
//! candidate's logits changes the propagated field by a precomputable delta.

use ndarray::Array2;

use graph_selftrain::graph::synthetic::erdos_renyi;
use graph_selftrain::graph::{normalize, NormalizationMode};
use graph_selftrain::propagation::{build_state, masked_logits, ppr_propagate, PprConfig};

fn main() -> graph_selftrain::Result<()> {
    let n = 40;
    let graph = erdos_renyi(n, 0.08, 5);
    let adj = normalize(&graph, NormalizationMode::Row, true)?;
    let logits = Array2::from_shape_fn((n, 3), |(u, c)| if u % 3 == c { 2.0 } else { -1.0 });

    // Only the anchored rows inject mass; every other row starts at zero.
    let anchored: Vec<usize> = (0..6).collect();
    let cfg = PprConfig::default();
    let base = ppr_propagate(&adj, &masked_logits(&logits, &anchored), &cfg)?;
    let reached = base.rows().into_iter().filter(|r| r.iter().any(|&v| v != 0.0)).count();
    println!("{} anchors reach {reached} of {n} nodes", anchored.len());
    let probe = (anchored.len()..n).find(|&u| graph.neighbors(u).iter().any(|v| anchored.contains(v))).unwrap_or(0);
    println!("propagated row of node {probe}: {:.3}", base.row(probe));

    let exact = PprConfig { exact: true, tol: 1e-12, max_steps: 1000, ..cfg };
    let converged = ppr_propagate(&adj, &masked_logits(&logits, &anchored), &exact)?;
    let gap = (&converged - &base).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("{} fixed steps vs converged: max gap {gap:.2e}", cfg.steps);

    let candidates: Vec<usize> = (6..12).collect();
    let state = build_state(&adj, &logits, &anchored, &candidates, &cfg, 64 << 20)?;
    let with_two = state.compose(&[7, 9])?;
    let mut rows = anchored.clone();
    rows.extend([7, 9]);
    let direct = ppr_propagate(&adj, &masked_logits(&logits, &rows), &cfg)?;
    let err = (&with_two - &direct).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("compose([7, 9]) vs direct propagation: max difference {err:.2e}");
    println!("deltas held in memory: {}", state.is_batched());
    Ok(())
}
