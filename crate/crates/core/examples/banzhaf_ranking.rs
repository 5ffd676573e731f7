//! Rank a candidate pool by k-bounded Banzhaf value: exactly by enumerating
//! every coalition of at most k members, and approximately with the
//! maximum-sample-reuse estimator.

use ndarray::Array2;
use rand::Rng;

use graph_selftrain::banzhaf::{exhaustive_banzhaf, msr_banzhaf, MsrConfig, SamplingMode};
use graph_selftrain::graph::synthetic::erdos_renyi;
use graph_selftrain::graph::{normalize, NormalizationMode};
use graph_selftrain::objective::utility_at_positions;
use graph_selftrain::propagation::{build_state, PprConfig};

fn ranking(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

fn main() -> graph_selftrain::Result<()> {
    let n = 30;
    let adj = normalize(&erdos_renyi(n, 0.12, 104), NormalizationMode::Row, true)?;
    let mut rng = graph_selftrain::rng::rng(4);
    let logits = Array2::from_shape_simple_fn((n, 4), || rng.random_range(-3.0..3.0));

    let anchored: Vec<usize> = (0..5).collect();
    let pool: Vec<usize> = (5..15).collect();
    let eval: Vec<usize> = (5..n).collect();
    let state = build_state(&adj, &logits, &anchored, &pool, &PprConfig::default(), usize::MAX)?;
    let utility = |positions: &[usize]| utility_at_positions(&state, positions, &eval, false);

    let k = 3;
    let exact = exhaustive_banzhaf(pool.len(), k, utility)?;
    println!("exact ranking:        {:?}", ranking(&exact));
    for sampling in [SamplingMode::SizeUniform, SamplingMode::CoalitionWeighted] {
        for samples in [500, 5_000, 50_000] {
            let cfg = MsrConfig { sampling, ..MsrConfig::new(samples, k, 1) };
            let est = msr_banzhaf(pool.len(), &cfg, utility)?;
            println!("{sampling:?} B={samples:<6} {:?}", ranking(&est.values));
        }
    }
    Ok(())
}
