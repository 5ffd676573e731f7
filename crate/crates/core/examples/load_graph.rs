//! Build a graph, normalize its adjacency both ways, and round-trip it
//! through the on-disk GraphPack format.
//!
//! ```text
//! cargo run --release --example load_graph [GRAPHPACK_DIR]
//! ```

use graph_selftrain::graph::synthetic::PlantedPartition;
use graph_selftrain::graph::{load_dataset, normalize, save_dataset, NormalizationMode};

fn main() -> graph_selftrain::Result<()> {
    let (graph, split) = match std::env::args().nth(1) {
        Some(dir) => load_dataset(dir)?,
        None => PlantedPartition::default().generate(0),
    };
    println!(
        "{} nodes, {} undirected edges, {} features, {} classes",
        graph.n_nodes(),
        graph.n_edges(),
        graph.n_features(),
        graph.n_classes()
    );
    println!("split: {} train / {} val / {} test", split.train.len(), split.val.len(), split.test.len());

    let degrees: Vec<usize> = (0..graph.n_nodes()).map(|u| graph.degree(u)).collect();
    let mean = degrees.iter().sum::<usize>() as f64 / degrees.len() as f64;
    println!("mean degree {mean:.2}, max degree {}", degrees.iter().max().unwrap_or(&0));

    let row = normalize(&graph, NormalizationMode::Row, true)?;
    let sym = normalize(&graph, NormalizationMode::Symmetric, true)?;
    row.check_row_stochastic(1e-12)?;
    println!("row-normalized: {} stored entries, row 0 sums to {:.6}", row.nnz(), row.row_sum(0));
    println!("symmetric: weight(0, 0) = {:.4}", sym.weight(0, 0));

    let dir = std::env::temp_dir().join("graph-selftrain-example-pack");
    save_dataset(&dir, &graph, &split)?;
    let (back, back_split) = load_dataset(&dir)?;
    assert_eq!(back.edge_list(), graph.edge_list());
    assert_eq!(back_split, split);
    println!("round-tripped through {}", dir.display());
    Ok(())
}
