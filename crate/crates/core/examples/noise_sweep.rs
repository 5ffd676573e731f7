use graph_selftrain::graph::synthetic::PlantedPartition;
use graph_selftrain::selftrain::Workspace;
use graph_selftrain::sweep::{sweep, write_sweep_csv, SweepAxis};
use graph_selftrain::{RunConfig, Strategy};

fn main() -> graph_selftrain::Result<()> {
    let (graph, split) = PlantedPartition { nodes_per_class: 150, train_per_class: 8, ..PlantedPartition::default() }.generate(6);
    let ws = Workspace::new(&graph, &split, true)?;
    let base = RunConfig {
        strategy: Strategy::Bangs,
        rounds: 5,
        select_k: 15,
        pool_size: 45,
        banzhaf_samples: 200,
        seeds: (0..3).collect(),
        ..RunConfig::default()
    };

    let result = sweep(&ws, &base, SweepAxis::Sigma, &[0.0, 0.1, 0.2, 0.3]);
    for cell in &result.cells {
        let raw = cell.summary.raw.expect("runs succeeded");
        let best = cell.summary.best_round.expect("runs succeeded");
        println!("label noise {:.1}: teacher {:.4}  self-trained {:.4} ± {:.4}", cell.value, raw.mean, best.mean, best.std);
    }
    let out = std::env::temp_dir().join("graph-selftrain-noise-sweep.csv");
    write_sweep_csv(&result, &out)?;
    println!("long-format results in {}", out.display());
    Ok(())
}
