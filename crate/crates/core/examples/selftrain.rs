//! Self-training with each selection strategy.
//!
//! Runs on a planted-partition graph by default, or on a GraphPack
//! directory (for example the output of `scripts/fetch_cora.sh`):
//!
//! ```text
//! cargo run --release --example selftrain -- data/cora
//! ```

use graph_selftrain::graph::load_dataset;
use graph_selftrain::graph::synthetic::PlantedPartition;
use graph_selftrain::report::StrategySummary;
use graph_selftrain::selftrain::{run_seeds, Workspace};
use graph_selftrain::{RunConfig, Strategy};

fn main() -> graph_selftrain::Result<()> {
    let data = std::env::args().nth(1);
    let (graph, split) = match &data {
        Some(dir) => load_dataset(dir)?,
        None => PlantedPartition { nodes_per_class: 200, n_classes: 4, signal: 0.3, degree_out: 2.0, train_per_class: 10, ..PlantedPartition::default() }.generate(2),
    };
    let ws = Workspace::new(&graph, &split, true)?;
    let base = if data.is_some() {
        RunConfig { seeds: (0..3).collect(), ..RunConfig::default() }
    } else {
        RunConfig { rounds: 8, select_k: 20, pool_size: 60, banzhaf_samples: 300, seeds: (0..3).collect(), ..RunConfig::default() }
    };

    println!("{:<18} {:>8} {:>11} {:>14}", "strategy", "raw", "best round", "early stopped");
    for strategy in Strategy::ALL {
        let cfg = RunConfig { strategy, ..base.clone() };
        let s = StrategySummary::from_runs(strategy, &run_seeds(&ws, &cfg));
        let fmt = |a: Option<graph_selftrain::report::Aggregate>| a.map_or("-".into(), |a| format!("{:.4}", a.mean));
        println!("{:<18} {:>8} {:>11} {:>14}", strategy, fmt(s.raw), fmt(s.best_round), fmt(s.early_stopped));
    }
    Ok(())
}
