//! Fit temperature scaling and ensemble temperature scaling on a teacher's
//! validation logits, then compare NLL and expected calibration error on the
//! held-out test nodes.

use ndarray::Axis;

use graph_selftrain::calibration::{ece, nll_of_probabilities, CalibrationKind, Calibrator};
use graph_selftrain::gcn::{init_model, train, Mode, TrainConfig};
use graph_selftrain::graph::synthetic::PlantedPartition;
use graph_selftrain::selftrain::Workspace;

fn main() -> graph_selftrain::Result<()> {
    let (graph, split) = PlantedPartition { nodes_per_class: 150, signal: 0.4, ..PlantedPartition::default() }.generate(11);
    let ws = Workspace::new(&graph, &split, true)?;
    let labels = ws.graph.labels();
    let pairs = |nodes: &[usize]| nodes.iter().map(|&u| (u, labels[u])).collect::<Vec<_>>();

    let cfg = TrainConfig::default();
    let model = init_model(ws.graph.n_features(), cfg.hidden_dim, ws.graph.n_classes(), 1);
    let teacher = train(model, &ws.adj_sym, &ws.features, &pairs(&split.train), &pairs(&split.val), &cfg)?.model;
    let logits = teacher.forward(&ws.adj_sym, &ws.features, Mode::Eval)?;

    let val_logits = logits.select(Axis(0), &split.val);
    let val_labels: Vec<usize> = split.val.iter().map(|&u| labels[u]).collect();
    let test_labels: Vec<usize> = split.test.iter().map(|&u| labels[u]).collect();

    println!("{:<6} {:>10} {:>10} {:>9}", "method", "test NLL", "test ECE", "params");
    for kind in [CalibrationKind::None, CalibrationKind::Ts, CalibrationKind::Ets] {
        let cal = Calibrator::fit(kind, val_logits.view(), &val_labels)?;
        let probs = cal.apply(&logits);
        let nll = nll_of_probabilities(probs.select(Axis(0), &split.test).view(), &test_labels);
        let params = match cal {
            Calibrator::Identity => String::from("-"),
            Calibrator::Temperature(t) => format!("T={:.2}", t.temperature),
            Calibrator::Ets(e) => format!("T={:.2} w={:?}", e.temperature, e.weights),
        };
        println!(
            "{:<6} {:>10.4} {:>10.4}  {params}",
            format!("{kind:?}"),
            nll,
            ece(&probs, labels, &split.test, 15)?
        );
    }
    Ok(())
}
