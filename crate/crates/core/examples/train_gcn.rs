use graph_selftrain::gcn::{accuracy, init_model, train, TrainConfig};
use graph_selftrain::graph::synthetic::PlantedPartition;
use graph_selftrain::selftrain::Workspace;

fn main() -> graph_selftrain::Result<()> {
    let (graph, split) = PlantedPartition { nodes_per_class: 120, n_classes: 4, ..PlantedPartition::default() }.generate(3);
    let ws = Workspace::new(&graph, &split, true)?;
    let labels = ws.graph.labels();
    let train_set: Vec<(usize, usize)> = split.train.iter().map(|&u| (u, labels[u])).collect();
    let val_set: Vec<(usize, usize)> = split.val.iter().map(|&u| (u, labels[u])).collect();

    let cfg = TrainConfig::default();
    let model = init_model(ws.graph.n_features(), cfg.hidden_dim, ws.graph.n_classes(), 7);
    let outcome = train(model, &ws.adj_sym, &ws.features, &train_set, &val_set, &cfg)?;

    for rec in outcome.history.iter().step_by(20) {
        println!("epoch {:>3}  loss {:.4}  val {:.3}", rec.epoch, rec.train_loss, rec.val_acc);
    }
    let pred = outcome.model.predict(&ws.adj_sym, &ws.features)?;
    println!(
        "best epoch {} (val {:.3}); test accuracy {:.3} with {} labels",
        outcome.best_epoch,
        outcome.best_val_acc,
        accuracy(&pred, labels, &split.test)?,
        train_set.len()
    );
    Ok(())
}
