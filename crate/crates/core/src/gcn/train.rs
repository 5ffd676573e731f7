use ndarray::{Array1, Array2, Dimension};
use serde::{Deserialize, Serialize};

use super::{GcnModel, Mode};
use crate::error::{Error, Result};
use crate::graph::{NormalizedAdjacency, SparseFeatures};
use crate::numeric::{argmax_rows, log_sum_exp, softmax_in_place};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// L2 penalty on the first-layer weights.
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub hidden_dim: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            weight_decay: 5e-4,
            max_epochs: 300,
            patience: 30,
            hidden_dim: 16,
            dropout_rate: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.patience > self.max_epochs {
            return Err(Error::invalid("patience exceeds max_epochs"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid("dropout_rate must be in [0, 1)"));
        }
        if self.hidden_dim == 0 {
            return Err(Error::invalid("hidden_dim must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Mean softmax cross-entropy over `labels` plus `weight_decay / 2 · ‖W1‖²`,
/// with analytic gradients. In `Mode::Train` the dropout mask drawn for the
/// forward pass is reused by the backward pass.
pub fn loss_and_gradients(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: &SparseFeatures,
    labels: &[(usize, usize)],
    weight_decay: f64,
    mode: Mode<'_>,
) -> Result<(f64, Gradients)> {
    if labels.is_empty() {
        return Err(Error::Empty("training label set"));
    }
    let cache = model.forward_cached(adj, x, mode)?;
    let m = labels.len() as f64;
    let mut d_logits = Array2::<f64>::zeros(cache.logits.raw_dim());
    let mut loss = 0.0;
    for &(node, label) in labels {
        let z = cache.logits.row(node);
        loss += log_sum_exp(z) - z[label];
        let mut g = d_logits.row_mut(node);
        g.assign(&z);
        softmax_in_place(g.view_mut());
        g[label] -= 1.0;
        g.mapv_inplace(|v| v / m);
    }
    loss /= m;
    loss += 0.5 * weight_decay * model.w1.iter().map(|w| w * w).sum::<f64>();

    let w2 = cache.agg_hidden.t().dot(&d_logits);
    let b2 = GcnModel::bias_grad(&d_logits);
    // Â is symmetric, so Âᵀ · G = Â · G.
    let d_hidden = adj.matmul(&d_logits.dot(&model.w2.t()));
    let d_pre = d_hidden * GcnModel::hidden_grad_mask(&cache);
    let b1 = GcnModel::bias_grad(&d_pre);
    let mut w1 = x.transpose_matmul(&adj.matmul(&d_pre));
    w1.scaled_add(weight_decay, &model.w1);
    Ok((loss, Gradients { w1, b1, w2, b2 }))
}

/// Eval-mode loss without the penalty term, plus validation accuracy.
fn evaluate(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: &SparseFeatures,
    train: &[(usize, usize)],
    val: &[(usize, usize)],
) -> Result<(f64, f64, f64)> {
    let logits = model.forward(adj, x, Mode::Eval)?;
    let ce = |set: &[(usize, usize)]| {
        set.iter()
            .map(|&(u, y)| log_sum_exp(logits.row(u)) - logits[[u, y]])
            .sum::<f64>()
            / set.len().max(1) as f64
    };
    let pred = argmax_rows(&logits);
    let val_acc = if val.is_empty() {
        0.0
    } else {
        val.iter().filter(|&&(u, y)| pred[u] == y).count() as f64 / val.len() as f64
    };
    Ok((ce(train), ce(val), val_acc))
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Adam {
    fn new(lr: f64, sizes: &[usize]) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            moments: sizes.iter().map(|&s| (vec![0.0; s], vec![0.0; s])).collect(),
        }
    }

    fn step<D: Dimension>(&mut self, slot: usize, param: &mut ndarray::Array<f64, D>, grad: &ndarray::Array<f64, D>) {
        let (m, v) = &mut self.moments[slot];
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, &g), mi), vi) in param.iter_mut().zip(grad.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + (1.0 - b1) * g;
            *vi = b2 * *vi + (1.0 - b2) * g * g;
            *p -= lr * (*mi / bc1) / ((*vi / bc2).sqrt() + eps);
        }
    }

    fn update(&mut self, model: &mut GcnModel, g: &Gradients) {
        self.t += 1;
        self.step(0, &mut model.w1, &g.w1);
        self.step(1, &mut model.b1, &g.b1);
        self.step(2, &mut model.w2, &g.w2);
        self.step(3, &mut model.b2, &g.b2);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Eval-mode cross-entropy on the training labels at the start of the epoch.
    pub train_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation accuracy
    /// (lower validation loss breaks ties).
    pub model: GcnModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
}

/// Full-batch Adam training with early stopping on validation accuracy.
pub fn train(
    mut model: GcnModel,
    adj: &NormalizedAdjacency,
    x: &SparseFeatures,
    training_labels: &[(usize, usize)],
    val: &[(usize, usize)],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if training_labels.is_empty() {
        return Err(Error::Empty("training label set"));
    }
    if val.is_empty() && cfg.patience > 0 {
        return Err(Error::Empty("validation set (required when patience > 0)"));
    }
    model.dropout_rate = cfg.dropout_rate;
    let mut dropout_rng = rng::rng_for(model.seed, 1);
    let mut adam = Adam::new(
        cfg.learning_rate,
        &[model.w1.len(), model.b1.len(), model.w2.len(), model.b2.len()],
    );
    let mut history = Vec::with_capacity(cfg.max_epochs);
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_key = (f64::NEG_INFINITY, f64::INFINITY);
    for epoch in 0..cfg.max_epochs {
        let (train_loss, val_loss, val_acc) = evaluate(&model, adj, x, training_labels, val)?;
        if !train_loss.is_finite() {
            return Err(Error::NonFiniteLoss(epoch));
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_acc,
        });
        if val_acc > best_key.0 || (val_acc == best_key.0 && val_loss < best_key.1) {
            best_key = (val_acc, val_loss);
            best = model.clone();
            best_epoch = epoch;
        } else if cfg.patience > 0 && epoch - best_epoch >= cfg.patience {
            break;
        }
        let (loss, grads) = loss_and_gradients(
            &model,
            adj,
            x,
            training_labels,
            cfg.weight_decay,
            Mode::Train(&mut dropout_rng),
        )?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(epoch));
        }
        adam.update(&mut model, &grads);
    }
    if val.is_empty() {
        best = model;
        best_epoch = history.len().saturating_sub(1);
    }
    Ok(TrainOutcome {
        model: best,
        history,
        best_epoch,
        best_val_acc: best_key.0.max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::init_model;
    use crate::graph::{normalize, synthetic::PlantedPartition, Graph, NormalizationMode};
    use ndarray::array;

    #[test]
    fn two_node_separable() {
        // With an edge between them both nodes aggregate to the same vector under
        // Â = [[.5, .5], [.5, .5]], so the separable instance has no edge.
        let g = Graph::from_edges(2, &[], array![[1.0, 0.0], [0.0, 1.0]], vec![0, 1], 2, true).unwrap();
        let adj = normalize(&g, NormalizationMode::Symmetric, true).unwrap();
        let x = SparseFeatures::from_dense(g.features());
        let cfg = TrainConfig {
            max_epochs: 200,
            patience: 0,
            dropout_rate: 0.0,
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        let labels = [(0, 0), (1, 1)];
        let out = train(init_model(2, 16, 2, 1), &adj, &x, &labels, &[], &cfg).unwrap();
        let pred = out.model.predict(&adj, &x).unwrap();
        assert_eq!(pred, vec![0, 1]);
    }

    #[test]
    fn initial_loss_near_log_c() {
        let cfg = PlantedPartition {
            n_classes: 7,
            nodes_per_class: 30,
            n_features: 140,
            ..PlantedPartition::default()
        };
        let (g, split) = cfg.generate(5);
        let g = g.with_row_normalized_features();
        let adj = normalize(&g, NormalizationMode::Symmetric, true).unwrap();
        let x = SparseFeatures::from_dense(g.features());
        let labels: Vec<_> = split.train.iter().map(|&u| (u, g.labels()[u])).collect();
        let model = init_model(g.n_features(), 16, 7, 3);
        let (loss, _) = loss_and_gradients(&model, &adj, &x, &labels, 0.0, Mode::Eval).unwrap();
        assert!((loss - 7f64.ln()).abs() < 0.1, "loss {loss}");
    }

    #[test]
    fn training_is_deterministic() {
        let (g, split) = PlantedPartition::default().generate(8);
        let adj = normalize(&g, NormalizationMode::Symmetric, true).unwrap();
        let x = SparseFeatures::from_dense(g.features());
        let tl: Vec<_> = split.train.iter().map(|&u| (u, g.labels()[u])).collect();
        let vl: Vec<_> = split.val.iter().map(|&u| (u, g.labels()[u])).collect();
        let cfg = TrainConfig::default();
        let a = train(init_model(g.n_features(), 16, 3, 4), &adj, &x, &tl, &vl, &cfg).unwrap();
        let b = train(init_model(g.n_features(), 16, 3, 4), &adj, &x, &tl, &vl, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn empty_validation_with_patience_errors() {
        let (g, split) = PlantedPartition::default().generate(8);
        let adj = normalize(&g, NormalizationMode::Symmetric, true).unwrap();
        let x = SparseFeatures::from_dense(g.features());
        let tl: Vec<_> = split.train.iter().map(|&u| (u, g.labels()[u])).collect();
        let err = train(init_model(g.n_features(), 4, 3, 0), &adj, &x, &tl, &[], &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Empty(_)));
        let err = train(init_model(g.n_features(), 4, 3, 0), &adj, &x, &[], &tl, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Empty(_)));
    }

    #[test]
    fn diverging_learning_rate_reports_epoch() {
        let (g, split) = PlantedPartition::default().generate(8);
        let adj = normalize(&g, NormalizationMode::Symmetric, true).unwrap();
        let x = SparseFeatures::from_dense(g.features());
        let tl: Vec<_> = split.train.iter().map(|&u| (u, g.labels()[u])).collect();
        let vl: Vec<_> = split.val.iter().map(|&u| (u, g.labels()[u])).collect();
        let cfg = TrainConfig {
            learning_rate: 1e300,
            patience: 0,
            max_epochs: 20,
            ..TrainConfig::default()
        };
        match train(init_model(g.n_features(), 4, 3, 0), &adj, &x, &tl, &vl, &cfg) {
            Err(Error::NonFiniteLoss(epoch)) => assert!(epoch >= 1),
            other => panic!("expected a non-finite loss, got {other:?}"),
        }
    }
}
