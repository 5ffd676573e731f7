//! Two-layer graph convolutional network,
//! `Z = Â · ReLU(Â · X · W1 + b1) · W2 + b2`, with `Â` the symmetrically
//! normalized adjacency with self-loops.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, write_history_csv};
pub use train::{loss_and_gradients, train, EpochRecord, Gradients, TrainConfig, TrainOutcome};

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{NormalizationMode, NormalizedAdjacency, SparseFeatures};
use crate::numeric::{argmax_rows, softmax_rows};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub dropout_rate: f64,
    pub seed: u64,
}

/// Glorot-uniform weights and zero biases.
pub fn init_model(n_features: usize, hidden: usize, n_classes: usize, seed: u64) -> GcnModel {
    let mut rng = rng::rng_for(seed, 0);
    let mut glorot = |rows: usize, cols: usize| {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
    };
    let w1 = glorot(n_features, hidden);
    let w2 = glorot(hidden, n_classes);
    GcnModel {
        w1,
        b1: Array1::zeros(hidden),
        w2,
        b2: Array1::zeros(n_classes),
        dropout_rate: 0.5,
        seed,
    }
}

/// Whether dropout is active for a forward pass.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    pub pre_act: Array2<f64>,
    /// Inverted-dropout scale per hidden unit; `None` in eval mode.
    pub mask: Option<Array2<f64>>,
    pub agg_hidden: Array2<f64>,
    pub logits: Array2<f64>,
}

impl GcnModel {
    pub fn n_features(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.w2.ncols()
    }

    fn check_shapes(&self, adj: &NormalizedAdjacency, x: &SparseFeatures) -> Result<()> {
        if adj.mode() != NormalizationMode::Symmetric {
            return Err(Error::invalid("the GCN expects a symmetrically normalized adjacency"));
        }
        if x.nrows() != adj.n_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows for {} nodes",
                x.nrows(),
                adj.n_nodes()
            )));
        }
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature columns, model expects {}",
                x.ncols(),
                self.n_features()
            )));
        }
        Ok(())
    }

    pub(crate) fn forward_cached(&self, adj: &NormalizedAdjacency, x: &SparseFeatures, mode: Mode<'_>) -> Result<ForwardCache> {
        self.check_shapes(adj, x)?;
        let mut pre_act = adj.matmul(&x.matmul(&self.w1));
        pre_act += &self.b1;
        let mut hidden = pre_act.mapv(|v| v.max(0.0));
        let mask = match mode {
            Mode::Train(rng) if self.dropout_rate > 0.0 => {
                let keep = 1.0 - self.dropout_rate;
                let m = Array2::from_shape_simple_fn(hidden.raw_dim(), || {
                    if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                hidden *= &m;
                Some(m)
            }
            _ => None,
        };
        let agg_hidden = adj.matmul(&hidden);
        let mut logits = agg_hidden.dot(&self.w2);
        logits += &self.b2;
        Ok(ForwardCache {
            pre_act,
            mask,
            agg_hidden,
            logits,
        })
    }

    /// Logits for every node.
    pub fn forward(&self, adj: &NormalizedAdjacency, x: &SparseFeatures, mode: Mode<'_>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(adj, x, mode)?.logits)
    }

    pub fn predict_proba(&self, adj: &NormalizedAdjacency, x: &SparseFeatures) -> Result<Array2<f64>> {
        Ok(softmax_rows(&self.forward(adj, x, Mode::Eval)?))
    }

    pub fn predict(&self, adj: &NormalizedAdjacency, x: &SparseFeatures) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.forward(adj, x, Mode::Eval)?))
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).all(|v| v.is_finite())
    }

    pub(crate) fn hidden_grad_mask(cache: &ForwardCache) -> Array2<f64> {
        let mut g = cache.pre_act.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        if let Some(m) = &cache.mask {
            g *= m;
        }
        g
    }

    pub(crate) fn bias_grad(m: &Array2<f64>) -> Array1<f64> {
        m.sum_axis(Axis(0))
    }
}

/// Fraction of `nodes` whose prediction matches the label.
pub fn accuracy(predictions: &[usize], labels: &[usize], nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::Empty("node set for accuracy"));
    }
    let hits = nodes.iter().filter(|&&u| predictions[u] == labels[u]).count();
    Ok(hits as f64 / nodes.len() as f64)
}
