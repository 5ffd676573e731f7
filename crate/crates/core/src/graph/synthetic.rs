//! Small random graphs for tests, examples, and smoke runs.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{Graph, Split};
use crate::rng;

/// Erdős–Rényi `G(n, p)` with one constant feature per node and a single class.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = rng::rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges, Array2::ones((n, 1)), vec![0; n], 1, true)
        .expect("generated graph is valid")
}

/// Parameters of a planted-partition graph whose node features are noisy
/// class-specific bags of words.
#[derive(Debug, Clone)]
pub struct PlantedPartition {
    pub nodes_per_class: usize,
    pub n_classes: usize,
    /// Expected neighbours inside the node's class.
    pub degree_in: f64,
    /// Expected neighbours outside the node's class.
    pub degree_out: f64,
    pub n_features: usize,
    /// Words switched on per node.
    pub words_per_node: usize,
    /// Probability that a switched-on word is drawn from the node's class vocabulary.
    pub signal: f64,
    pub train_per_class: usize,
    pub n_val: usize,
    pub n_test: usize,
}

impl Default for PlantedPartition {
    fn default() -> Self {
        PlantedPartition {
            nodes_per_class: 60,
            n_classes: 3,
            degree_in: 4.0,
            degree_out: 1.0,
            n_features: 60,
            words_per_node: 6,
            signal: 0.5,
            train_per_class: 3,
            n_val: 30,
            n_test: 60,
        }
    }
}

impl PlantedPartition {
    pub fn generate(&self, seed: u64) -> (Graph, Split) {
        let c = self.n_classes;
        let n = self.nodes_per_class * c;
        let mut rng = rng::rng(seed);
        let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
        let p_in = (self.degree_in / (self.nodes_per_class.max(2) - 1) as f64).min(1.0);
        let p_out = (self.degree_out / (n - self.nodes_per_class).max(1) as f64).min(1.0);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                let p = if labels[u] == labels[v] { p_in } else { p_out };
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        let vocab = (self.n_features / c).max(1);
        let mut x = Array2::zeros((n, self.n_features));
        for u in 0..n {
            for _ in 0..self.words_per_node {
                let w = if rng.random::<f64>() < self.signal {
                    (labels[u] * vocab + rng.random_range(0..vocab)).min(self.n_features - 1)
                } else {
                    rng.random_range(0..self.n_features)
                };
                x[[u, w]] = 1.0;
            }
        }
        let graph = Graph::from_edges(n, &edges, x, labels.clone(), c, true)
            .expect("generated graph is valid");

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut train = Vec::new();
        let mut per_class = vec![0usize; c];
        let mut rest = Vec::new();
        for &u in &order {
            if per_class[labels[u]] < self.train_per_class {
                per_class[labels[u]] += 1;
                train.push(u);
            } else {
                rest.push(u);
            }
        }
        let val: Vec<usize> = rest.iter().copied().take(self.n_val).collect();
        let test: Vec<usize> = rest.iter().copied().skip(self.n_val).take(self.n_test).collect();
        train.sort_unstable();
        let mut val = val;
        val.sort_unstable();
        let mut test = test;
        test.sort_unstable();
        (graph, Split::new(train, val, test))
    }
}
