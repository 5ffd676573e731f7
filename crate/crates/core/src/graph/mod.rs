//! Graph storage: an immutable CSR adjacency with dense node features,
//! class labels, and a train/validation/test split.

mod io;
mod labels;
mod noise;
mod normalize;
pub mod synthetic;

pub use io::{convert, load_dataset, save_dataset, ConvertInputs, Manifest, SplitSpec};
pub use labels::{LabelState, PseudoLabel};
pub use noise::{flip_labels, subsample_train};
pub use normalize::{normalize, NormalizationMode, NormalizedAdjacency};

use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected graph in compressed sparse row form. Every undirected edge is
/// stored in both directions; a self-loop is stored once.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    features: Array2<f64>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl Graph {
    /// Builds a graph from an edge list. With `symmetrize = false` the list
    /// must already contain both directions of every edge.
    pub fn from_edges(
        n_nodes: usize,
        edges: &[(usize, usize)],
        features: Array2<f64>,
        labels: Vec<usize>,
        n_classes: usize,
        symmetrize: bool,
    ) -> Result<Self> {
        if features.nrows() != n_nodes {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows for {} nodes",
                features.nrows(),
                n_nodes
            )));
        }
        if labels.len() != n_nodes {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} nodes",
                labels.len(),
                n_nodes
            )));
        }
        let mut set = BTreeSet::new();
        for &(u, v) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::DimensionMismatch(format!(
                    "edge ({u}, {v}) references a node >= {n_nodes}"
                )));
            }
            set.insert((u, v));
            if symmetrize {
                set.insert((v, u));
            }
        }
        if !symmetrize {
            for &(u, v) in &set {
                if !set.contains(&(v, u)) {
                    return Err(Error::AsymmetricEdge(u, v));
                }
            }
        }
        let mut offsets = vec![0usize; n_nodes + 1];
        for &(u, _) in &set {
            offsets[u + 1] += 1;
        }
        for i in 0..n_nodes {
            offsets[i + 1] += offsets[i];
        }
        // BTreeSet iteration is sorted by (u, v), so targets come out grouped by row.
        let targets = set.into_iter().map(|(_, v)| v).collect();
        let graph = Graph {
            offsets,
            targets,
            features,
            labels,
            n_classes,
        };
        graph.validate()?;
        Ok(graph)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        if self.offsets.len() != n + 1 || self.offsets[n] != self.targets.len() {
            return Err(Error::DimensionMismatch("CSR offsets inconsistent".into()));
        }
        if self.offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::DimensionMismatch("CSR offsets decrease".into()));
        }
        if self.n_classes == 0 {
            return Err(Error::invalid("graph needs at least one class"));
        }
        for (node, &label) in self.labels.iter().enumerate() {
            if label >= self.n_classes {
                return Err(Error::LabelOutOfRange {
                    node,
                    label,
                    n_classes: self.n_classes,
                });
            }
        }
        if let Some(pos) = self.features.iter().position(|x| !x.is_finite()) {
            let d = self.features.ncols().max(1);
            return Err(Error::invalid(format!(
                "non-finite feature at node {} column {}",
                pos / d,
                pos % d
            )));
        }
        for u in 0..n {
            for &v in self.neighbors(u) {
                if v >= n {
                    return Err(Error::DimensionMismatch(format!("target {v} out of range")));
                }
                if self.neighbors(v).binary_search(&u).is_err() {
                    return Err(Error::AsymmetricEdge(u, v));
                }
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    /// Number of undirected edges, counting a self-loop once.
    pub fn n_edges(&self) -> usize {
        let loops = (0..self.n_nodes())
            .filter(|&u| self.neighbors(u).binary_search(&u).is_ok())
            .count();
        (self.targets.len() - loops) / 2 + loops
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// Sorted neighbour list of `u`.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Each undirected edge once, `u <= v`.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_edges());
        for u in 0..self.n_nodes() {
            for &v in self.neighbors(u) {
                if u <= v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Returns a copy with labels replaced, e.g. after noise injection.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Graph> {
        let mut g = self.clone();
        if labels.len() != g.n_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} nodes",
                labels.len(),
                g.n_nodes()
            )));
        }
        g.labels = labels;
        g.validate()?;
        Ok(g)
    }

    /// Returns a copy whose feature rows are scaled to sum to one
    /// (all-zero rows are left as is).
    pub fn with_row_normalized_features(&self) -> Graph {
        let mut g = self.clone();
        for mut row in g.features.rows_mut() {
            let s: f64 = row.sum();
            if s != 0.0 {
                row.mapv_inplace(|x| x / s);
            }
        }
        g
    }
}

/// Disjoint train / validation / test node sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn new(train: Vec<usize>, val: Vec<usize>, test: Vec<usize>) -> Self {
        Split { train, val, test }
    }

    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        let mut seen = vec![false; n_nodes];
        for (name, ids) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            if ids.is_empty() {
                return Err(Error::Parse {
                    what: "split".into(),
                    detail: format!("{name} set is empty"),
                });
            }
            for &id in ids {
                if id >= n_nodes {
                    return Err(Error::DimensionMismatch(format!(
                        "{name} node {id} >= {n_nodes}"
                    )));
                }
                if seen[id] {
                    return Err(Error::Parse {
                        what: "split".into(),
                        detail: format!("node {id} appears twice"),
                    });
                }
                seen[id] = true;
            }
        }
        Ok(())
    }

    /// Nodes outside train, validation and test.
    pub fn outside(&self, n_nodes: usize) -> Vec<usize> {
        let mut used = vec![false; n_nodes];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            used[i] = true;
        }
        (0..n_nodes).filter(|&i| !used[i]).collect()
    }
}

/// Row-compressed view of the non-zero feature entries. Bag-of-words
/// features are very sparse, so `X · W` runs over non-zeros only.
#[derive(Debug, Clone)]
pub struct SparseFeatures {
    n_rows: usize,
    n_cols: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseFeatures {
    pub fn from_dense(x: &Array2<f64>) -> Self {
        let mut offsets = Vec::with_capacity(x.nrows() + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        offsets.push(0);
        for row in x.rows() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    cols.push(j);
                    values.push(v);
                }
            }
            offsets.push(cols.len());
        }
        SparseFeatures {
            n_rows: x.nrows(),
            n_cols: x.ncols(),
            offsets,
            cols,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.n_rows
    }

    pub fn ncols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    /// `X · W` for a dense `W` of shape `ncols × k`.
    pub fn matmul(&self, w: &Array2<f64>) -> Array2<f64> {
        assert_eq!(w.nrows(), self.n_cols, "feature/weight shape mismatch");
        let k = w.ncols();
        let w = w.as_standard_layout();
        let ws = w.as_slice().expect("standard layout");
        let mut out = Array2::<f64>::zeros((self.n_rows, k));
        let os = out.as_slice_mut().expect("standard layout");
        for i in 0..self.n_rows {
            let dst = &mut os[i * k..(i + 1) * k];
            for (j, v) in self.row(i) {
                let src = &ws[j * k..(j + 1) * k];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
        out
    }

    /// `Xᵀ · G` for a dense `G` of shape `nrows × k`.
    pub fn transpose_matmul(&self, g: &Array2<f64>) -> Array2<f64> {
        assert_eq!(g.nrows(), self.n_rows, "feature/gradient shape mismatch");
        let k = g.ncols();
        let g = g.as_standard_layout();
        let gs = g.as_slice().expect("standard layout");
        let mut out = Array2::<f64>::zeros((self.n_cols, k));
        let os = out.as_slice_mut().expect("standard layout");
        for i in 0..self.n_rows {
            let src = &gs[i * k..(i + 1) * k];
            for (j, v) in self.row(i) {
                let dst = &mut os[j * k..(j + 1) * k];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
        out
    }
}
