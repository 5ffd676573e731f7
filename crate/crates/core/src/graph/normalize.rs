use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// `D⁻¹ A`: every row sums to one.
    Row,
    /// `D^-1/2 A D^-1/2`.
    Symmetric,
}

/// Weighted CSR adjacency produced by [`normalize`].
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    mode: NormalizationMode,
    self_loops: bool,
}

/// Normalizes the adjacency of `graph`, optionally inserting a self-loop on
/// every node that lacks one. Degrees are counted after self-loop insertion.
pub fn normalize(graph: &Graph, mode: NormalizationMode, self_loops: bool) -> Result<NormalizedAdjacency> {
    let n = graph.n_nodes();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut targets = Vec::with_capacity(graph.targets().len() + n);
    offsets.push(0);
    for u in 0..n {
        let nb = graph.neighbors(u);
        if self_loops && nb.binary_search(&u).is_err() {
            let pos = nb.partition_point(|&v| v < u);
            targets.extend_from_slice(&nb[..pos]);
            targets.push(u);
            targets.extend_from_slice(&nb[pos..]);
        } else {
            targets.extend_from_slice(nb);
        }
        offsets.push(targets.len());
    }
    let degree: Vec<f64> = offsets.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    if let Some(u) = degree.iter().position(|&d| d == 0.0) {
        return Err(Error::IsolatedNode(u));
    }
    let mut weights = Vec::with_capacity(targets.len());
    for u in 0..n {
        for &v in &targets[offsets[u]..offsets[u + 1]] {
            weights.push(match mode {
                NormalizationMode::Row => 1.0 / degree[u],
                NormalizationMode::Symmetric => 1.0 / (degree[u] * degree[v]).sqrt(),
            });
        }
    }
    Ok(NormalizedAdjacency {
        offsets,
        targets,
        weights,
        mode,
        self_loops,
    })
}

impl NormalizedAdjacency {
    pub fn n_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn mode(&self) -> NormalizationMode {
        self.mode
    }

    pub fn has_self_loops(&self) -> bool {
        self.self_loops
    }

    pub fn nnz(&self) -> usize {
        self.targets.len()
    }

    pub fn row(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[u]..self.offsets[u + 1];
        self.targets[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        let r = self.offsets[u]..self.offsets[u + 1];
        match self.targets[r.clone()].binary_search(&v) {
            Ok(p) => self.weights[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, u: usize) -> f64 {
        self.weights[self.offsets[u]..self.offsets[u + 1]].iter().sum()
    }

    /// Errors with the first row whose weights do not sum to one within `tol`.
    pub fn check_row_stochastic(&self, tol: f64) -> Result<()> {
        for u in 0..self.n_nodes() {
            let s = self.row_sum(u);
            if (s - 1.0).abs() > tol || self.weights[self.offsets[u]..self.offsets[u + 1]].iter().any(|&w| w < 0.0) {
                return Err(Error::NotRowStochastic { row: u, sum: s });
            }
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.n_nodes();
        let mut a = Array2::zeros((n, n));
        for u in 0..n {
            for (v, w) in self.row(u) {
                a[[u, v]] = w;
            }
        }
        a
    }

    /// `Â · X`. Rows are independent, so the parallel path gives the same
    /// bits as the sequential one.
    pub fn matmul(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(x.raw_dim());
        self.matmul_into(x, &mut out, false);
        out
    }

    pub fn matmul_into(&self, x: &Array2<f64>, out: &mut Array2<f64>, parallel: bool) {
        assert_eq!(x.nrows(), self.n_nodes(), "adjacency/matrix shape mismatch");
        assert_eq!(out.dim(), x.dim());
        let k = x.ncols();
        if k == 0 {
            return;
        }
        let xs = x.as_slice().expect("standard layout");
        let os = out.as_slice_mut().expect("standard layout");
        let row_kernel = |(u, dst): (usize, &mut [f64])| {
            dst.fill(0.0);
            for (v, w) in self.row(u) {
                let src = &xs[v * k..(v + 1) * k];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        };
        if parallel {
            os.par_chunks_mut(k).enumerate().for_each(row_kernel);
        } else {
            os.chunks_mut(k).enumerate().for_each(row_kernel);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn edge_graph() -> Graph {
        Graph::from_edges(2, &[(0, 1)], Array2::zeros((2, 1)), vec![0, 0], 1, true).unwrap()
    }

    #[test]
    fn two_node_row_mode() {
        let a = normalize(&edge_graph(), NormalizationMode::Row, true).unwrap();
        assert_eq!(a.to_dense(), ndarray::array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn single_node_self_loop() {
        let g = Graph::from_edges(1, &[], Array2::zeros((1, 1)), vec![0], 1, true).unwrap();
        let a = normalize(&g, NormalizationMode::Row, true).unwrap();
        assert_eq!(a.weight(0, 0), 1.0);
    }

    #[test]
    fn two_node_symmetric_mode() {
        // D^-1/2 (A + I) D^-1/2 with every degree 2: all entries 1/2.
        let a = normalize(&edge_graph(), NormalizationMode::Symmetric, true).unwrap();
        for u in 0..2 {
            for v in 0..2 {
                assert!((a.weight(u, v) - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn isolated_node_without_loops() {
        let g = Graph::from_edges(3, &[(0, 1)], Array2::zeros((3, 1)), vec![0; 3], 1, true).unwrap();
        let err = normalize(&g, NormalizationMode::Row, false).unwrap_err();
        assert!(matches!(err, Error::IsolatedNode(2)));
    }

    #[test]
    fn existing_self_loop_not_doubled() {
        let g = Graph::from_edges(2, &[(0, 0), (0, 1)], Array2::zeros((2, 1)), vec![0, 0], 1, true).unwrap();
        let a = normalize(&g, NormalizationMode::Row, true).unwrap();
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.weight(0, 0), 0.5);
    }

    #[test]
    fn parallel_matmul_matches_sequential() {
        let g = super::super::synthetic::erdos_renyi(30, 0.2, 3);
        let a = normalize(&g, NormalizationMode::Row, true).unwrap();
        let x = Array2::from_shape_fn((30, 5), |(i, j)| (i * 7 + j * 3) as f64 % 11.0 - 5.0);
        let mut par = Array2::zeros((30, 5));
        a.matmul_into(&x, &mut par, true);
        assert_eq!(par, a.matmul(&x));
        let dense = a.to_dense().dot(&x);
        assert!(par.iter().zip(dense.iter()).all(|(p, d)| (p - d).abs() < 1e-12));
    }
}
