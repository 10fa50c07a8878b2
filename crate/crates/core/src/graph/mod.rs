//! Sparse graph substrate, random-graph generators, smooth signals and
//! single-node expansion.
//!
//! Adjacency is stored in compressed sparse row form. `A[i][j]` is the
//! weight of the edge `i -> j`, so one graph shift `(A x)_i = sum_j A_ij x_j`
//! aggregates the signal over the out-neighbours of `i`.

mod expand;
mod generate;
mod io;
mod signal;

pub use expand::{expand, ExpandedGraph};
pub use generate::{barabasi_albert, erdos_renyi};
pub use io::{read_edge_list, write_edge_list};
pub use signal::{laplacian_eigenbasis, smooth_signal, GraphSignal};

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};

/// Weighted adjacency over `n` nodes in CSR layout.
///
/// Invariants: no self loops, finite weights, symmetric storage when
/// `directed == false`. Zero weights are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    directed: bool,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Graph {
    /// A graph with `n` nodes and no edges.
    pub fn empty(n: usize, directed: bool) -> Self {
        Self {
            n,
            directed,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Build from `(src, dst, weight)` triples.
    ///
    /// For undirected graphs each edge is listed once (either orientation)
    /// and stored in both directions. Repeated edges are rejected.
    pub fn from_edges<I>(n: usize, directed: bool, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut triples: Vec<(usize, usize, f64)> = Vec::new();
        for (s, d, w) in edges {
            if s >= n || d >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({s}, {d}) out of range for {n} nodes"
                )));
            }
            if s == d {
                return Err(Error::InvalidArgument(format!("self loop at node {s}")));
            }
            if !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite weight on edge ({s}, {d})"
                )));
            }
            if w == 0.0 {
                continue;
            }
            triples.push((s, d, w));
            if !directed {
                triples.push((d, s, w));
            }
        }
        triples.sort_by_key(|t| (t.0, t.1));
        if let Some(pair) = triples
            .windows(2)
            .find(|pair| pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1)
        {
            return Err(Error::InvalidArgument(format!(
                "duplicate edge ({}, {})",
                pair[0].0, pair[0].1
            )));
        }

        let mut row_ptr = vec![0usize; n + 1];
        for &(s, _, _) in &triples {
            row_ptr[s + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = triples.iter().map(|t| t.1).collect();
        let values = triples.iter().map(|t| t.2).collect();
        Ok(Self {
            n,
            directed,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Build from a dense matrix; zero entries are absent edges.
    pub fn from_dense(adjacency: &DMatrix<f64>, directed: bool) -> Result<Self> {
        if adjacency.nrows() != adjacency.ncols() {
            return Err(Error::InvalidArgument("adjacency must be square".into()));
        }
        let n = adjacency.nrows();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = adjacency[(i, j)];
                if v != 0.0 && (directed || i < j) {
                    edges.push((i, j, v));
                }
                if !directed && i > j && adjacency[(i, j)] != adjacency[(j, i)] {
                    return Err(Error::InvalidArgument(format!(
                        "undirected adjacency is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Self::from_edges(n, directed, edges)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Number of stored nonzeros (each undirected edge counts twice).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Number of edges: arcs for directed graphs, unordered pairs otherwise.
    pub fn edge_count(&self) -> usize {
        if self.directed {
            self.nnz()
        } else {
            self.nnz() / 2
        }
    }

    /// Out-neighbours of `i` with their weights.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// Edge list; undirected edges appear once with `src < dst`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.row(i)
                .filter(move |&(j, _)| self.directed || i < j)
                .map(move |(j, w)| (i, j, w))
        })
    }

    /// Weight of `i -> j`, zero if absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// One graph shift `A x`. Costs `O(E)`.
    pub fn shift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("graph shift", self.n, x.len())?;
        Ok(self.shift_unchecked(x))
    }

    pub(crate) fn shift_unchecked(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n,
            (0..self.n).map(|i| self.row(i).map(|(j, w)| w * x[j]).sum::<f64>()),
        )
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, w) in self.row(i) {
                m[(i, j)] = w;
            }
        }
        m
    }

    /// Combinatorial Laplacian `D - A` (dense; only used for eigenbases).
    pub fn laplacian_dense(&self) -> DMatrix<f64> {
        let mut l = -self.to_dense();
        for (i, d) in degree_vector(self).iter().enumerate() {
            l[(i, i)] = *d;
        }
        l
    }
}

/// Out-weight sums `d_i = sum_j A_ij`.
pub fn degree_vector(g: &Graph) -> DVector<f64> {
    DVector::from_iterator(
        g.node_count(),
        (0..g.node_count()).map(|i| g.row(i).map(|(_, w)| w).sum::<f64>()),
    )
}
