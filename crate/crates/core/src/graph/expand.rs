use nalgebra::{DMatrix, DVector};

use super::Graph;
use crate::error::{check_len, Result};

/// A graph with one incoming node appended as node `N`.
///
/// The incoming node only has out-edges (its attachment row); no existing
/// node points to it, so the last column of the expanded adjacency is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedGraph {
    base: Graph,
    attachment: DVector<f64>,
}

/// Attach a new node whose out-edge weights are `a_plus`.
pub fn expand(g: &Graph, a_plus: &DVector<f64>) -> Result<ExpandedGraph> {
    check_len("attachment vector", g.node_count(), a_plus.len())?;
    if a_plus.iter().any(|v| !v.is_finite()) {
        return Err(crate::Error::InvalidArgument(
            "attachment vector has non-finite entries".into(),
        ));
    }
    Ok(ExpandedGraph {
        base: g.clone(),
        attachment: a_plus.clone(),
    })
}

impl ExpandedGraph {
    pub fn base(&self) -> &Graph {
        &self.base
    }

    pub fn attachment(&self) -> &DVector<f64> {
        &self.attachment
    }

    /// `N + 1`.
    pub fn node_count(&self) -> usize {
        self.base.node_count() + 1
    }

    /// Shift on the expanded graph: `[A x; a_+^T x]` where `x` is the first
    /// `N` entries of `x_plus`. The incoming node's own value never
    /// propagates because nothing points at it.
    pub fn shift(&self, x_plus: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.base.node_count();
        check_len("expanded signal", n + 1, x_plus.len())?;
        let head = x_plus.rows(0, n).into_owned();
        let top = self.base.shift_unchecked(&head);
        let last = self.attachment.dot(&head);
        Ok(DVector::from_iterator(
            n + 1,
            top.iter().copied().chain(std::iter::once(last)),
        ))
    }

    /// The `(N+1) x (N+1)` block matrix `[[A, 0], [a_+^T, 0]]`.
    pub fn adjacency_dense(&self) -> DMatrix<f64> {
        let n = self.base.node_count();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&self.base.to_dense());
        for j in 0..n {
            m[(n, j)] = self.attachment[j];
        }
        m
    }

    /// The expanded graph as a directed graph on `N + 1` nodes.
    pub fn as_graph(&self) -> Result<Graph> {
        let n = self.base.node_count();
        let edges = self
            .base
            .edges()
            .flat_map(|(i, j, w)| {
                if self.base.is_directed() {
                    vec![(i, j, w)]
                } else {
                    vec![(i, j, w), (j, i, w)]
                }
            })
            .chain(
                self.attachment
                    .iter()
                    .enumerate()
                    .map(move |(j, &w)| (n, j, w)),
            );
        Graph::from_edges(n + 1, true, edges)
    }

    /// Drop the incoming node, recovering the substrate graph.
    pub fn truncate(&self) -> Result<Graph> {
        let n = self.base.node_count();
        let full = self.as_graph()?;
        let kept = full
            .edges()
            .filter(|&(i, j, _)| i < n && j < n)
            .filter(|&(i, j, _)| self.base.is_directed() || i < j);
        Graph::from_edges(n, self.base.is_directed(), kept.collect::<Vec<_>>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::erdos_renyi;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn isolated_incoming_node_is_block_diagonal() {
        let g = erdos_renyi(6, 0.5, 2).unwrap();
        let eg = expand(&g, &DVector::zeros(6)).unwrap();
        let m = eg.adjacency_dense();
        assert_eq!(m.view((0, 0), (6, 6)), g.to_dense());
        assert_eq!(m.row(6).amax(), 0.0);
        assert_eq!(m.column(6).amax(), 0.0);
    }

    #[test]
    fn two_node_instance() {
        let g = Graph::from_edges(2, false, [(0, 1, 1.0)]).unwrap();
        let eg = expand(&g, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let m = eg.adjacency_dense();
        assert_eq!(m.row(2).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0]);
        assert_eq!(m[(0, 2)], 0.0);
        assert_eq!(m[(1, 2)], 0.0);
        assert_eq!(m[(0, 1)], 1.0);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let g = erdos_renyi(4, 0.5, 0).unwrap();
        assert!(expand(&g, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn powers_have_attachment_times_power_block() {
        // Dense oracle: A_+^l = [[A^l, 0], [a^T A^(l-1), 0]].
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..5 {
            let g = erdos_renyi(12, 0.3, trial).unwrap();
            let a = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
            let eg = expand(&g, &a).unwrap();
            let ap = eg.adjacency_dense();
            let adj = g.to_dense();
            let mut power = ap.clone();
            let mut base_prev = DMatrix::identity(12, 12);
            for _l in 1..=4 {
                let bottom = a.transpose() * &base_prev;
                assert!((power.view((12, 0), (1, 12)) - &bottom).amax() < 1e-9);
                assert!(power.column(12).amax() == 0.0);
                base_prev = &base_prev * &adj;
                power = &power * &ap;
            }
        }
    }

    #[test]
    fn truncate_recovers_base() {
        for directed in [false, true] {
            let g = if directed {
                Graph::from_edges(4, true, [(0, 1, 0.5), (2, 3, 1.5), (3, 0, -2.0)]).unwrap()
            } else {
                erdos_renyi(10, 0.4, 1).unwrap()
            };
            let a = DVector::from_fn(g.node_count(), |i, _| i as f64 * 0.5);
            let eg = expand(&g, &a).unwrap();
            assert_eq!(eg.truncate().unwrap(), g);
        }
    }

    #[test]
    fn sparse_shift_matches_dense() {
        let g = erdos_renyi(8, 0.4, 4).unwrap();
        let a = DVector::from_fn(8, |i, _| (i % 3) as f64);
        let eg = expand(&g, &a).unwrap();
        let x = DVector::from_fn(9, |i, _| (i as f64).sin());
        assert!((eg.shift(&x).unwrap() - eg.adjacency_dense() * &x).amax() < 1e-12);
    }
}
