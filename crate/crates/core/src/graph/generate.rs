use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Graph;
use crate::error::{Error, Result};

/// Undirected unweighted G(n, p): every unordered pair is an edge
/// independently with probability `p_edge`.
pub fn erdos_renyi(n: usize, p_edge: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidArgument("erdos_renyi needs n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p_edge) {
        return Err(Error::InvalidArgument(format!(
            "edge probability {p_edge} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p_edge {
                edges.push((i, j, 1.0));
            }
        }
    }
    Graph::from_edges(n, false, edges)
}

/// Barabasi-Albert growth from an `m`-node clique. Each arriving node adds
/// `m` distinct edges to existing nodes chosen with probability proportional
/// to their current degree (uniformly while every degree is zero).
pub fn barabasi_albert(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if m == 0 || m >= n {
        return Err(Error::InvalidArgument(format!(
            "barabasi_albert needs 1 <= m < n, got m = {m}, n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(m * (m - 1) / 2 + m * (n - m));
    // Every edge endpoint is pushed here, so a uniform pick is degree-proportional.
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * edges.capacity());
    for i in 0..m {
        for j in (i + 1)..m {
            edges.push((i, j, 1.0));
            endpoints.extend([i, j]);
        }
    }
    let mut targets = Vec::with_capacity(m);
    for v in m..n {
        targets.clear();
        while targets.len() < m {
            let t = if endpoints.is_empty() {
                rng.random_range(0..v)
            } else {
                endpoints[rng.random_range(0..endpoints.len())]
            };
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((v, t, 1.0));
            endpoints.extend([v, t]);
        }
    }
    Graph::from_edges(n, false, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::degree_vector;

    #[test]
    fn er_extremes() {
        assert_eq!(erdos_renyi(5, 0.0, 1).unwrap().edge_count(), 0);
        assert_eq!(erdos_renyi(5, 1.0, 1).unwrap().edge_count(), 10);
        assert!(erdos_renyi(0, 0.5, 1).is_err());
        assert!(erdos_renyi(4, 1.5, 1).is_err());
    }

    #[test]
    fn er_edge_count_within_three_sigma() {
        // Binomial(4950, 0.1): mean 495, sigma sqrt(4950 * 0.09).
        let sigma = (4950.0f64 * 0.1 * 0.9).sqrt();
        for seed in 0..20 {
            let e = erdos_renyi(100, 0.1, seed).unwrap().edge_count() as f64;
            assert!((e - 495.0).abs() < 3.0 * sigma, "seed {seed}: {e} edges");
        }
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(erdos_renyi(50, 0.2, 7).unwrap(), erdos_renyi(50, 0.2, 7).unwrap());
        assert_eq!(barabasi_albert(50, 3, 7).unwrap(), barabasi_albert(50, 3, 7).unwrap());
        assert_ne!(erdos_renyi(50, 0.2, 7).unwrap(), erdos_renyi(50, 0.2, 8).unwrap());
    }

    #[test]
    fn ba_small_tree() {
        let g = barabasi_albert(3, 1, 0).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert!(barabasi_albert(3, 3, 0).is_err());
        assert!(barabasi_albert(3, 0, 0).is_err());
    }

    #[test]
    fn ba_edge_count_and_handshake() {
        for (n, m) in [(100, 2), (60, 1), (40, 5)] {
            let g = barabasi_albert(n, m, 3).unwrap();
            let expected = m * (m - 1) / 2 + m * (n - m);
            assert_eq!(g.edge_count(), expected);
            let total: f64 = degree_vector(&g).iter().sum();
            assert_eq!(total, 2.0 * expected as f64);
        }
    }

    #[test]
    fn ba_heavier_tail_than_same_density_er() {
        let (n, m) = (100, 2);
        let edges = (m * (m - 1) / 2 + m * (n - m)) as f64;
        let p_edge = edges / (n * (n - 1) / 2) as f64;
        let max_deg = |g: &Graph| degree_vector(g).max();
        let (mut ba, mut er) = (0.0, 0.0);
        for seed in 0..50 {
            ba += max_deg(&barabasi_albert(n, m, seed).unwrap());
            er += max_deg(&erdos_renyi(n, p_edge, seed).unwrap());
        }
        assert!(ba > er, "BA mean max degree {} vs ER {}", ba / 50.0, er / 50.0);
    }
}
