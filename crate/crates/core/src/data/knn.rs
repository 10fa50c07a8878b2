use nalgebra::DVector;
use rayon::prelude::*;

use super::RatingsDataset;
use crate::attachment::AttachmentSample;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Item rating columns centered on each item's mean rating, with norms,
/// for cosine similarity. Unrated entries count as zero after centering.
#[derive(Debug, Clone)]
pub struct ItemVectors {
    columns: Vec<Vec<(usize, f64)>>,
    norms: Vec<f64>,
}

impl ItemVectors {
    pub fn new(d: &RatingsDataset) -> Self {
        let columns: Vec<Vec<(usize, f64)>> = d
            .by_item()
            .into_iter()
            .map(|col| {
                if col.is_empty() {
                    return col;
                }
                let mean = col.iter().map(|e| e.1).sum::<f64>() / col.len() as f64;
                col.into_iter().map(|(u, r)| (u, r - mean)).collect()
            })
            .collect();
        let norms = columns
            .iter()
            .map(|c| c.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt())
            .collect();
        Self { columns, norms }
    }

    pub fn item_count(&self) -> usize {
        self.columns.len()
    }

    pub fn has_ratings(&self, item: usize) -> bool {
        !self.columns[item].is_empty()
    }

    /// Cosine similarity of the centered columns, clamped to `[0, 1]`.
    /// Zero when either column is identically zero.
    pub fn similarity(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.columns[i], &self.columns[j]);
        let denom = self.norms[i] * self.norms[j];
        if denom == 0.0 {
            return 0.0;
        }
        let (mut x, mut y, mut dot) = (0, 0, 0.0);
        while x < a.len() && y < b.len() {
            match a[x].0.cmp(&b[y].0) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    dot += a[x].1 * b[y].1;
                    x += 1;
                    y += 1;
                }
            }
        }
        (dot / denom).clamp(0.0, 1.0)
    }

    /// The `k` candidates most similar to `item`, as `(position in
    /// candidates, similarity)`. Only positive similarities qualify; ties go
    /// to the lower item index. `item` itself is never returned.
    pub fn nearest(&self, item: usize, candidates: &[usize], k: usize) -> Vec<(usize, f64)> {
        let mut scored: Vec<(usize, f64)> = candidates
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c != item)
            .map(|(pos, &c)| (pos, self.similarity(item, c)))
            .filter(|&(_, s)| s > 0.0)
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(candidates[a.0].cmp(&candidates[b.0])));
        scored.truncate(k);
        scored
    }

    /// Directed kNN graph over `node_items` (node `j` is `node_items[j]`).
    pub fn knn_graph(&self, node_items: &[usize], k: usize) -> Result<Graph> {
        check_items(node_items, self.item_count())?;
        if k >= node_items.len() {
            return Err(Error::InvalidArgument(format!(
                "k = {k} must be below the node count {}",
                node_items.len()
            )));
        }
        for &item in node_items {
            if !self.has_ratings(item) {
                log::warn!("item {item} has no ratings; it will be an isolated node");
            }
        }
        let rows: Vec<Vec<(usize, usize, f64)>> = node_items
            .par_iter()
            .enumerate()
            .map(|(src, &item)| {
                self.nearest(item, node_items, k)
                    .into_iter()
                    .map(|(dst, s)| (src, dst, s))
                    .collect()
            })
            .collect();
        Graph::from_edges(node_items.len(), true, rows.into_iter().flatten())
    }

    /// Ground-truth attachment of a cold item to the core: similarities to
    /// its `k` nearest core items, and the matching binary pattern.
    pub fn attachment(&self, item: usize, core_items: &[usize], k: usize) -> Result<AttachmentSample> {
        check_items(core_items, self.item_count())?;
        if item >= self.item_count() {
            return Err(Error::InvalidArgument(format!("item {item} out of range")));
        }
        if core_items.contains(&item) {
            return Err(Error::InvalidArgument(format!("item {item} is a core item")));
        }
        if !self.has_ratings(item) {
            return Err(Error::InvalidArgument(format!("item {item} has no ratings")));
        }
        let mut a = DVector::zeros(core_items.len());
        let mut b = DVector::zeros(core_items.len());
        for (pos, s) in self.nearest(item, core_items, k) {
            a[pos] = s;
            b[pos] = 1.0;
        }
        Ok(AttachmentSample { a_plus: a, b_plus: b })
    }
}

fn check_items(items: &[usize], count: usize) -> Result<()> {
    let mut sorted = items.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("repeated item in node list".into()));
    }
    if let Some(&bad) = sorted.last().filter(|&&m| m >= count) {
        return Err(Error::InvalidArgument(format!("item {bad} out of range")));
    }
    Ok(())
}

/// Directed item-item graph where each item points to its `k` most similar
/// items among `node_items`, weighted by centered cosine similarity.
pub fn build_knn_item_graph(d: &RatingsDataset, node_items: &[usize], k: usize) -> Result<Graph> {
    ItemVectors::new(d).knn_graph(node_items, k)
}

pub fn attachment_from_ratings(
    d: &RatingsDataset,
    item: usize,
    core_items: &[usize],
    k: usize,
) -> Result<AttachmentSample> {
    ItemVectors::new(d).attachment(item, core_items, k)
}
