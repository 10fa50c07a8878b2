//! Learning where incoming nodes attach to a graph.
//!
//! An incoming node links to existing node `i` with probability `p_i` and
//! weight `w_i`. The crate fits `p` and `w` so that a polynomial graph
//! filter, run on the expanded graph, predicts the signal at the incoming
//! node. See the guide under `book/` for a walkthrough.

pub mod attachment;
pub mod baselines;
pub mod data;
pub mod error;
pub mod experiments;
pub mod filter;
pub mod graph;
pub mod optimizer;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/graphs.md")]
    pub struct Graphs;
    #[doc = include_str!("../../../book/src/filters.md")]
    pub struct Filters;
    #[doc = include_str!("../../../book/src/attachment.md")]
    pub struct Attachment;
    #[doc = include_str!("../../../book/src/training.md")]
    pub struct Training;
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub struct Experiments;
    #[doc = include_str!("../../../book/src/reproducing.md")]
    pub struct Reproducing;
}
