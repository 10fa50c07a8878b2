//! Edge-list text format: one `src<TAB>dst<TAB>weight` line per edge,
//! 0-indexed, undirected edges written once. A leading
//! `# nodes=<n> directed=<bool>` comment carries the node count so trailing
//! isolated nodes survive a round trip; other `#` lines are ignored.

use std::io::{BufRead, Write};

use super::Graph;
use crate::error::{Error, Result};

pub fn write_edge_list<W: Write>(g: &Graph, mut out: W) -> Result<()> {
    writeln!(out, "# nodes={} directed={}", g.node_count(), g.is_directed())?;
    for (i, j, w) in g.edges() {
        writeln!(out, "{i}\t{j}\t{w}")?;
    }
    Ok(())
}

/// Reads an edge list. `directed` is used only when the header is absent;
/// the node count then defaults to one past the largest index.
pub fn read_edge_list<R: BufRead>(input: R, directed: bool) -> Result<Graph> {
    let mut header: Option<(usize, bool)> = None;
    let mut edges = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if header.is_none() && edges.is_empty() {
                header = parse_header(rest);
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let parse_idx = |s: &str| {
            s.trim().parse::<usize>().map_err(|e| Error::Parse {
                line: lineno,
                msg: format!("bad node index {s:?}: {e}"),
            })
        };
        let w = fields[2].trim().parse::<f64>().map_err(|e| Error::Parse {
            line: lineno,
            msg: format!("bad weight {:?}: {e}", fields[2]),
        })?;
        edges.push((parse_idx(fields[0])?, parse_idx(fields[1])?, w));
    }
    let (n, directed) = match header {
        Some(h) => h,
        None => (
            edges.iter().map(|e| e.0.max(e.1) + 1).max().unwrap_or(0),
            directed,
        ),
    };
    Graph::from_edges(n, directed, edges)
}

fn parse_header(rest: &str) -> Option<(usize, bool)> {
    let mut nodes = None;
    let mut directed = None;
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("nodes=") {
            nodes = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("directed=") {
            directed = v.parse().ok();
        }
    }
    Some((nodes?, directed?))
}
