//! Fixed-size 0/1 adjacency matrices with truncation to a node budget.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{CodeGraph, GraphKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyMatrix {
    pub kind: GraphKind,
    /// Padded dimension N.
    pub size: usize,
    /// N×N entries in {0,1}, row-major; entry (i,j) = 1 iff edge i->j.
    pub data: Array2<f32>,
    pub true_node_count: usize,
    /// True when nodes were dropped to fit the budget.
    pub was_truncated: bool,
}

/// Nodes beyond `max_nodes` are dropped with their edges; the matrix is
/// zero-padded to `max_nodes`.
pub fn to_adjacency(graph: &CodeGraph, max_nodes: usize) -> AdjacencyMatrix {
    assert!(max_nodes >= 1, "max_nodes must be >= 1");
    let true_node_count = graph.node_count().min(max_nodes);
    let mut data = Array2::<f32>::zeros((max_nodes, max_nodes));
    for e in &graph.edges {
        if e.src < true_node_count && e.dst < true_node_count {
            data[[e.src, e.dst]] = 1.0;
        }
    }
    AdjacencyMatrix {
        kind: graph.kind,
        size: max_nodes,
        data,
        true_node_count,
        was_truncated: graph.node_count() > max_nodes,
    }
}
