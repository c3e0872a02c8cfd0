//! One-call featurization: source unit -> token ids plus AST/CFG/DFG
//! adjacency matrices sized for the model.

use crate::codegraph::{
    build_cfg, build_dfg, parse_ast, to_adjacency, AdjacencyMatrix, GraphError, SourceUnit,
};
use crate::embedding::{tokenize, TokenSequence, Vocabulary};

#[derive(Debug, Clone)]
pub struct Features {
    pub seq: TokenSequence,
    /// AST, CFG, DFG adjacencies, in that order.
    pub adjs: Vec<AdjacencyMatrix>,
    /// goto-style constructs degraded to straight-line flow
    pub unsupported: usize,
    /// true when any graph lost nodes to the max_nodes budget
    pub truncated: bool,
}

pub fn featurize(
    unit: &SourceUnit,
    vocab: &Vocabulary,
    max_nodes: usize,
) -> Result<Features, GraphError> {
    let ast = parse_ast(unit)?;
    let cfg = build_cfg(&ast)?;
    let dfg = build_dfg(&ast, &unit.code)?;
    let adjs = vec![
        to_adjacency(&ast, max_nodes),
        to_adjacency(&cfg.graph, max_nodes),
        to_adjacency(&dfg, max_nodes),
    ];
    let truncated = adjs.iter().any(|a| a.was_truncated);
    Ok(Features {
        seq: tokenize(unit, vocab),
        adjs,
        unsupported: cfg.unsupported,
        truncated,
    })
}
