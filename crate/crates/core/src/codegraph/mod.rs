//! Structural graph extraction from C source: AST parsing, statement-level
//! control flow, and reaching-definitions data flow, plus DOT and adjacency
//! serializations.

mod adjacency;
mod cfg;
pub mod corpus;
mod dfg;
pub mod dot;
mod parse;

pub use adjacency::{to_adjacency, AdjacencyMatrix};
pub use cfg::{build_cfg, CfgResult, CFG_ENTRY, CFG_EXIT};
pub use dfg::{analyze_def_use, build_dfg, reaching_definitions, DefUse, Site, SiteKind};
pub use dot::to_dot;
pub use parse::parse_ast;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("expected {expected:?} graph, got {got:?}")]
    WrongKind { expected: GraphKind, got: GraphKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Ast,
    Cfg,
    Dfg,
}

impl GraphKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphKind::Ast => "ast",
            GraphKind::Cfg => "cfg",
            GraphKind::Dfg => "dfg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Language {
    C,
}

/// One source function (or file) with an optional vulnerability label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceUnit {
    pub id: String,
    pub code: String,
    pub language: Language,
    /// `Some(true)` = vulnerable, `Some(false)` = clean.
    pub label: Option<bool>,
}

impl SourceUnit {
    pub fn new(id: impl Into<String>, code: impl Into<String>) -> Self {
        SourceUnit {
            id: id.into(),
            code: code.into(),
            language: Language::C,
            label: None,
        }
    }

    pub fn with_label(mut self, vulnerable: bool) -> Self {
        self.label = Some(vulnerable);
        self
    }
}

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: NodeId,
    pub kind_tag: String,
    /// Byte range into the source text; (0, 0) for synthetic nodes.
    pub span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub edge_tag: String,
}

/// Typed node/edge graph derived from one source unit. Node ids are
/// contiguous from 0. For CFGs, node 0 is the entry and node 1 the exit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodeGraph {
    pub kind: GraphKind,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl CodeGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_pairs(&self) -> Vec<(NodeId, NodeId)> {
        self.edges.iter().map(|e| (e.src, e.dst)).collect()
    }

    pub fn successors(&self, id: NodeId) -> Vec<NodeId> {
        self.edges
            .iter()
            .filter(|e| e.src == id)
            .map(|e| e.dst)
            .collect()
    }

    /// Check the structural invariants for this graph's kind.
    pub fn validate(&self) -> Result<(), String> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(format!("node ids not contiguous at {i}"));
            }
        }
        for e in &self.edges {
            if e.src >= self.nodes.len() || e.dst >= self.nodes.len() {
                return Err(format!("dangling edge {} -> {}", e.src, e.dst));
            }
        }
        if self.kind == GraphKind::Ast && !self.nodes.is_empty() {
            if self.edges.len() != self.nodes.len() - 1 {
                return Err(format!(
                    "AST is not a tree: {} nodes, {} edges",
                    self.nodes.len(),
                    self.edges.len()
                ));
            }
            let mut indeg = vec![0usize; self.nodes.len()];
            for e in &self.edges {
                indeg[e.dst] += 1;
            }
            if indeg[0] != 0 || indeg.iter().skip(1).any(|&d| d != 1) {
                return Err("AST edges do not form a tree rooted at node 0".into());
            }
        }
        Ok(())
    }
}

/// Statistics accumulated over a batch extraction.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub files: usize,
    pub parse_failures: usize,
    pub truncated_graphs: usize,
    pub unsupported_constructs: usize,
}
