//! Graphviz DOT emission (and a small reader used for round-trip checks).

use super::{CodeGraph, GraphEdge, GraphError, GraphKind, GraphNode, NodeId};

/// Emit a digraph with one node line per node (kind tag as label) and one
/// edge line per edge, ordered by node id so output is byte-deterministic.
pub fn to_dot(graph: &CodeGraph) -> String {
    let mut out = String::new();
    out.push_str(&format!("digraph {} {{\n", graph.kind.as_str()));
    for n in &graph.nodes {
        out.push_str(&format!(
            "  n{} [label=\"{}\"];\n",
            n.id,
            escape(&n.kind_tag)
        ));
    }
    let mut edges: Vec<&GraphEdge> = graph.edges.iter().collect();
    edges.sort_by_key(|e| (e.src, e.dst, e.edge_tag.as_str()));
    for e in edges {
        if e.edge_tag.is_empty() {
            out.push_str(&format!("  n{} -> n{};\n", e.src, e.dst));
        } else {
            out.push_str(&format!(
                "  n{} -> n{} [label=\"{}\"];\n",
                e.src,
                e.dst,
                escape(&e.edge_tag)
            ));
        }
    }
    out.push_str("}\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Minimal reader for the subset emitted by [`to_dot`]: recovers the node
/// ids, labels and edge set.
pub fn parse_dot(text: &str) -> Result<CodeGraph, GraphError> {
    let mut kind = None;
    let mut nodes: Vec<GraphNode> = Vec::new();
    let mut edges: Vec<GraphEdge> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("digraph ") {
            let name = rest.trim_end_matches('{').trim();
            kind = Some(match name {
                "ast" => GraphKind::Ast,
                "cfg" => GraphKind::Cfg,
                "dfg" => GraphKind::Dfg,
                other => return Err(GraphError::Parse(format!("unknown graph kind {other}"))),
            });
        } else if let Some((lhs, rhs)) = line.split_once("->") {
            let src = parse_node_ref(lhs)?;
            let rhs = rhs.trim().trim_end_matches(';');
            let (dst_part, tag) = match rhs.split_once('[') {
                Some((d, attr)) => (d, parse_label(attr)?),
                None => (rhs, String::new()),
            };
            let dst = parse_node_ref(dst_part)?;
            edges.push(GraphEdge {
                src,
                dst,
                edge_tag: tag,
            });
        } else if line.starts_with('n') && line.contains("[label=") {
            let (id_part, attr) = line.split_once('[').unwrap();
            let id = parse_node_ref(id_part)?;
            nodes.push(GraphNode {
                id,
                kind_tag: parse_label(attr)?,
                span: (0, 0),
            });
        }
    }
    nodes.sort_by_key(|n| n.id);
    Ok(CodeGraph {
        kind: kind.ok_or_else(|| GraphError::Parse("missing digraph header".into()))?,
        nodes,
        edges,
    })
}

fn parse_node_ref(s: &str) -> Result<NodeId, GraphError> {
    let s = s.trim().trim_end_matches(';').trim();
    s.strip_prefix('n')
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| GraphError::Parse(format!("bad node reference {s:?}")))
}

fn parse_label(attr: &str) -> Result<String, GraphError> {
    let start = attr
        .find("label=\"")
        .ok_or_else(|| GraphError::Parse("missing label".into()))?
        + 7;
    let rest = &attr[start..];
    let mut out = String::new();
    let mut chars = rest.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                if let Some(next) = chars.next() {
                    out.push(next);
                }
            }
            '"' => return Ok(out),
            other => out.push(other),
        }
    }
    Err(GraphError::Parse("unterminated label".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegraph::{build_cfg, parse_ast, SourceUnit};

    #[test]
    fn two_node_graph_has_one_arrow() {
        let g = CodeGraph {
            kind: GraphKind::Dfg,
            nodes: vec![
                GraphNode {
                    id: 0,
                    kind_tag: "def:a".into(),
                    span: (0, 0),
                },
                GraphNode {
                    id: 1,
                    kind_tag: "use:a".into(),
                    span: (0, 0),
                },
            ],
            edges: vec![GraphEdge {
                src: 0,
                dst: 1,
                edge_tag: String::new(),
            }],
        };
        let dot = to_dot(&g);
        assert_eq!(dot.matches("->").count(), 1);
    }

    #[test]
    fn empty_body_cfg_dot() {
        let ast = parse_ast(&SourceUnit::new("t", "void f(){}")).unwrap();
        let cfg = build_cfg(&ast).unwrap().graph;
        let dot = to_dot(&cfg);
        assert!(dot.contains("ENTRY"));
        assert!(dot.contains("EXIT"));
        assert_eq!(dot.matches("->").count(), 1);
    }

    #[test]
    fn roundtrip_preserves_edges_and_labels() {
        let code = "int f(int a){if(a) return 1; return 0;}";
        let ast = parse_ast(&SourceUnit::new("t", code)).unwrap();
        let cfg = build_cfg(&ast).unwrap().graph;
        let back = parse_dot(&to_dot(&cfg)).unwrap();
        assert_eq!(back.kind, cfg.kind);
        assert_eq!(back.node_count(), cfg.node_count());
        let mut a = cfg.edge_pairs();
        let mut b = back.edge_pairs();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn emission_is_deterministic() {
        let code = "void f(int n){while(n){n--;}}";
        let unit = SourceUnit::new("t", code);
        let d1 = to_dot(&build_cfg(&parse_ast(&unit).unwrap()).unwrap().graph);
        let d2 = to_dot(&build_cfg(&parse_ast(&unit).unwrap()).unwrap().graph);
        assert_eq!(d1, d2);
    }
}
