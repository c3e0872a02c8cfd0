//! C parsing via tree-sitter, flattened into a [`CodeGraph`] AST.

use tree_sitter::{Node, Parser};

use super::{CodeGraph, GraphEdge, GraphError, GraphKind, GraphNode, SourceUnit};

/// Parse a source unit into a tree-shaped graph over the grammar's named
/// nodes. Node 0 is the translation-unit root; kind tags are the grammar's
/// node-type names, with error-recovery nodes kept as "ERROR". Edge tags
/// carry the grammar field name the child sits under ("condition", "body",
/// ...), or "" for positional children.
pub fn parse_ast(unit: &SourceUnit) -> Result<CodeGraph, GraphError> {
    let tree = parse_tree(&unit.code)?;
    let root = tree.root_node();
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    flatten(root, None, "", &mut nodes, &mut edges);
    Ok(CodeGraph {
        kind: GraphKind::Ast,
        nodes,
        edges,
    })
}

pub(crate) fn parse_tree(code: &str) -> Result<tree_sitter::Tree, GraphError> {
    if code.trim().is_empty() {
        return Err(GraphError::Parse("empty source text".into()));
    }
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_c::LANGUAGE.into())
        .expect("C grammar version mismatch");
    parser
        .parse(code, None)
        .ok_or_else(|| GraphError::Parse("parser yielded no root".into()))
}

fn flatten(
    node: Node,
    parent: Option<usize>,
    field: &str,
    nodes: &mut Vec<GraphNode>,
    edges: &mut Vec<GraphEdge>,
) {
    let id = nodes.len();
    nodes.push(GraphNode {
        id,
        kind_tag: node.kind().to_string(),
        span: (node.start_byte(), node.end_byte()),
    });
    if let Some(p) = parent {
        edges.push(GraphEdge {
            src: p,
            dst: id,
            edge_tag: field.to_string(),
        });
    }
    let mut cursor = node.walk();
    if cursor.goto_first_child() {
        loop {
            let child = cursor.node();
            if child.is_named() {
                let field = cursor.field_name().unwrap_or("");
                flatten(child, Some(id), field, nodes, edges);
            }
            if !cursor.goto_next_sibling() {
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_function_has_expected_nodes() {
        let unit = SourceUnit::new("t", "int f(){return 0;}");
        let ast = parse_ast(&unit).unwrap();
        ast.validate().unwrap();
        assert_eq!(ast.nodes[0].kind_tag, "translation_unit");
        assert!(ast.nodes.iter().any(|n| n.kind_tag == "function_definition"));
        assert!(ast.nodes.iter().any(|n| n.kind_tag == "return_statement"));
        // return_statement must sit inside the function_definition subtree
        let func = ast
            .nodes
            .iter()
            .position(|n| n.kind_tag == "function_definition")
            .unwrap();
        let ret = ast
            .nodes
            .iter()
            .position(|n| n.kind_tag == "return_statement")
            .unwrap();
        let mut reach = vec![false; ast.nodes.len()];
        reach[func] = true;
        for e in &ast.edges {
            if reach[e.src] {
                reach[e.dst] = true;
            }
        }
        assert!(reach[ret]);
    }

    #[test]
    fn field_names_recorded_on_edges() {
        let unit = SourceUnit::new("t", "void f(int c){if(c){c=1;}}");
        let ast = parse_ast(&unit).unwrap();
        let if_id = ast
            .nodes
            .iter()
            .position(|n| n.kind_tag == "if_statement")
            .unwrap();
        let tags: Vec<&str> = ast
            .edges
            .iter()
            .filter(|e| e.src == if_id)
            .map(|e| e.edge_tag.as_str())
            .collect();
        assert!(tags.contains(&"condition"));
        assert!(tags.contains(&"consequence"));
    }

    #[test]
    fn empty_source_is_parse_error() {
        let unit = SourceUnit::new("t", "");
        assert!(matches!(parse_ast(&unit), Err(GraphError::Parse(_))));
    }

    #[test]
    fn long_identifier_stays_one_node() {
        let unit = SourceUnit::new("t", "void drc_set_unusable(void) {}");
        let ast = parse_ast(&unit).unwrap();
        let ident = ast
            .nodes
            .iter()
            .find(|n| n.kind_tag == "identifier")
            .unwrap();
        assert_eq!(
            &unit.code[ident.span.0..ident.span.1],
            "drc_set_unusable"
        );
    }

    #[test]
    fn error_recovery_nodes_retained() {
        let unit = SourceUnit::new("t", "int f( { return 0; }");
        let ast = parse_ast(&unit).unwrap();
        assert!(ast.nodes.iter().any(|n| n.kind_tag == "ERROR"));
    }

    #[test]
    fn ast_is_a_tree() {
        let unit = SourceUnit::new(
            "t",
            "int sum(int n){int s=0; for(int i=0;i<n;i++) s+=i; return s;}",
        );
        let ast = parse_ast(&unit).unwrap();
        ast.validate().unwrap();
        assert_eq!(ast.edge_count(), ast.node_count() - 1);
    }
}
