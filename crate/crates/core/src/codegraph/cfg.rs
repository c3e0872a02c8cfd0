//! Statement-level control flow graphs derived from the flattened AST.
//!
//! Node 0 is the synthetic entry, node 1 the synthetic exit; statement
//! nodes are numbered from 2 in source order (do-while conditions come
//! after their body, matching the source layout). Unreachable statements
//! are pruned so every remaining node lies on an entry-to-exit path.

use std::collections::BTreeMap;

use super::{CodeGraph, GraphEdge, GraphError, GraphKind, GraphNode, NodeId};

pub const CFG_ENTRY: NodeId = 0;
pub const CFG_EXIT: NodeId = 1;

/// Read-only index over a flattened AST graph: ordered children plus the
/// grammar field tag each child was attached under.
pub(crate) struct AstView<'a> {
    pub graph: &'a CodeGraph,
    children: Vec<Vec<(usize, &'a str)>>,
}

impl<'a> AstView<'a> {
    pub fn new(graph: &'a CodeGraph) -> Result<Self, GraphError> {
        if graph.kind != GraphKind::Ast {
            return Err(GraphError::WrongKind {
                expected: GraphKind::Ast,
                got: graph.kind,
            });
        }
        let mut children = vec![Vec::new(); graph.nodes.len()];
        for e in &graph.edges {
            children[e.src].push((e.dst, e.edge_tag.as_str()));
        }
        Ok(AstView { graph, children })
    }

    pub fn kind(&self, id: usize) -> &str {
        &self.graph.nodes[id].kind_tag
    }

    pub fn span(&self, id: usize) -> (usize, usize) {
        self.graph.nodes[id].span
    }

    pub fn children(&self, id: usize) -> &[(usize, &'a str)] {
        &self.children[id]
    }

    pub fn field(&self, id: usize, name: &str) -> Option<usize> {
        self.children[id]
            .iter()
            .find(|(_, f)| *f == name)
            .map(|(c, _)| *c)
    }

    pub fn find_kind(&self, kind: &str) -> Option<usize> {
        self.graph
            .nodes
            .iter()
            .position(|n| n.kind_tag == kind)
    }
}

/// CFG plus extraction metadata.
#[derive(Debug, Clone)]
pub struct CfgResult {
    pub graph: CodeGraph,
    /// Count of goto/setjmp-style constructs degraded to straight-line flow.
    pub unsupported: usize,
    /// For each CFG node, the AST node it was lowered from (None for
    /// entry/exit).
    pub ast_of: Vec<Option<usize>>,
}

/// Dangling edge waiting for its destination: (source node, edge tag).
type Dangling = Vec<(NodeId, &'static str)>;

struct Builder<'a, 'b> {
    view: &'b AstView<'a>,
    nodes: Vec<GraphNode>,
    edges: Vec<GraphEdge>,
    ast_of: Vec<Option<usize>>,
    /// break targets: innermost loop or switch collects its break sources
    break_stack: Vec<Dangling>,
    /// continue targets: Some(header) connects immediately, None (do-while)
    /// collects for later patching
    continue_stack: Vec<ContinueCtx>,
    unsupported: usize,
}

enum ContinueCtx {
    Target(NodeId),
    Deferred(Dangling),
}

impl<'a, 'b> Builder<'a, 'b> {
    fn new_node(&mut self, kind_tag: &str, span: (usize, usize), ast: Option<usize>) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(GraphNode {
            id,
            kind_tag: kind_tag.to_string(),
            span,
        });
        self.ast_of.push(ast);
        id
    }

    fn connect(&mut self, preds: &Dangling, dst: NodeId) {
        for (src, tag) in preds {
            self.edges.push(GraphEdge {
                src: *src,
                dst,
                edge_tag: (*tag).to_string(),
            });
        }
    }

    fn stmt_node(&mut self, ast_id: usize, preds: Dangling) -> NodeId {
        let n = self.new_node(self.view.kind(ast_id).to_string().as_str(), self.view.span(ast_id), Some(ast_id));
        self.connect(&preds, n);
        n
    }

    fn lower_stmt(&mut self, ast_id: usize, preds: Dangling) -> Dangling {
        match self.view.kind(ast_id) {
            "compound_statement" => {
                let kids: Vec<usize> =
                    self.view.children(ast_id).iter().map(|(c, _)| *c).collect();
                self.lower_seq(&kids, preds)
            }
            "if_statement" => {
                let h = self.stmt_node(ast_id, preds);
                let mut out = Dangling::new();
                if let Some(cons) = self.view.field(ast_id, "consequence") {
                    out.extend(self.lower_stmt(cons, vec![(h, "true")]));
                } else {
                    out.push((h, "true"));
                }
                match self.view.field(ast_id, "alternative") {
                    Some(alt) => {
                        // else_clause wraps the alternative statement
                        let inner = self
                            .view
                            .children(alt)
                            .first()
                            .map(|(c, _)| *c);
                        match inner {
                            Some(s) => out.extend(self.lower_stmt(s, vec![(h, "false")])),
                            None => out.push((h, "false")),
                        }
                    }
                    None => out.push((h, "false")),
                }
                out
            }
            "while_statement" | "for_statement" => {
                let h = self.stmt_node(ast_id, preds);
                self.break_stack.push(Vec::new());
                self.continue_stack.push(ContinueCtx::Target(h));
                let body_out = match self.view.field(ast_id, "body") {
                    Some(b) => self.lower_stmt(b, vec![(h, "true")]),
                    None => vec![(h, "true")],
                };
                self.connect(&body_out, h);
                self.continue_stack.pop();
                let mut out = self.break_stack.pop().unwrap();
                out.push((h, "false"));
                out
            }
            "do_statement" => {
                self.break_stack.push(Vec::new());
                self.continue_stack.push(ContinueCtx::Deferred(Vec::new()));
                let first_new = self.nodes.len();
                let body_out = match self.view.field(ast_id, "body") {
                    Some(b) => self.lower_stmt(b, preds.clone()),
                    None => preds.clone(),
                };
                let body_entry = if self.nodes.len() > first_new {
                    Some(first_new)
                } else {
                    None
                };
                let cond = self.new_node("do_statement", self.view.span(ast_id), Some(ast_id));
                self.connect(&body_out, cond);
                if let Some(entry) = body_entry {
                    self.edges.push(GraphEdge {
                        src: cond,
                        dst: entry,
                        edge_tag: "true".into(),
                    });
                }
                if let ContinueCtx::Deferred(conts) = self.continue_stack.pop().unwrap() {
                    self.connect(&conts, cond);
                }
                let mut out = self.break_stack.pop().unwrap();
                out.push((cond, "false"));
                out
            }
            "switch_statement" => {
                let h = self.stmt_node(ast_id, preds);
                self.break_stack.push(Vec::new());
                let mut fallthrough = Dangling::new();
                let mut has_default = false;
                if let Some(body) = self.view.field(ast_id, "body") {
                    let cases: Vec<usize> = self
                        .view
                        .children(body)
                        .iter()
                        .map(|(c, _)| *c)
                        .filter(|&c| self.view.kind(c) == "case_statement")
                        .collect();
                    for case in cases {
                        let is_default = self.view.field(case, "value").is_none();
                        has_default |= is_default;
                        let tag = if is_default { "default" } else { "case" };
                        let mut preds = fallthrough;
                        preds.push((h, tag));
                        let stmts: Vec<usize> = self
                            .view
                            .children(case)
                            .iter()
                            .filter(|(_, f)| *f != "value")
                            .map(|(c, _)| *c)
                            .collect();
                        fallthrough = self.lower_seq(&stmts, preds);
                    }
                }
                let mut out = self.break_stack.pop().unwrap();
                out.extend(fallthrough);
                if !has_default {
                    out.push((h, ""));
                }
                out
            }
            "return_statement" => {
                let n = self.stmt_node(ast_id, preds);
                self.edges.push(GraphEdge {
                    src: n,
                    dst: CFG_EXIT,
                    edge_tag: String::new(),
                });
                Vec::new()
            }
            "break_statement" => {
                let n = self.stmt_node(ast_id, preds);
                if let Some(top) = self.break_stack.last_mut() {
                    top.push((n, ""));
                } else {
                    // break outside loop/switch: degrade to straight-line
                    return vec![(n, "")];
                }
                Vec::new()
            }
            "continue_statement" => {
                let n = self.stmt_node(ast_id, preds);
                match self.continue_stack.last_mut() {
                    Some(ContinueCtx::Target(h)) => {
                        let h = *h;
                        self.edges.push(GraphEdge {
                            src: n,
                            dst: h,
                            edge_tag: String::new(),
                        });
                    }
                    Some(ContinueCtx::Deferred(v)) => v.push((n, "")),
                    None => return vec![(n, "")],
                }
                Vec::new()
            }
            "goto_statement" => {
                // recorded and treated as straight-line flow
                self.unsupported += 1;
                let n = self.stmt_node(ast_id, preds);
                vec![(n, "")]
            }
            "labeled_statement" => {
                let inner: Vec<usize> = self
                    .view
                    .children(ast_id)
                    .iter()
                    .filter(|(c, _)| self.view.kind(*c) != "statement_identifier")
                    .map(|(c, _)| *c)
                    .collect();
                self.lower_seq(&inner, preds)
            }
            "comment" => preds,
            _ => {
                // declaration, expression_statement, and anything else
                // executable becomes one straight-line node
                let n = self.stmt_node(ast_id, preds);
                vec![(n, "")]
            }
        }
    }

    fn lower_seq(&mut self, stmts: &[usize], mut preds: Dangling) -> Dangling {
        for &s in stmts {
            preds = self.lower_stmt(s, preds);
        }
        preds
    }
}

/// Build the statement-level CFG for the first function definition in the
/// AST (entry-to-exit only, when the unit has no function).
pub fn build_cfg(ast: &CodeGraph) -> Result<CfgResult, GraphError> {
    let view = AstView::new(ast)?;
    let mut b = Builder {
        view: &view,
        nodes: Vec::new(),
        edges: Vec::new(),
        ast_of: Vec::new(),
        break_stack: Vec::new(),
        continue_stack: Vec::new(),
        unsupported: 0,
    };
    b.new_node("ENTRY", (0, 0), None);
    b.new_node("EXIT", (0, 0), None);
    let body = view
        .find_kind("function_definition")
        .and_then(|f| view.field(f, "body"));
    let out = match body {
        Some(body) => b.lower_stmt(body, vec![(CFG_ENTRY, "")]),
        None => vec![(CFG_ENTRY, "")],
    };
    b.connect(&out, CFG_EXIT);
    let (nodes, edges, ast_of) = prune_unreachable(b.nodes, b.edges, b.ast_of);
    Ok(CfgResult {
        graph: CodeGraph {
            kind: GraphKind::Cfg,
            nodes,
            edges,
        },
        unsupported: b.unsupported,
        ast_of,
    })
}

/// Drop nodes not reachable from the entry (dead code after return) and
/// renumber contiguously, keeping entry/exit fixed at 0/1.
fn prune_unreachable(
    nodes: Vec<GraphNode>,
    edges: Vec<GraphEdge>,
    ast_of: Vec<Option<usize>>,
) -> (Vec<GraphNode>, Vec<GraphEdge>, Vec<Option<usize>>) {
    let n = nodes.len();
    let mut reachable = vec![false; n];
    reachable[CFG_ENTRY] = true;
    reachable[CFG_EXIT] = true;
    let mut stack = vec![CFG_ENTRY];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &edges {
        succ[e.src].push(e.dst);
    }
    while let Some(v) = stack.pop() {
        for &w in &succ[v] {
            if !reachable[w] {
                reachable[w] = true;
                stack.push(w);
            }
        }
    }
    if reachable.iter().all(|&r| r) {
        return (nodes, edges, ast_of);
    }
    let mut remap = BTreeMap::new();
    let mut new_nodes = Vec::new();
    let mut new_ast = Vec::new();
    for (i, node) in nodes.into_iter().enumerate() {
        if reachable[i] {
            let new_id = new_nodes.len();
            remap.insert(i, new_id);
            new_nodes.push(GraphNode {
                id: new_id,
                kind_tag: node.kind_tag,
                span: node.span,
            });
            new_ast.push(ast_of[i]);
        }
    }
    let new_edges = edges
        .into_iter()
        .filter(|e| reachable[e.src] && reachable[e.dst])
        .map(|e| GraphEdge {
            src: remap[&e.src],
            dst: remap[&e.dst],
            edge_tag: e.edge_tag,
        })
        .collect();
    (new_nodes, new_edges, new_ast)
}
