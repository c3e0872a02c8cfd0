//! Reaching-definitions data flow: def/use site extraction per CFG
//! statement, a worklist fixpoint over the CFG, and def-to-use edges.

use std::collections::{BTreeMap, BTreeSet};

use super::cfg::{build_cfg, AstView, CfgResult};
use super::{CodeGraph, GraphEdge, GraphError, GraphKind, GraphNode, CFG_ENTRY};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteKind {
    Def,
    Use,
}

/// One variable definition/modification/use site, attached to the CFG
/// statement node it executes in.
#[derive(Debug, Clone)]
pub struct Site {
    pub cfg_node: usize,
    pub kind: SiteKind,
    pub var: String,
    pub span: (usize, usize),
}

/// CFG plus def/use sites: the shared input of both the dataflow pass and
/// the brute-force path oracle used in tests.
#[derive(Debug, Clone)]
pub struct DefUse {
    pub cfg: CfgResult,
    pub sites: Vec<Site>,
}

impl DefUse {
    /// Last definition per variable within a CFG node (statement-level
    /// last-def-wins) — the gen set.
    pub fn gen_sets(&self) -> BTreeMap<usize, BTreeMap<String, usize>> {
        let mut gen: BTreeMap<usize, BTreeMap<String, usize>> = BTreeMap::new();
        for (i, s) in self.sites.iter().enumerate() {
            if s.kind == SiteKind::Def {
                gen.entry(s.cfg_node).or_default().insert(s.var.clone(), i);
            }
        }
        gen
    }
}

/// Extract def/use sites for every CFG statement of the unit's function.
/// Function parameters register as definitions on the entry node.
pub fn analyze_def_use(ast: &CodeGraph, source: &str) -> Result<DefUse, GraphError> {
    let view = AstView::new(ast)?;
    let cfg = build_cfg(ast)?;
    let mut sites = Vec::new();

    // parameters defined at entry
    if let Some(f) = view.find_kind("function_definition") {
        if let Some(decl) = view.field(f, "declarator") {
            collect_param_defs(&view, decl, source, &mut sites);
        }
    }

    for (cfg_id, ast_id) in cfg.ast_of.iter().enumerate() {
        let Some(ast_id) = *ast_id else { continue };
        let mut uses = Vec::new();
        let mut defs = Vec::new();
        for expr in statement_exprs(&view, ast_id) {
            scan_expr(&view, expr, source, &mut uses, &mut defs);
        }
        for (var, span) in uses {
            sites.push(Site {
                cfg_node: cfg_id,
                kind: SiteKind::Use,
                var,
                span,
            });
        }
        for (var, span) in defs {
            sites.push(Site {
                cfg_node: cfg_id,
                kind: SiteKind::Def,
                var,
                span,
            });
        }
    }
    Ok(DefUse { cfg, sites })
}

fn collect_param_defs(view: &AstView, node: usize, source: &str, sites: &mut Vec<Site>) {
    if view.kind(node) == "parameter_declaration" {
        if let Some(ident) = find_declared_identifier(view, node) {
            let span = view.span(ident);
            sites.push(Site {
                cfg_node: CFG_ENTRY,
                kind: SiteKind::Def,
                var: source[span.0..span.1].to_string(),
                span,
            });
        }
        return;
    }
    for (c, _) in view.children(node) {
        collect_param_defs(view, *c, source, sites);
    }
}

/// Unwrap pointer/array/parenthesized declarators down to the identifier.
fn find_declared_identifier(view: &AstView, node: usize) -> Option<usize> {
    if view.kind(node) == "identifier" {
        return Some(node);
    }
    if let Some(d) = view.field(node, "declarator") {
        return find_declared_identifier(view, d);
    }
    None
}

/// Expression roots owned by a statement node: the condition for branch
/// headers, the full init/cond/update triple for `for`, the expression for
/// everything else. Nested statements belong to their own CFG nodes.
fn statement_exprs(view: &AstView, ast_id: usize) -> Vec<usize> {
    match view.kind(ast_id) {
        "if_statement" | "while_statement" | "switch_statement" | "do_statement" => {
            view.field(ast_id, "condition").into_iter().collect()
        }
        "for_statement" => ["initializer", "condition", "update"]
            .iter()
            .filter_map(|f| view.field(ast_id, f))
            .collect(),
        "return_statement" | "expression_statement" | "declaration" => {
            if view.kind(ast_id) == "declaration" {
                vec![ast_id]
            } else {
                view.children(ast_id).iter().map(|(c, _)| *c).collect()
            }
        }
        _ => Vec::new(),
    }
}

type Found = Vec<(String, (usize, usize))>;

fn ident_text(view: &AstView, id: usize, source: &str) -> (String, (usize, usize)) {
    let span = view.span(id);
    (source[span.0..span.1].to_string(), span)
}

/// Walk an expression (or declaration) collecting variable uses and defs.
/// Only plain-identifier assignment targets count as definitions; writes
/// through pointers, subscripts and fields degrade to uses of the base.
fn scan_expr(view: &AstView, node: usize, source: &str, uses: &mut Found, defs: &mut Found) {
    match view.kind(node) {
        "identifier" => uses.push(ident_text(view, node, source)),
        "declaration" => {
            for (c, field) in view.children(node) {
                if *field == "declarator" {
                    scan_declarator(view, *c, source, uses, defs);
                } else if *field != "type" {
                    scan_expr(view, *c, source, uses, defs);
                }
            }
        }
        "init_declarator" => scan_declarator(view, node, source, uses, defs),
        "assignment_expression" => {
            let left = view.field(node, "left");
            let right = view.field(node, "right");
            if let Some(r) = right {
                scan_expr(view, r, source, uses, defs);
            }
            if let Some(l) = left {
                if view.kind(l) == "identifier" {
                    // compound operators (+=, <<= ...) read before writing
                    if let Some(r) = right {
                        let between = &source[view.span(l).1..view.span(r).0];
                        if between.trim() != "=" {
                            uses.push(ident_text(view, l, source));
                        }
                    }
                    defs.push(ident_text(view, l, source));
                } else {
                    scan_expr(view, l, source, uses, defs);
                }
            }
        }
        "update_expression" => {
            if let Some(arg) = view.field(node, "argument") {
                if view.kind(arg) == "identifier" {
                    uses.push(ident_text(view, arg, source));
                    defs.push(ident_text(view, arg, source));
                } else {
                    scan_expr(view, arg, source, uses, defs);
                }
            }
        }
        "call_expression" => {
            // the callee name is not a variable
            for (c, field) in view.children(node) {
                if *field != "function" || view.kind(*c) != "identifier" {
                    scan_expr(view, *c, source, uses, defs);
                }
            }
        }
        "field_expression" => {
            if let Some(arg) = view.field(node, "argument") {
                scan_expr(view, arg, source, uses, defs);
            }
        }
        "comment" | "string_literal" | "char_literal" | "number_literal" => {}
        _ => {
            for (c, _) in view.children(node) {
                scan_expr(view, *c, source, uses, defs);
            }
        }
    }
}

fn scan_declarator(view: &AstView, node: usize, source: &str, uses: &mut Found, defs: &mut Found) {
    match view.kind(node) {
        "identifier" => defs.push(ident_text(view, node, source)),
        "init_declarator" => {
            if let Some(v) = view.field(node, "value") {
                scan_expr(view, v, source, uses, defs);
            }
            if let Some(d) = view.field(node, "declarator") {
                scan_declarator(view, d, source, uses, defs);
            }
        }
        "array_declarator" => {
            if let Some(size) = view.field(node, "size") {
                scan_expr(view, size, source, uses, defs);
            }
            if let Some(d) = view.field(node, "declarator") {
                scan_declarator(view, d, source, uses, defs);
            }
        }
        _ => {
            if let Some(d) = view.field(node, "declarator") {
                scan_declarator(view, d, source, uses, defs);
            }
        }
    }
}

/// Build the def-to-use graph under reaching-definitions semantics: edge
/// (d, u) when definition d arrives at u's statement along some CFG path
/// with no intervening redefinition of the same variable.
pub fn build_dfg(ast: &CodeGraph, source: &str) -> Result<CodeGraph, GraphError> {
    let du = analyze_def_use(ast, source)?;
    let reaching = reaching_definitions(&du);
    let mut nodes = Vec::with_capacity(du.sites.len());
    for (i, s) in du.sites.iter().enumerate() {
        let kind = match s.kind {
            SiteKind::Def => format!("def:{}", s.var),
            SiteKind::Use => format!("use:{}", s.var),
        };
        nodes.push(GraphNode {
            id: i,
            kind_tag: kind,
            span: s.span,
        });
    }
    let mut edges = Vec::new();
    for (u_idx, site) in du.sites.iter().enumerate() {
        if site.kind != SiteKind::Use {
            continue;
        }
        for &d_idx in &reaching[site.cfg_node] {
            if du.sites[d_idx].var == site.var {
                edges.push(GraphEdge {
                    src: d_idx,
                    dst: u_idx,
                    edge_tag: String::new(),
                });
            }
        }
    }
    edges.sort_by_key(|e| (e.src, e.dst));
    Ok(CodeGraph {
        kind: GraphKind::Dfg,
        nodes,
        edges,
    })
}

/// Worklist fixpoint. Returns, per CFG node, the set of def sites reaching
/// the node's entry (uses read before the node's own defs take effect).
pub fn reaching_definitions(du: &DefUse) -> Vec<BTreeSet<usize>> {
    let n = du.cfg.graph.node_count();
    let gen = du.gen_sets();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &du.cfg.graph.edges {
        preds[e.dst].push(e.src);
    }
    let kill_vars: Vec<BTreeSet<&str>> = (0..n)
        .map(|i| {
            gen.get(&i)
                .map(|m| m.keys().map(|k| k.as_str()).collect())
                .unwrap_or_default()
        })
        .collect();
    let out_of = |in_set: &BTreeSet<usize>, node: usize, du: &DefUse| -> BTreeSet<usize> {
        let mut out: BTreeSet<usize> = in_set
            .iter()
            .filter(|&&d| !kill_vars[node].contains(du.sites[d].var.as_str()))
            .copied()
            .collect();
        if let Some(g) = gen.get(&node) {
            out.extend(g.values().copied());
        }
        out
    };
    let mut ins: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut outs: Vec<BTreeSet<usize>> = (0..n).map(|i| out_of(&ins[i], i, du)).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            let mut new_in = BTreeSet::new();
            for &p in &preds[i] {
                new_in.extend(outs[p].iter().copied());
            }
            if new_in != ins[i] {
                ins[i] = new_in;
                let new_out = out_of(&ins[i], i, du);
                if new_out != outs[i] {
                    outs[i] = new_out;
                }
                changed = true;
            }
        }
    }
    ins
}
