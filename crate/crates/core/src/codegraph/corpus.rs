//! Packaged corpus of small C functions with hand-drawn CFG edge sets.
//!
//! Every entry was worked out on paper against the numbering convention in
//! [`super::cfg`]: entry = 0, exit = 1, statement nodes from 2 in source
//! order (do-while conditions after their body). All functions stay within
//! 12 CFG nodes so the expected sets remain checkable by eye.

/// One annotated function: name, source, and the exact expected CFG edge
/// set (as (src, dst) pairs; tags are not part of the oracle).
pub struct AnnotatedFn {
    pub name: &'static str,
    pub code: &'static str,
    pub cfg_edges: &'static [(usize, usize)],
}

pub const CORPUS: &[AnnotatedFn] = &[
    AnnotatedFn {
        name: "straight_line_two",
        code: "void f(){int a=1; a++;}",
        // 2=decl, 3=a++
        cfg_edges: &[(0, 2), (2, 3), (3, 1)],
    },
    AnnotatedFn {
        name: "single_stmt",
        code: "void f(){int a=0;}",
        cfg_edges: &[(0, 2), (2, 1)],
    },
    AnnotatedFn {
        name: "empty_body",
        code: "void f(){}",
        cfg_edges: &[(0, 1)],
    },
    AnnotatedFn {
        name: "if_no_else",
        code: "void f(int c,int x){if(c) x=1; x=2;}",
        // 2=if, 3=x=1, 4=x=2; both arms converge on 4
        cfg_edges: &[(0, 2), (2, 3), (2, 4), (3, 4), (4, 1)],
    },
    AnnotatedFn {
        name: "if_else",
        code: "void f(int c,int x){if(c) x=1; else x=2;}",
        cfg_edges: &[(0, 2), (2, 3), (2, 4), (3, 1), (4, 1)],
    },
    AnnotatedFn {
        name: "if_else_chain",
        code: "void f(int c,int x){if(c==1) x=1; else if(c==2) x=2; else x=3;}",
        // 2=if1, 3=x=1, 4=if2, 5=x=2, 6=x=3
        cfg_edges: &[
            (0, 2),
            (2, 3),
            (2, 4),
            (4, 5),
            (4, 6),
            (3, 1),
            (5, 1),
            (6, 1),
        ],
    },
    AnnotatedFn {
        name: "if_empty_then",
        code: "void f(int c){if(c){} c=1;}",
        // empty consequence: both if outcomes fall to the next statement
        cfg_edges: &[(0, 2), (2, 3), (3, 1)],
    },
    AnnotatedFn {
        name: "while_loop",
        code: "void f(int n){while(n) n--;}",
        // 2=while header, 3=n--
        cfg_edges: &[(0, 2), (2, 3), (3, 2), (2, 1)],
    },
    AnnotatedFn {
        name: "while_empty_body",
        code: "void f(int n){while(n){}}",
        // empty body loops the header onto itself
        cfg_edges: &[(0, 2), (2, 2), (2, 1)],
    },
    AnnotatedFn {
        name: "for_loop",
        code: "void f(int n){int s=0; for(int i=0;i<n;i++) s+=i;}",
        // 2=decl s, 3=for header (init/cond/update as one node), 4=s+=i
        cfg_edges: &[(0, 2), (2, 3), (3, 4), (4, 3), (3, 1)],
    },
    AnnotatedFn {
        name: "do_while",
        code: "void f(int n){do n--; while(n);}",
        // 2=n-- (body precedes the condition node 3)
        cfg_edges: &[(0, 2), (2, 3), (3, 2), (3, 1)],
    },
    AnnotatedFn {
        name: "do_while_continue",
        code: "void f(int n){do{ if(n==1) continue; n--; }while(n);}",
        // 2=if, 3=continue, 4=n--, 5=cond; continue jumps to the condition
        cfg_edges: &[
            (0, 2),
            (2, 3),
            (2, 4),
            (4, 5),
            (3, 5),
            (5, 2),
            (5, 1),
        ],
    },
    AnnotatedFn {
        name: "do_while_break",
        code: "void f(int n){do{ if(n>9) break; n++; }while(n<3);}",
        // 2=if, 3=break, 4=n++, 5=cond
        cfg_edges: &[
            (0, 2),
            (2, 3),
            (2, 4),
            (4, 5),
            (5, 2),
            (3, 1),
            (5, 1),
        ],
    },
    AnnotatedFn {
        name: "while_break",
        code: "void f(int n){while(n){if(n>2) break; n--;}}",
        // 2=while, 3=if, 4=break, 5=n--
        cfg_edges: &[
            (0, 2),
            (2, 3),
            (3, 4),
            (3, 5),
            (5, 2),
            (4, 1),
            (2, 1),
        ],
    },
    AnnotatedFn {
        name: "while_continue",
        code: "void f(int n){while(n){if(n==2){n--; continue;} n=n-2;}}",
        // 2=while, 3=if, 4=n--, 5=continue, 6=n=n-2
        cfg_edges: &[
            (0, 2),
            (2, 3),
            (3, 4),
            (4, 5),
            (5, 2),
            (3, 6),
            (6, 2),
            (2, 1),
        ],
    },
    AnnotatedFn {
        name: "early_return",
        code: "int f(int a){if(a) return 1; return 0;}",
        // 2=if, 3=return 1, 4=return 0
        cfg_edges: &[(0, 2), (2, 3), (3, 1), (2, 4), (4, 1)],
    },
    AnnotatedFn {
        name: "dead_code_pruned",
        code: "int f(){return 1; int a=2;}",
        // the declaration after return is unreachable and dropped
        cfg_edges: &[(0, 2), (2, 1)],
    },
    AnnotatedFn {
        name: "return_in_loop",
        code: "int f(int n){while(n){if(n==5) return n; n--;} return 0;}",
        // 2=while, 3=if, 4=return n, 5=n--, 6=return 0
        cfg_edges: &[
            (0, 2),
            (2, 3),
            (3, 4),
            (4, 1),
            (3, 5),
            (5, 2),
            (2, 6),
            (6, 1),
        ],
    },
    AnnotatedFn {
        name: "switch_with_default",
        code: "void f(int c,int x){switch(c){case 1: x=1; break; case 2: x=2; break; default: x=3;}}",
        // 2=switch, 3=x=1, 4=break, 5=x=2, 6=break, 7=x=3
        cfg_edges: &[
            (0, 2),
            (2, 3),
            (3, 4),
            (2, 5),
            (5, 6),
            (2, 7),
            (4, 1),
            (6, 1),
            (7, 1),
        ],
    },
    AnnotatedFn {
        name: "switch_fallthrough_no_default",
        code: "void f(int c,int x){switch(c){case 1: x=1; case 2: x=2;}}",
        // 2=switch, 3=x=1, 4=x=2; no default adds a direct switch->out edge
        cfg_edges: &[(0, 2), (2, 3), (3, 4), (2, 4), (4, 1), (2, 1)],
    },
    AnnotatedFn {
        name: "switch_break_in_default",
        code: "void f(int c,int x){switch(c){default: x=9; break;} x=0;}",
        // 2=switch, 3=x=9, 4=break, 5=x=0
        cfg_edges: &[(0, 2), (2, 3), (3, 4), (4, 5), (5, 1)],
    },
    AnnotatedFn {
        name: "nested_loops",
        code: "void f(int n,int m){while(n){while(m) m--; n--;}}",
        // 2=outer while, 3=inner while, 4=m--, 5=n--
        cfg_edges: &[
            (0, 2),
            (2, 3),
            (3, 4),
            (4, 3),
            (3, 5),
            (5, 2),
            (2, 1),
        ],
    },
    AnnotatedFn {
        name: "break_inner_for",
        code: "void f(int n,int m){for(;n;n--){if(m) break; m++;}}",
        // 2=for, 3=if, 4=break, 5=m++; break leaves the for loop
        cfg_edges: &[
            (0, 2),
            (2, 3),
            (3, 4),
            (3, 5),
            (5, 2),
            (4, 1),
            (2, 1),
        ],
    },
    AnnotatedFn {
        name: "for_break_and_continue",
        code: "void f(int n){for(int i=0;i<n;i++){if(i==2) continue; if(i==5) break; n--;}}",
        // 2=for, 3=if1, 4=continue, 5=if2, 6=break, 7=n--
        cfg_edges: &[
            (0, 2),
            (2, 3),
            (3, 4),
            (4, 2),
            (3, 5),
            (5, 6),
            (5, 7),
            (7, 2),
            (6, 1),
            (2, 1),
        ],
    },
    AnnotatedFn {
        name: "goto_straight_line",
        code: "void f(){int a=0; goto L; L: a=1;}",
        // goto degrades to straight-line flow (recorded as unsupported)
        cfg_edges: &[(0, 2), (2, 3), (3, 4), (4, 1)],
    },
];
