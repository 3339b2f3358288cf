//! Hand-traced CFGs for small Java methods.

use vulngraph::java::{
    cfg_stats, from_dot, parse_and_build, parse_and_build_with, to_dot, CfgOptions,
    ControlFlowGraph, NodeKind, SourceUnit,
};

fn build(src: &str) -> Vec<ControlFlowGraph> {
    let unit = SourceUnit::new("Snippet.java", src).unwrap();
    parse_and_build(&unit).unwrap()
}

fn single(src: &str) -> ControlFlowGraph {
    let mut gs = build(src);
    assert_eq!(gs.len(), 1, "expected exactly one method");
    gs.remove(0)
}

mod common;
use common::golden::CASES;

fn check(src: &str, nodes: &[(NodeKind, &str)], edges: &[(usize, usize)]) {
    let g = single(src);
    let got: Vec<(NodeKind, &str)> = g.nodes.iter().map(|n| (n.kind, n.label.as_str())).collect();
    assert_eq!(got, nodes, "nodes for {src}");
    let mut want = edges.to_vec();
    want.sort_unstable();
    assert_eq!(g.edges, want, "edges for {src}");
}

macro_rules! golden {
    ($($name:ident),* $(,)?) => {$(
        #[test]
        fn $name() {
            let c = CASES.iter().find(|c| c.name == stringify!($name)).expect("case exists");
            check(c.src, c.nodes, c.edges);
        }
    )*};
}

golden!(
    empty_body,
    single_return,
    if_else_diamond_into_return,
    while_loop_back_edge,
    if_without_else_falls_through,
    early_return,
    classic_for_loop,
    for_each_loop,
    do_while_loop,
    try_catch_edges_from_try_entry,
    try_catch_finally,
    break_and_continue,
    switch_with_fallthrough_and_default,
    arrow_switch_without_default,
    throw_goes_to_exit,
    labeled_break_leaves_outer_loop,
    try_with_resources_and_return,
    lambda_is_an_opaque_statement,
    empty_then_branch_is_demoted,
);

#[test]
fn one_cfg_per_method() {
    let gs = build("class A { void f(){} int g(){return 0;} }");
    let names: Vec<_> = gs.iter().map(|g| g.method_name.as_str()).collect();
    assert_eq!(names, ["f", "g"]);
    assert!(gs.iter().all(|g| g.sample_id == gs[0].sample_id));
}

#[test]
fn stats_examples() {
    let s = cfg_stats(&single("void f(){}"));
    assert_eq!(
        (s.node_count, s.edge_count, s.max_out_degree, s.has_cycle),
        (2, 1, 1, false)
    );
    let s = cfg_stats(&single("int f(int x){if(x>0){x=1;}else{x=2;}return x;}"));
    assert_eq!(
        (s.node_count, s.edge_count, s.max_out_degree, s.has_cycle),
        (6, 6, 2, false)
    );
    assert!(cfg_stats(&single("void f(int x){while(x){x--;}}")).has_cycle);
}

#[test]
fn spans_are_line_numbers() {
    let g = single("int f(int x) {\n  if (x > 0) {\n    x = 1;\n  }\n  return x;\n}\n");
    assert_eq!(g.nodes[1].span, (2, 2));
    assert_eq!(g.nodes[2].span, (3, 3));
    assert_eq!(g.nodes[3].span, (5, 5));
    assert_eq!(g.nodes[4].span, (6, 6));
}

#[test]
fn long_labels_are_truncated() {
    let call = format!("g(\"{}\");", "a".repeat(300));
    let g = single(&format!("void f(){{{call}}}"));
    assert_eq!(g.nodes[1].label.chars().count(), 120);
}

#[test]
fn invalid_syntax_is_a_parse_error() {
    let unit = SourceUnit::new("Bad.java", "void f() { if (x { } }").unwrap();
    assert!(parse_and_build(&unit).is_err());
    let unit = SourceUnit::new("Bad.java", "void f() { break; }").unwrap();
    assert!(parse_and_build(&unit).is_err());
}

#[test]
fn basic_block_merging_collapses_chains() {
    let unit = SourceUnit::new("M.java", "void f(){a();b();c();if(x){d();}e();}").unwrap();
    let g = parse_and_build_with(
        &unit,
        CfgOptions {
            merge_basic_blocks: true,
        },
    )
    .unwrap()
    .remove(0);
    let labels: Vec<_> = g.nodes.iter().map(|n| n.label.as_str()).collect();
    assert_eq!(labels, ["", "a(); b(); c();", "if(x)", "d();", "e();", ""]);
    assert_eq!(
        g.edges,
        vec![(0, 1), (1, 2), (2, 3), (2, 4), (3, 4), (4, 5)]
    );
}

#[test]
fn dot_round_trip_preserves_edges() {
    let g = single("void f(int n){while(n>0){if(n==5){break;}n--;}}");
    let parsed = from_dot(&to_dot(&g)).unwrap();
    assert_eq!(parsed.edges, g.edges);
    assert_eq!(parsed.nodes.len(), g.nodes.len());
}

#[test]
fn construction_is_deterministic() {
    let src = "class A { int f(int[] a){int s=0;for(int v : a){if(v>0){s+=v;}else{continue;}}return s;} }";
    assert_eq!(build(src), build(src));
}
