//! Randomized invariants across the CFG builder, graph matrices, autodiff
//! primitives, losses, fusion and encoders.

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vulngraph::encoders::{self, EncoderConfig, EncoderKind, FeaturizerKind, NodeFeatures};
use vulngraph::fusion::{gate_scores, gate_weights, GateParams};
use vulngraph::graph::{matrices_from_edges, walks_on_edges, WalkConfig};
use vulngraph::java::{from_dot, parse_and_build, to_dot, ControlFlowGraph, NodeKind, SourceUnit};
use vulngraph::objectives::{edge_sum, info_nce};
use vulngraph::tensor::{xavier_uniform, Matrix, ParamStore, Tape, NORM_EPS};

fn stmt(depth: u32) -> BoxedStrategy<String> {
    let leaf = prop_oneof![
        Just("x = x + 1;".to_string()),
        Just("call(x);".to_string()),
        Just("int y = x * 2;".to_string()),
        Just("return x;".to_string()),
        Just("throw new IllegalStateException();".to_string()),
    ];
    if depth == 0 {
        return leaf.boxed();
    }
    let body = || prop::collection::vec(stmt(depth - 1), 0..3).prop_map(|v| v.join(" "));
    prop_oneof![
        3 => leaf,
        1 => (body(), prop::option::of(body())).prop_map(|(t, e)| match e {
            Some(e) => format!("if (x > 0) {{ {t} }} else {{ {e} }}"),
            None => format!("if (x > 0) {{ {t} }}"),
        }),
        1 => body().prop_map(|b| format!("while (x < 10) {{ {b} }}")),
        1 => body().prop_map(|b| format!("for (int i = 0; i < x; i++) {{ {b} }}")),
        1 => body().prop_map(|b| format!("do {{ {b} }} while (x > 3);")),
        1 => (body(), body()).prop_map(|(t, c)| format!("try {{ {t} }} catch (Exception e) {{ {c} }}")),
        1 => (body(), body()).prop_map(|(t, f)| format!("try {{ {t} }} finally {{ {f} }}")),
    ]
    .boxed()
}

fn java_method() -> impl Strategy<Value = String> {
    prop::collection::vec(stmt(2), 0..5)
        .prop_map(|body| format!("class C {{ int f(int x) {{ {} }} }}", body.join(" ")))
}

fn cfg_of(src: &str) -> ControlFlowGraph {
    let unit = SourceUnit::new("C.java", src).unwrap();
    let mut gs = parse_and_build(&unit).unwrap_or_else(|e| panic!("{e}\n{src}"));
    assert_eq!(gs.len(), 1);
    gs.remove(0)
}

/// Directed graph on `n ≤ 8` nodes.
fn graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=8).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..(2 * n))))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0f64..3.0, rows * cols)
        .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn cfg_structural_invariants(src in java_method()) {
        let g = cfg_of(&src);
        prop_assert_eq!(g.in_degree(g.entry()), 0);
        prop_assert_eq!(g.out_degree(g.exit()), 0);
        for n in &g.nodes {
            match n.kind {
                NodeKind::Exit => {}
                NodeKind::Branch | NodeKind::LoopHeader => prop_assert!(g.out_degree(n.id) >= 2, "{:?} in {}", n, src),
                _ => prop_assert!(g.out_degree(n.id) >= 1, "{:?} in {}", n, src),
            }
        }
        for &(u, v) in &g.edges {
            prop_assert!(u < g.len() && v < g.len());
        }
    }

    #[test]
    fn cfg_is_deterministic_and_dot_round_trips(src in java_method()) {
        let a = cfg_of(&src);
        let b = cfg_of(&src);
        prop_assert_eq!(&a, &b);
        let back = from_dot(&to_dot(&a)).unwrap();
        prop_assert_eq!(back.edges, a.edges.clone());
    }

    #[test]
    fn laplacian_rows_sum_to_zero((n, edges) in graph()) {
        let m = matrices_from_edges(n, &edges);
        for row in m.laplacian.rows() {
            prop_assert_eq!(row.sum(), 0.0);
        }
    }

    #[test]
    fn walks_index_valid_nodes((n, edges) in graph(), seed in 0u64..1000, p in 0.25f64..4.0, q in 0.25f64..4.0) {
        let cfg = WalkConfig { walk_length: 6, walks_per_node: 2, p, q, seed };
        for walk in walks_on_edges(n, &edges, &cfg).unwrap() {
            prop_assert!(!walk.is_empty() && walk.len() <= 6);
            prop_assert!(walk.iter().all(|&v| v < n));
        }
    }

    #[test]
    fn softmax_rows_sum_to_one_and_ignore_shifts(x in matrix(3, 5), c in -50.0f64..50.0) {
        let mut t = Tape::new();
        let a = t.constant(x.clone());
        let s = t.softmax_rows(a);
        let b = t.constant(x.mapv(|v| v + c));
        let s2 = t.softmax_rows(b);
        for (r, r2) in t.value(s).rows().into_iter().zip(t.value(s2).rows()) {
            prop_assert!((r.sum() - 1.0).abs() <= 1e-12);
            for (p, q) in r.iter().zip(r2.iter()) {
                prop_assert!((p - q).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn l2_normalized_rows_have_unit_norm(x in matrix(4, 6)) {
        let mut t = Tape::new();
        let a = t.constant(x.clone());
        let y = t.l2_normalize_rows(a, NORM_EPS);
        for (row, orig) in t.value(y).rows().into_iter().zip(x.rows()) {
            // the measured norm carries its own rounding of a few ulps
            let norm = row.dot(&row).sqrt();
            if orig.iter().any(|&v| v != 0.0) {
                prop_assert!((1.0 - 1e-9..=1.0 + 4.0 * f64::EPSILON).contains(&norm), "norm {}", norm);
            }
        }
    }

    #[test]
    fn zero_rows_stay_zero(cols in 1usize..8) {
        let mut t = Tape::new();
        let a = t.constant(Matrix::zeros((1, cols)));
        let y = t.l2_normalize_rows(a, NORM_EPS);
        prop_assert!(t.value(y).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_term_ignores_translation((n, edges) in graph(), h in matrix(8, 3), shift in matrix(1, 3)) {
        let h = h.slice(ndarray::s![..n, ..]).to_owned();
        let moved = &h + &shift;
        let mut t = Tape::new();
        let a = t.constant(h);
        let b = t.constant(moved);
        let ea = edge_sum(&mut t, a, &edges).unwrap();
        let eb = edge_sum(&mut t, b, &edges).unwrap();
        prop_assert!((t.scalar(ea) - t.scalar(eb)).abs() <= 1e-9 * (1.0 + t.scalar(ea)));
    }

    #[test]
    fn info_nce_bounds_and_row_shift(g in matrix(4, 3), l in matrix(4, 3), tau in 0.05f64..2.0) {
        let mut t = Tape::new();
        let gv = t.constant(g.clone());
        let lv = t.constant(l.clone());
        let gn = t.l2_normalize_rows(gv, NORM_EPS);
        let ln = t.l2_normalize_rows(lv, NORM_EPS);
        let loss = info_nce(&mut t, gn, ln, tau).unwrap();
        let v = t.scalar(loss);
        prop_assert!(v >= 0.0);

        // A common shift of every similarity in row i is a common shift of the
        // logits, which the row softmax ignores.
        let sims = t.value(gn).dot(&t.value(ln).t()) / tau;
        let shifted = &sims + &Array2::from_shape_fn((4, 1), |(i, _)| i as f64 * 3.0);
        let nll = |s: &Matrix| -> f64 {
            s.rows().into_iter().enumerate().map(|(i, r)| {
                let m = r.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let lse = m + r.iter().map(|&x| (x - m).exp()).sum::<f64>().ln();
                lse - r[i]
            }).sum::<f64>() / s.nrows() as f64
        };
        prop_assert!((nll(&sims) - v).abs() <= 1e-9);
        prop_assert!((nll(&shifted) - v).abs() <= 1e-9);
    }

    #[test]
    fn gate_weights_form_a_distribution_and_ignore_shifts(seed in 0u64..500, g in matrix(2, 4), l in matrix(2, 4), c in -20.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        for (name, r, k) in [("fuse.gate.w_e", 8, 4), ("fuse.gate.b_e", 1, 4), ("fuse.gate.w_e2", 8, 4), ("fuse.gate.b_e2", 1, 4), ("fuse.gate.v", 4, 1)] {
            store.insert(name, xavier_uniform(&mut rng, r, k));
        }
        let mut t = Tape::new();
        let p = GateParams::bind(&mut t, &store).unwrap();
        let gv = t.constant(g);
        let lv = t.constant(l);
        let e = gate_scores(&mut t, p, gv, lv).unwrap();
        let a = gate_weights(&mut t, e).unwrap();
        let shifted = t.constant(t.value(e).mapv(|v| v + c));
        let a2 = gate_weights(&mut t, shifted).unwrap();
        for (r, r2) in t.value(a).rows().into_iter().zip(t.value(a2).rows()) {
            prop_assert!(r[0] > 0.0 && r[1] > 0.0);
            prop_assert_eq!(r[0] + r[1], 1.0);
            prop_assert!((r[0] - r2[0]).abs() <= 1e-12);
        }
    }

    #[test]
    fn pooled_embedding_is_permutation_invariant(
        (n, edges) in graph(),
        perm_seed in 0u64..1000,
        kind in prop_oneof![Just(EncoderKind::Gcn), Just(EncoderKind::Gat), Just(EncoderKind::Sage)],
    ) {
        use rand::seq::SliceRandom;
        let cfg = EncoderConfig { kind, layers: 2, hidden: 8, d_g: 6, heads: 2, d_in: 5, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
        let x = xavier_uniform(&mut rng, n, 5);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let px = Array2::from_shape_fn((n, 5), |(i, j)| x[[perm[i], j]]);
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let pedges: Vec<(usize, usize)> = edges.iter().map(|&(u, v)| (inv[u], inv[v])).collect();

        let mut store = ParamStore::new();
        encoders::init_params(&mut store, &cfg, 5, &mut rng).unwrap();
        let pooled = |x: Matrix, edges: &[(usize, usize)]| {
            let g = synthetic_graph(n, edges);
            let pg = encoders::prepare(&g, &cfg, NodeFeatures { matrix: x, featurizer: FeaturizerKind::HashedBagOfTokens }).unwrap();
            let mut t = Tape::new();
            let v = encoders::encode_graph(&mut t, &store, &cfg, &pg).unwrap();
            t.value(v).clone()
        };
        let a = pooled(x, &edges);
        let b = pooled(px, &pedges);
        for (p, q) in a.iter().zip(b.iter()) {
            prop_assert!((p - q).abs() <= 1e-12, "{} vs {}", p, q);
        }
    }
}

/// A bare graph with the given edges, for encoder-level checks.
fn synthetic_graph(n: usize, edges: &[(usize, usize)]) -> ControlFlowGraph {
    let mut e: Vec<(usize, usize)> = edges.to_vec();
    e.sort_unstable();
    e.dedup();
    ControlFlowGraph {
        sample_id: "synthetic".into(),
        path: "synthetic".into(),
        method_name: "m".into(),
        nodes: (0..n)
            .map(|id| vulngraph::java::CfgNode {
                id,
                kind: NodeKind::Statement,
                label: format!("s{id}"),
                span: (1, 1),
            })
            .collect(),
        edges: e,
    }
}
