use std::collections::HashSet;
use std::fs;
use std::path::Path;

use vulngraph::explain::{self, SaliencyConfig};
use vulngraph::fusion::{ForwardOptions, FusionKind, Sample};
use vulngraph::objectives::laplacian_reg;
use vulngraph::pipeline::{
    self, split_counts, CorpusConfig, FileRecord, Split, SplitConfig, TrainConfig,
};
use vulngraph::semantic::{Embedder, ProviderConfig};
use vulngraph::tensor::Tape;

fn corpus(dir: &Path, files: usize, max_helpers: usize) {
    let cfg = CorpusConfig {
        files,
        seed: 11,
        max_helpers,
    };
    pipeline::generate_corpus(dir, &cfg).unwrap();
}

fn records(dir: &Path, split: &SplitConfig, train: &TrainConfig) -> Vec<FileRecord> {
    let manifest = pipeline::ingest(dir, None, split).unwrap();
    let embedder = Embedder::from_config(&ProviderConfig::default()).unwrap();
    pipeline::load_records(&manifest, &train.encoder, &embedder).unwrap()
}

const ALL_TRAIN: SplitConfig = SplitConfig {
    train: 1.0,
    val: 0.0,
    test: 0.0,
    seed: 0,
};

fn write(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

#[test]
fn separable_toy_fits_training_set() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 20, 0);
    let cfg = TrainConfig {
        epochs: 200,
        patience: 200,
        ..Default::default()
    };
    let recs = records(dir.path(), &ALL_TRAIN, &cfg);
    assert_eq!(recs.len(), 20);
    let out = pipeline::train(&recs, &cfg).unwrap();
    let m = pipeline::evaluate_split(&out.model, &recs, Split::Train).unwrap();
    assert_eq!(m.accuracy, 1.0, "history: {:?}", out.history.last());
}

#[test]
fn same_seed_same_loss_curve() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 40, 1);
    let cfg = TrainConfig {
        epochs: 5,
        ..Default::default()
    };
    let recs = records(dir.path(), &SplitConfig::default(), &cfg);
    let a = pipeline::train(&recs, &cfg).unwrap();
    let b = pipeline::train(&recs, &cfg).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model.params, b.model.params);
    let c = pipeline::train(&recs, &TrainConfig { seed: 8, ..cfg }).unwrap();
    assert_ne!(a.history, c.history);
}

fn mean_laplacian(out: &pipeline::TrainOutcome, recs: &[FileRecord]) -> f64 {
    let mut total = 0.0;
    let mut count = 0;
    for r in recs {
        let batch: Vec<Sample<'_>> = r
            .prepared
            .iter()
            .map(|g| Sample {
                graph: g,
                h_l: &r.h_l,
            })
            .collect();
        let mut tape = Tape::new();
        let opts = ForwardOptions {
            node_level: true,
            track_features: false,
        };
        let fwd = out.model.forward(&mut tape, &batch, opts, None).unwrap();
        let graphs: Vec<_> = fwd
            .node_h
            .iter()
            .zip(&r.prepared)
            .map(|(&h, g)| (h, g.edges.as_slice()))
            .collect();
        let lap = laplacian_reg(&mut tape, &graphs).unwrap();
        total += tape.scalar(lap);
        count += 1;
    }
    total / count as f64
}

#[test]
fn huge_laplacian_weight_collapses_node_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 30, 1);
    let mut cfg = TrainConfig {
        epochs: 15,
        patience: 15,
        ..Default::default()
    };
    cfg.loss.lambda_lap = 0.0;
    let recs = records(dir.path(), &ALL_TRAIN, &cfg);
    let free = mean_laplacian(&pipeline::train(&recs, &cfg).unwrap(), &recs);
    cfg.loss.lambda_lap = 1e6;
    let tied = mean_laplacian(&pipeline::train(&recs, &cfg).unwrap(), &recs);
    assert!(tied < 1e-2 * free, "λ=0: {free:.4e}, λ=1e6: {tied:.4e}");
}

#[test]
fn three_per_class_split_two_one_zero() {
    let cfg = SplitConfig::default();
    assert_eq!(split_counts(3, &cfg), [2, 1, 0]);
    assert_eq!(split_counts(100, &cfg), [70, 15, 15]);
    for n in 0..50 {
        assert_eq!(split_counts(n, &cfg).iter().sum::<usize>(), n);
    }
}

#[test]
fn ingest_dedups_and_counts_unparsable() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let body =
        |name: &str, stmt: &str| format!("class {name} {{ void run(int x) {{ {stmt} }} }}\n");
    for i in 0..3 {
        write(
            &root.join(format!("safe/S{i}.java")),
            &body(&format!("S{i}"), "x = x + 1;"),
        );
        write(
            &root.join(format!("vulnerable/V{i}.java")),
            &body(&format!("V{i}"), "x = x * 2;"),
        );
    }
    // byte-identical copy of S0 and a file with no method body
    write(&root.join("safe/copy/S0.java"), &body("S0", "x = x + 1;"));
    write(
        &root.join("vulnerable/Broken.java"),
        "class Broken { void run( {\n",
    );

    let m = pipeline::ingest(root, None, &SplitConfig::default()).unwrap();
    assert_eq!(m.entries.len(), 6);
    assert_eq!(m.dropped_duplicates, 1);
    assert_eq!(m.dropped_unparsable, 1);
    for label in [0, 1] {
        let per: Vec<usize> = Split::ALL
            .iter()
            .map(|&s| m.split(s).filter(|e| e.label == label).count())
            .collect();
        assert_eq!(per, [2, 1, 0], "label {label}");
    }
}

#[test]
fn splits_are_disjoint_with_no_content_leakage() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 60, 2);
    let m = pipeline::ingest(dir.path(), None, &SplitConfig::default()).unwrap();
    let mut ids = HashSet::new();
    let mut paths = HashSet::new();
    for e in &m.entries {
        assert!(
            ids.insert(e.sample_id.clone()),
            "sample {} appears twice",
            e.sample_id
        );
        assert!(paths.insert(e.path.clone()));
    }
    let again = pipeline::ingest(dir.path(), None, &SplitConfig::default()).unwrap();
    assert_eq!(m, again);
    let round = pipeline::DatasetManifest::from_csv(&m.to_csv()).unwrap();
    assert_eq!(round.entries, m.entries);
}

#[test]
fn labels_file_overrides_directories() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write(&root.join("A.java"), "class A { void f() { return; } }\n");
    write(&root.join("B.java"), "class B { void g(int y) { y++; } }\n");
    let labels = root.join("labels.csv");
    fs::write(&labels, "path,label\nA.java,safe\nB.java,1\n").unwrap();
    let m = pipeline::ingest(root, Some(&labels), &ALL_TRAIN).unwrap();
    let got: Vec<u8> = m.entries.iter().map(|e| e.label).collect();
    assert_eq!(got, [0, 1]);
    assert!(pipeline::ingest(root, None, &ALL_TRAIN).is_err());
}

#[test]
fn ablation_table_has_five_rows() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 40, 1);
    let base = TrainConfig {
        epochs: 3,
        ..Default::default()
    };
    let recs = records(dir.path(), &SplitConfig::default(), &base);
    let cfg = pipeline::AblationConfig {
        base,
        seeds: vec![1, 2],
        split: Split::Val,
    };
    let table = pipeline::ablate(&recs, &cfg).unwrap();
    assert_eq!(table.rows.len(), 5);
    assert!(table.rows.iter().all(|r| r.accuracies.len() == 2));
    let md = table.to_markdown();
    assert_eq!(md.lines().count(), 7);
    assert!(md.starts_with("| Model Variant | Accuracy (%) | Drop By |"));
}

#[test]
fn report_gates_match_forward_and_dot_marks_k_nodes() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 30, 1);
    let cfg = TrainConfig {
        epochs: 3,
        ..Default::default()
    };
    let recs = records(dir.path(), &SplitConfig::default(), &cfg);
    let model = pipeline::train(&recs, &cfg).unwrap().model;
    let sal = SaliencyConfig {
        k: 5,
        steps: 16,
        ..Default::default()
    };
    for r in recs.iter().take(6) {
        let e = explain::report(&model, r, &sal, None, 4000).unwrap();
        let idx = r
            .cfgs
            .iter()
            .position(|g| g.method_name == e.report.method)
            .unwrap();
        let batch = [Sample {
            graph: &r.prepared[idx],
            h_l: &r.h_l,
        }];
        let fwd = model.gate_weights(&batch).unwrap().unwrap();
        let g = e.report.gates.unwrap();
        assert_eq!((g.a_g, g.a_l), fwd[0]);
        let k = 5.min(r.cfgs[idx].nodes.len());
        assert_eq!(e.report.top_nodes.len(), k);
        assert_eq!(e.dot.matches("style=filled").count(), k);
        assert!(e.report.justification.fallback);
        assert!(!e.report.justification.sentence.is_empty());
    }
}

#[test]
fn concat_report_has_null_gates() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 20, 0);
    let mut cfg = TrainConfig {
        epochs: 2,
        ..Default::default()
    };
    cfg.fusion.kind = FusionKind::Concat;
    let recs = records(dir.path(), &SplitConfig::default(), &cfg);
    let model = pipeline::train(&recs, &cfg).unwrap().model;
    let e = explain::report(&model, &recs[0], &SaliencyConfig::default(), None, 4000).unwrap();
    assert!(e.report.gates.is_none());
    let json: serde_json::Value = serde_json::from_str(&e.report.to_json().unwrap()).unwrap();
    assert!(json["gates"].is_null());
    assert!(explain::gate_csv(&model, &recs).unwrap().is_none());
}
