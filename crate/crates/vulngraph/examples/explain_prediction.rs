//! Trains a small model, then explains test-set predictions: gate weights,
//! top-K salient nodes, integrated-gradients completeness, justification and DOT.
//!
//! cargo run --release --example explain_prediction -- [files] [epochs]

use vulngraph::explain::{self, SaliencyConfig};
use vulngraph::pipeline::{self, CorpusConfig, Split, SplitConfig, TrainConfig};
use vulngraph::semantic::{Embedder, ProviderConfig};

fn main() -> vulngraph::Result<()> {
    let mut args = std::env::args().skip(1);
    let files: usize = args.next().map_or(200, |s| s.parse().expect("file count"));
    let epochs: usize = args.next().map_or(10, |s| s.parse().expect("epoch count"));

    let dir = std::env::temp_dir().join(format!("vulngraph-explain-{files}"));
    let _ = std::fs::remove_dir_all(&dir);
    pipeline::generate_corpus(
        &dir,
        &CorpusConfig {
            files,
            ..Default::default()
        },
    )?;
    let manifest = pipeline::ingest(&dir, None, &SplitConfig::default())?;
    let cfg = TrainConfig {
        epochs,
        ..Default::default()
    };
    let provider_cfg = ProviderConfig::default();
    let embedder = Embedder::from_config(&provider_cfg)?;
    let records = pipeline::load_records(&manifest, &cfg.encoder, &embedder)?;
    let model = pipeline::train(&records, &cfg)?.model;

    let sal = SaliencyConfig::default();
    let mut worst: f64 = 0.0;
    let mut first = true;
    for r in records.iter().filter(|r| r.split == Split::Test) {
        let e = explain::report(
            &model,
            r,
            &sal,
            Some(embedder.provider()),
            provider_cfg.max_chars,
        )?;
        let gap = e.report.completeness_gap.unwrap_or(0.0);
        worst = worst.max(gap.abs());
        if first {
            println!("{}", e.report.to_json()?);
            println!("{}", e.dot);
            first = false;
        }
    }
    println!("largest integrated-gradients completeness gap over the test split: {worst:.3e}");
    Ok(())
}
