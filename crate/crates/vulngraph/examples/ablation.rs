//! Runs the five-variant ablation and the gate-vs-concat comparison on a synthetic corpus.
//!
//! cargo run --release --example ablation -- [files] [epochs]

use vulngraph::fusion::FusionKind;
use vulngraph::pipeline::{self, AblationConfig, CorpusConfig, Split, SplitConfig, TrainConfig};
use vulngraph::semantic::{Embedder, ProviderConfig};

fn main() -> vulngraph::Result<()> {
    let mut args = std::env::args().skip(1);
    let files: usize = args.next().map_or(400, |s| s.parse().expect("file count"));
    let epochs: usize = args.next().map_or(15, |s| s.parse().expect("epoch count"));

    let dir = std::env::temp_dir().join(format!("vulngraph-ablation-{files}"));
    let _ = std::fs::remove_dir_all(&dir);
    pipeline::generate_corpus(
        &dir,
        &CorpusConfig {
            files,
            ..Default::default()
        },
    )?;
    let manifest = pipeline::ingest(&dir, None, &SplitConfig::default())?;
    let base = TrainConfig {
        epochs,
        ..Default::default()
    };
    let embedder = Embedder::from_config(&ProviderConfig::default())?;
    let records = pipeline::load_records(&manifest, &base.encoder, &embedder)?;

    let cfg = AblationConfig {
        base: base.clone(),
        ..Default::default()
    };
    let table = pipeline::ablate(&records, &cfg)?;
    print!("{}", table.to_markdown());
    for r in &table.rows {
        println!("{:<36} {:?}", r.label, r.accuracies);
    }

    let mut concat = base;
    concat.fusion.kind = FusionKind::Concat;
    let mut accs = Vec::new();
    for &seed in &cfg.seeds {
        concat.seed = seed;
        let out = pipeline::train(&records, &concat)?;
        accs.push(pipeline::evaluate_split(&out.model, &records, Split::Val)?.accuracy);
    }
    println!("concat fusion val accuracy {accs:?}");
    Ok(())
}
