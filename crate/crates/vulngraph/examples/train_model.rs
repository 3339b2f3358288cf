//! Generates a synthetic corpus, trains the gated fusion model and reports test metrics.
//!
//! cargo run --release --example train_model -- [files] [epochs]

use std::time::Instant;

use vulngraph::pipeline::{self, CorpusConfig, Split, SplitConfig, TrainConfig};
use vulngraph::semantic::{Embedder, ProviderConfig};

fn main() -> vulngraph::Result<()> {
    let mut args = std::env::args().skip(1);
    let files: usize = args.next().map_or(400, |s| s.parse().expect("file count"));
    let epochs: usize = args.next().map_or(15, |s| s.parse().expect("epoch count"));

    let dir = std::env::temp_dir().join(format!("vulngraph-train-{files}"));
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
    let embedder = Embedder::from_config(&ProviderConfig::default())?;
    let t = Instant::now();
    let records = pipeline::load_records(&manifest, &cfg.encoder, &embedder)?;
    println!("loaded {} files in {:.1?}", records.len(), t.elapsed());

    let t = Instant::now();
    let out = pipeline::train(&records, &cfg)?;
    for r in &out.history {
        println!(
            "epoch {:>3}  loss {:.4}  train acc {:.3}  val acc {:.3}",
            r.epoch,
            r.train_loss,
            r.train_accuracy,
            r.val_accuracy.unwrap_or(f64::NAN)
        );
    }
    println!(
        "trained in {:.1?}; best epoch {}",
        t.elapsed(),
        out.best_epoch
    );
    let m = pipeline::evaluate_split(&out.model, &records, Split::Test)?;
    println!(
        "test accuracy {:.3}  precision {:.3}  recall {:.3}  f1 {:.3}",
        m.accuracy, m.precision, m.recall, m.f1
    );
    Ok(())
}
