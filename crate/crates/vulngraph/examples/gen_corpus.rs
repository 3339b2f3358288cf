//! Writes the synthetic labeled corpus and prints one safe/vulnerable pair.
//!
//! cargo run --example gen_corpus -- [out_dir] [files]

use vulngraph::pipeline::{generate_corpus, generate_files, CorpusConfig};

fn main() -> vulngraph::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args
        .next()
        .map_or_else(|| std::env::temp_dir().join("vulngraph-corpus"), Into::into);
    let files = args.next().map_or(40, |s| s.parse().expect("file count"));
    let cfg = CorpusConfig {
        files,
        ..Default::default()
    };
    let summary = generate_corpus(&out, &cfg)?;
    println!(
        "{} safe and {} vulnerable files under {}",
        summary.safe,
        summary.vulnerable,
        out.display()
    );

    let all = generate_files(&cfg);
    for label in [0, 1] {
        if let Some(f) = all.iter().find(|f| f.label == label) {
            println!(
                "--- {} ({:?}, label {label}) ---\n{}",
                f.class_name, f.idiom, f.source
            );
        }
    }
    Ok(())
}
