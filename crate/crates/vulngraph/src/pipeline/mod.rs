//! Dataset ingestion, training, evaluation and ablations.

pub mod ablate;
pub mod corpus;
pub mod dataset;
pub mod metrics;
pub mod train;

use std::path::PathBuf;

use rayon::prelude::*;

pub use ablate::{ablate, AblationConfig, AblationRow, AblationTable, Variant};
pub use corpus::{
    generate_corpus, generate_files, CorpusConfig, CorpusSummary, GeneratedFile, Idiom,
};
pub use dataset::{
    ingest, read_labels, split_counts, DatasetManifest, ManifestEntry, Split, SplitConfig,
};
pub use metrics::{CalibrationBin, Metrics};
pub use train::{
    evaluate, evaluate_split, file_scores, history_jsonl, train, EpochRecord, TrainConfig,
    TrainOutcome,
};

use crate::encoders::{
    featurize_with, prepare, prepare_hashed, EncoderConfig, FeaturizerKind, PreparedGraph,
};
use crate::error::{Error, Result};
use crate::java::{parse_and_build, ControlFlowGraph, SourceUnit};
use crate::semantic::Embedder;

/// A manifest entry with its parsed methods and file-level embedding.
#[derive(Debug, Clone)]
pub struct FileRecord {
    pub sample_id: String,
    pub path: PathBuf,
    pub label: u8,
    pub split: Split,
    pub source: String,
    pub cfgs: Vec<ControlFlowGraph>,
    pub prepared: Vec<PreparedGraph>,
    pub h_l: Vec<f64>,
}

/// Parses one source file and embeds it.
pub fn load_record(
    entry: &ManifestEntry,
    enc: &EncoderConfig,
    embedder: &Embedder,
) -> Result<FileRecord> {
    let unit = SourceUnit::read(&entry.path)?;
    let cfgs = parse_and_build(&unit).map_err(Error::Parse)?;
    if cfgs.is_empty() {
        return Err(Error::format(
            "source",
            format!("{} has no method bodies", entry.path.display()),
        ));
    }
    let prepared = cfgs
        .iter()
        .map(|g| match enc.featurizer {
            FeaturizerKind::HashedBagOfTokens => prepare_hashed(g, enc),
            FeaturizerKind::SemanticPerNode => {
                let x = featurize_with(g, |label| {
                    let id = format!("{}#{}", g.sample_id, crate::java::content_hash(label));
                    Ok(embedder.embed(label, &id)?.vector)
                })?;
                prepare(g, enc, x)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let h_l = embedder.embed(&unit.text, &entry.sample_id)?.vector;
    Ok(FileRecord {
        sample_id: entry.sample_id.clone(),
        path: entry.path.clone(),
        label: entry.label,
        split: entry.split,
        source: unit.text,
        cfgs,
        prepared,
        h_l,
    })
}

/// Loads every manifest entry in parallel, keeping manifest order.
pub fn load_records(
    manifest: &DatasetManifest,
    enc: &EncoderConfig,
    embedder: &Embedder,
) -> Result<Vec<FileRecord>> {
    enc.validate()?;
    manifest
        .entries
        .par_iter()
        .map(|e| load_record(e, enc, embedder))
        .collect()
}
