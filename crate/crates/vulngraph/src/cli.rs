//! Command-line front end for the `vulngraph` binary.
//!
//! Every command writes into a run directory (`--out`), refuses to reuse a
//! non-empty one without `--force`, and records the resolved configuration as
//! `config.toml` there. Settings resolve as flags, then `--config` file, then defaults.
//!
//! File formats:
//!
//! * manifest: CSV `path,label,sample_id,split` (label 0 = safe, 1 = vulnerable)
//! * labels input: CSV `path,label` relative to the corpus root, or JSON lines
//!   `{"path": .., "label": ..}`; labels may be `0`/`1` or `safe`/`vulnerable`
//! * embeddings: `embeddings.vgec`, little-endian `b"VGEC"`, u32 version 1,
//!   u32 dims, u64 count, then per record u16 id length, UTF-8 id, dims × f64
//! * checkpoint: `model.vgck`, little-endian `b"VGCK"`, u32 version 1, u32
//!   config length, JSON model config, u32 tensor count, then per tensor in
//!   name order u16 name length, name, u32 rows, u32 cols, row-major f64
//! * history: `history.jsonl`, one JSON object per epoch
//! * metrics: CSV `metric,value`
//! * explanations: `<name>.json` (report version 1) and `<name>.dot`, salient
//!   nodes drawn with `style=filled`

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::cache::EmbeddingCache;
use crate::encoders::{EncoderKind, FeaturizerKind};
use crate::error::{Error, Result};
use crate::explain::{self, SaliencyConfig, SaliencyMethod};
use crate::fusion::{read_checkpoint, write_checkpoint, FusionKind, Model};
use crate::graph::Neighborhood;
use crate::java::{parse_and_build_with, to_dot, to_json, CfgOptions, SourceUnit};
use crate::pipeline::{
    self, dataset::java_files, AblationConfig, CorpusConfig, DatasetManifest, FileRecord, Split,
    SplitConfig, TrainConfig,
};
use crate::semantic::{zero_shot_classify, Embedder, ProviderConfig, ZeroShotTally};

/// Every setting a run can use.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub paths: Paths,
    pub provider: ProviderConfig,
    pub split: SplitConfig,
    pub train: TrainConfig,
    pub saliency: SaliencyConfig,
    pub ablation: AblationSettings,
    pub corpus: CorpusConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationSettings {
    pub seeds: Vec<u64>,
    pub split: Split,
    /// Also train concat fusion under the same seeds.
    pub compare_concat: bool,
}

impl Default for AblationSettings {
    fn default() -> Self {
        let d = AblationConfig::default();
        Self {
            seeds: d.seeds,
            split: d.split,
            compare_concat: true,
        }
    }
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "vulngraph",
    version,
    about = "Graph and LLM-embedding fusion for Java vulnerability detection"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory for all outputs.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overwrite a non-empty run directory.
    #[arg(long, global = true)]
    pub force: bool,
    /// Threads for parallel sections (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Embedding/generation endpoint: `stub`, `file:<cache.vgec>` or `http://host:port`.
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    /// Model name sent to the endpoint.
    #[arg(long, global = true)]
    pub model_name: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// Corpus root containing `.java` files.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Labels file (`path,label` CSV or JSON lines); defaults to `safe/` and `vulnerable/` directories.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Existing manifest CSV; skips ingestion.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Split seed.
    #[arg(long)]
    pub split_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CfgFormat {
    Dot,
    Json,
    Both,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// gcn, gat, sage or node2vec.
    #[arg(long)]
    pub encoder: Option<EncoderKind>,
    /// concat, gate or cross-attention.
    #[arg(long)]
    pub fusion: Option<FusionKind>,
    #[arg(long)]
    pub lambda_nce: Option<f64>,
    #[arg(long)]
    pub lambda_lap: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Aggregate over in-neighbors only instead of the symmetrized graph.
    #[arg(long)]
    pub directed: bool,
    /// Node features from the semantic provider instead of hashed tokens.
    #[arg(long)]
    pub semantic_features: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse Java sources and export one CFG per method.
    ExtractCfg {
        /// A `.java` file or a directory.
        input: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        format: CfgFormat,
        /// Collapse straight-line statements into basic blocks.
        #[arg(long)]
        merge_blocks: bool,
    },
    /// Embed every corpus file and write an embedding cache.
    Embed {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train a fusion model; writes checkpoint, history and metrics.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Score a checkpoint on one split.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Train the five ablation variants over several seeds.
    Ablate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Explain predictions: gates, salient nodes, justification, DOT.
    Explain {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Files to explain; defaults to the test split.
        #[arg(long = "file")]
        files: Vec<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        /// input-gradient or integrated-gradients.
        #[arg(long)]
        method: Option<SaliencyMethod>,
        #[arg(long)]
        steps: Option<usize>,
        /// At most this many default files.
        #[arg(long, default_value_t = 20)]
        limit: usize,
    },
    /// Ask the endpoint for a label without training.
    ZeroShot {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Write the synthetic labeled Java corpus.
    GenCorpus {
        #[arg(long)]
        files: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Output directory guard: creates `dir`, refusing a non-empty one unless `force`.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .next()
            .is_some();
        if non_empty && !force {
            return Err(Error::Config(format!(
                "{} is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, contents).map_err(|e| Error::io(&p, e))
}

fn resolve(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    cfg.provider = cfg.provider.with_env_override();
    if let Some(e) = &global.endpoint {
        cfg.provider.endpoint = e.clone();
    }
    if let Some(m) = &global.model_name {
        cfg.provider.model_name = m.clone();
    }
    if let Some(o) = &global.out {
        cfg.paths.out = Some(o.clone());
    }
    Ok(cfg)
}

fn apply_data(cfg: &mut RunConfig, d: &DataArgs) {
    if let Some(c) = &d.corpus {
        cfg.paths.corpus = Some(c.clone());
    }
    if let Some(l) = &d.labels {
        cfg.paths.labels = Some(l.clone());
    }
    if let Some(m) = &d.manifest {
        cfg.paths.manifest = Some(m.clone());
    }
    if let Some(s) = d.split_seed {
        cfg.split.seed = s;
    }
}

fn apply_model(cfg: &mut TrainConfig, m: &ModelArgs) {
    if let Some(v) = m.seed {
        cfg.seed = v;
    }
    if let Some(v) = m.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = m.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = m.lr {
        cfg.adam.lr = v;
    }
    if let Some(v) = m.patience {
        cfg.patience = v;
    }
    if let Some(v) = m.encoder {
        cfg.encoder.kind = v;
    }
    if let Some(v) = m.fusion {
        cfg.fusion.kind = v;
    }
    if let Some(v) = m.lambda_nce {
        cfg.loss.lambda_nce = v;
    }
    if let Some(v) = m.lambda_lap {
        cfg.loss.lambda_lap = v;
    }
    if let Some(v) = m.tau {
        cfg.loss.tau = v;
    }
    if m.directed {
        cfg.encoder.neighborhood = Neighborhood::Incoming;
    }
    if m.semantic_features {
        cfg.encoder.featurizer = FeaturizerKind::SemanticPerNode;
    }
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.paths
        .out
        .clone()
        .ok_or_else(|| Error::Config("--out is required".into()))
}

fn manifest(cfg: &RunConfig) -> Result<DatasetManifest> {
    if let Some(m) = &cfg.paths.manifest {
        return DatasetManifest::read(m);
    }
    let root = cfg
        .paths
        .corpus
        .as_deref()
        .ok_or_else(|| Error::Config("--corpus or --manifest is required".into()))?;
    pipeline::ingest(root, cfg.paths.labels.as_deref(), &cfg.split)
}

fn checkpoint(cfg: &RunConfig) -> Result<Model> {
    let p = cfg
        .paths
        .checkpoint
        .as_deref()
        .ok_or_else(|| Error::Config("--checkpoint is required".into()))?;
    read_checkpoint(p)
}

fn load(
    cfg: &RunConfig,
    manifest: &DatasetManifest,
    train: &TrainConfig,
) -> Result<(Embedder, Vec<FileRecord>)> {
    let embedder = Embedder::from_config(&cfg.provider)?;
    let records = pipeline::load_records(manifest, &train.encoder, &embedder)?;
    Ok((embedder, records))
}

/// Parses arguments, sets up logging and the thread pool, and runs the command.
pub fn main_with_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::parse_from(args);
    let threads = cli.global.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| run(cli))
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve(&cli.global)?;
    let force = cli.global.force;
    match cli.command {
        Command::GenCorpus { files, seed } => {
            if let Some(f) = files {
                cfg.corpus.files = f;
            }
            if let Some(s) = seed {
                cfg.corpus.seed = s;
            }
            let out = out_dir(&cfg)?;
            prepare_out_dir(&out, force)?;
            let s = pipeline::generate_corpus(&out, &cfg.corpus)?;
            write(&out, "config.toml", cfg.to_toml()?)?;
            println!(
                "wrote {} safe and {} vulnerable files to {}",
                s.safe,
                s.vulnerable,
                out.display()
            );
        }
        Command::ExtractCfg {
            input,
            format,
            merge_blocks,
        } => {
            let out = out_dir(&cfg)?;
            prepare_out_dir(&out, force)?;
            let files = if input.is_dir() {
                java_files(&input)?
            } else {
                vec![input.clone()]
            };
            let opts = CfgOptions {
                merge_basic_blocks: merge_blocks,
            };
            let mut count = 0;
            for f in &files {
                let unit = SourceUnit::read(f)?;
                let graphs = match parse_and_build_with(&unit, opts) {
                    Ok(g) => g,
                    Err(e) => {
                        log::warn!("sample_id={} {}: {e}", unit.sample_id, f.display());
                        continue;
                    }
                };
                let stem = f
                    .file_stem()
                    .map_or("source".into(), |s| s.to_string_lossy().into_owned());
                for (i, g) in graphs.iter().enumerate() {
                    let name = format!("{stem}.{i}.{}", g.method_name);
                    if matches!(format, CfgFormat::Dot | CfgFormat::Both) {
                        write(&out, &format!("{name}.dot"), to_dot(g))?;
                    }
                    if matches!(format, CfgFormat::Json | CfgFormat::Both) {
                        write(&out, &format!("{name}.json"), to_json(g))?;
                    }
                    count += 1;
                }
            }
            write(&out, "config.toml", cfg.to_toml()?)?;
            println!("exported {count} method CFGs from {} files", files.len());
        }
        Command::Embed { data } => {
            apply_data(&mut cfg, &data);
            let out = out_dir(&cfg)?;
            prepare_out_dir(&out, force)?;
            let m = manifest(&cfg)?;
            let embedder = Embedder::from_config(&cfg.provider)?;
            use rayon::prelude::*;
            m.entries
                .par_iter()
                .map(|e| {
                    let unit = SourceUnit::read(&e.path)?;
                    embedder.embed(&unit.text, &e.sample_id).map(|_| ())
                })
                .collect::<Result<Vec<_>>>()?;
            let cache: EmbeddingCache = embedder.snapshot();
            cache.write(&out.join("embeddings.vgec"))?;
            write(&out, "embeddings.csv", cache.to_csv())?;
            write(&out, "manifest.csv", m.to_csv())?;
            write(&out, "config.toml", cfg.to_toml()?)?;
            println!(
                "embedded {} files with {} (d_L = {:?})",
                cache.len(),
                embedder.model_name(),
                cache.dims()
            );
        }
        Command::Train { data, model } => {
            apply_data(&mut cfg, &data);
            apply_model(&mut cfg.train, &model);
            let out = out_dir(&cfg)?;
            prepare_out_dir(&out, force)?;
            let m = manifest(&cfg)?;
            let (_, records) = load(&cfg, &m, &cfg.train)?;
            let outcome = pipeline::train(&records, &cfg.train)?;
            write_checkpoint(&out.join("model.vgck"), &outcome.model)?;
            write(
                &out,
                "history.jsonl",
                pipeline::history_jsonl(&outcome.history)?,
            )?;
            for s in [Split::Val, Split::Test] {
                let metrics = pipeline::evaluate_split(&outcome.model, &records, s)?;
                write(&out, &format!("metrics_{}.csv", s.name()), metrics.to_csv())?;
                println!(
                    "{} accuracy {:.4}  f1 {:.4}",
                    s.name(),
                    metrics.accuracy,
                    metrics.f1
                );
            }
            write(&out, "manifest.csv", m.to_csv())?;
            cfg.paths.checkpoint = Some(out.join("model.vgck"));
            write(&out, "config.toml", cfg.to_toml()?)?;
            println!(
                "best epoch {} of {}",
                outcome.best_epoch,
                outcome.history.len()
            );
        }
        Command::Evaluate {
            data,
            checkpoint: ck,
            split,
        } => {
            apply_data(&mut cfg, &data);
            if let Some(c) = ck {
                cfg.paths.checkpoint = Some(c);
            }
            let out = out_dir(&cfg)?;
            prepare_out_dir(&out, force)?;
            let model = checkpoint(&cfg)?;
            cfg.train.encoder = model.config.encoder.clone();
            cfg.train.fusion = model.config.fusion.clone();
            let m = manifest(&cfg)?;
            let (_, records) = load(&cfg, &m, &cfg.train)?;
            let metrics = pipeline::evaluate_split(&model, &records, split)?;
            write(
                &out,
                &format!("metrics_{}.csv", split.name()),
                metrics.to_csv(),
            )?;
            write(&out, "config.toml", cfg.to_toml()?)?;
            println!(
                "{} accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}",
                split.name(),
                metrics.accuracy,
                metrics.precision,
                metrics.recall,
                metrics.f1
            );
        }
        Command::Ablate { data, model, seeds } => {
            apply_data(&mut cfg, &data);
            apply_model(&mut cfg.train, &model);
            if let Some(s) = seeds {
                cfg.ablation.seeds = s;
            }
            let out = out_dir(&cfg)?;
            prepare_out_dir(&out, force)?;
            let m = manifest(&cfg)?;
            let (_, records) = load(&cfg, &m, &cfg.train)?;
            let ac = AblationConfig {
                base: cfg.train.clone(),
                seeds: cfg.ablation.seeds.clone(),
                split: cfg.ablation.split,
            };
            let table = pipeline::ablate(&records, &ac)?;
            write(&out, "ablation.md", table.to_markdown())?;
            write(&out, "ablation.csv", table.to_csv())?;
            write(&out, "ablation.json", serde_json::to_string_pretty(&table)?)?;
            print!("{}", table.to_markdown());
            if cfg.ablation.compare_concat {
                let mut rows = String::from("fusion,seed,accuracy\n");
                for kind in [FusionKind::Gate, FusionKind::Concat] {
                    for &seed in &ac.seeds {
                        let mut tc = cfg.train.clone();
                        tc.fusion.kind = kind;
                        tc.seed = seed;
                        let acc = pipeline::evaluate_split(
                            &pipeline::train(&records, &tc)?.model,
                            &records,
                            ac.split,
                        )?
                        .accuracy;
                        rows.push_str(&format!(
                            "{},{seed},{acc:.6}\n",
                            serde_json::to_value(kind)?.as_str().unwrap_or("?")
                        ));
                    }
                }
                write(&out, "fusion_comparison.csv", rows)?;
            }
            write(&out, "manifest.csv", m.to_csv())?;
            write(&out, "config.toml", cfg.to_toml()?)?;
        }
        Command::Explain {
            data,
            checkpoint: ck,
            files,
            k,
            method,
            steps,
            limit,
        } => {
            apply_data(&mut cfg, &data);
            if let Some(c) = ck {
                cfg.paths.checkpoint = Some(c);
            }
            if let Some(k) = k {
                cfg.saliency.k = k;
            }
            if let Some(m) = method {
                cfg.saliency.method = m;
            }
            if let Some(s) = steps {
                cfg.saliency.steps = s;
            }
            let out = out_dir(&cfg)?;
            prepare_out_dir(&out, force)?;
            let model = checkpoint(&cfg)?;
            cfg.train.encoder = model.config.encoder.clone();
            cfg.train.fusion = model.config.fusion.clone();
            let mut m = manifest(&cfg)?;
            if files.is_empty() {
                m.entries.retain(|e| e.split == Split::Test);
                m.entries.truncate(limit);
            } else {
                let wanted: Vec<PathBuf> = files
                    .iter()
                    .map(|f| f.canonicalize().unwrap_or_else(|_| f.clone()))
                    .collect();
                m.entries.retain(|e| {
                    let p = e.path.canonicalize().unwrap_or_else(|_| e.path.clone());
                    wanted.contains(&p)
                });
                if m.entries.len() != files.len() {
                    return Err(Error::Config(
                        "some --file paths are not in the manifest".into(),
                    ));
                }
            }
            let (embedder, records) = load(&cfg, &m, &cfg.train)?;
            let provider = embedder.provider();
            let generator = provider.is_semantic().then_some(provider);
            for r in &records {
                let e =
                    explain::report(&model, r, &cfg.saliency, generator, cfg.provider.max_chars)?;
                let stem = r
                    .path
                    .file_stem()
                    .map_or("sample".into(), |s| s.to_string_lossy().into_owned());
                write(&out, &format!("{stem}.json"), e.report.to_json()?)?;
                write(&out, &format!("{stem}.dot"), e.dot)?;
            }
            if let Some((rows, hist)) = explain::gate_csv(&model, &records)? {
                write(&out, "gates.csv", rows)?;
                write(&out, "gate_histogram.csv", hist)?;
            }
            write(&out, "config.toml", cfg.to_toml()?)?;
            println!("explained {} files into {}", records.len(), out.display());
        }
        Command::ZeroShot { data, split } => {
            apply_data(&mut cfg, &data);
            let out = out_dir(&cfg)?;
            prepare_out_dir(&out, force)?;
            let m = manifest(&cfg)?;
            let provider = crate::semantic::build_provider(&cfg.provider)?;
            let mut tally = ZeroShotTally::default();
            let mut rows = String::from("sample_id,label,prediction,reply\n");
            for e in m.split(split) {
                let unit = SourceUnit::read(&e.path)?;
                let r = zero_shot_classify(&unit.text, provider.as_ref(), cfg.provider.max_chars)
                    .map_err(|err| match err {
                    Error::ProviderUnavailable { reason, .. } => Error::ProviderUnavailable {
                        reason,
                        sample_id: Some(e.sample_id.clone()),
                    },
                    other => other,
                })?;
                tally.record(&r, e.label);
                let pred = r
                    .label
                    .map_or("abstain".to_string(), |v| v.label().to_string());
                rows.push_str(&format!("{},{},{pred},{:?}\n", e.sample_id, e.label, r.raw));
            }
            write(&out, "zero_shot.csv", rows)?;
            write(
                &out,
                "zero_shot_summary.json",
                serde_json::to_string_pretty(&tally)?,
            )?;
            write(&out, "config.toml", cfg.to_toml()?)?;
            println!(
                "zero-shot accuracy {:.4} ({} abstentions)",
                tally.accuracy(),
                tally.abstentions
            );
        }
    }
    Ok(())
}
