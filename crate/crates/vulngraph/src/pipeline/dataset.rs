//! Corpus ingestion: labels, deduplication, parse filtering and stratified splits.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::java::{content_hash, parse_and_build, SourceUnit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::format(
                "manifest",
                format!("unknown split {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    /// 0 = safe, 1 = vulnerable.
    pub label: u8,
    pub sample_id: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub dropped_duplicates: usize,
    pub dropped_unparsable: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.15,
            test: 0.15,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train, self.val, self.test];
        if f.iter().any(|&x| !(0.0..=1.0).contains(&x))
            || ((f.iter().sum::<f64>()) - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(format!(
                "split fractions {f:?} must lie in [0, 1] and sum to 1"
            )));
        }
        Ok(())
    }
}

/// Per-split counts for `n` items: floors of `n·f`, then the leftover units
/// go to the largest fractional parts, ties to the earlier split.
pub fn split_counts(n: usize, cfg: &SplitConfig) -> [usize; 3] {
    let fr = [cfg.train, cfg.val, cfg.test];
    let exact: Vec<f64> = fr.iter().map(|f| f * n as f64).collect();
    let mut counts = [0usize; 3];
    for i in 0..3 {
        counts[i] = exact[i].floor() as usize;
    }
    let mut left = n - counts.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.partial_cmp(&ra).expect("finite").then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

fn parse_label(s: &str) -> Option<u8> {
    match s.trim().to_ascii_lowercase().as_str() {
        "0" | "safe" => Some(0),
        "1" | "vulnerable" => Some(1),
        _ => None,
    }
}

#[derive(Deserialize)]
struct JsonLabel {
    path: String,
    label: serde_json::Value,
}

/// Reads `path,label` CSV (optional header) or JSON lines `{"path":..,"label":..}`.
/// Labels are `0`/`1` or `safe`/`vulnerable`. Paths are relative to the corpus root.
pub fn read_labels(path: &Path) -> Result<HashMap<PathBuf, u8>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (p, l) = if line.starts_with('{') {
            let rec: JsonLabel = serde_json::from_str(line)?;
            let l = match rec.label {
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            (rec.path, l)
        } else {
            let Some((p, l)) = line.rsplit_once(',') else {
                return Err(Error::format(
                    "labels",
                    format!("line {}: expected path,label", i + 1),
                ));
            };
            (p.trim().to_string(), l.to_string())
        };
        match parse_label(&l) {
            Some(label) => {
                out.insert(PathBuf::from(p), label);
            }
            None if i == 0 => continue,
            None => {
                return Err(Error::format(
                    "labels",
                    format!("line {}: bad label {l:?}", i + 1),
                ))
            }
        }
    }
    Ok(out)
}

fn label_from_dirs(rel: &Path) -> Option<u8> {
    rel.parent()?
        .components()
        .rev()
        .find_map(|c| parse_label(&c.as_os_str().to_string_lossy()))
}

/// All `.java` files under `root` in sorted order.
pub fn java_files(root: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e
                .path()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| root.to_path_buf());
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "java") {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

/// Walks `root`, labels each file (from `labels`, else from a `safe/` or
/// `vulnerable/` ancestor directory), drops byte-identical duplicates and
/// files without a parsable method, then assigns stratified splits.
pub fn ingest(root: &Path, labels: Option<&Path>, split: &SplitConfig) -> Result<DatasetManifest> {
    split.validate()?;
    let label_map = labels.map(read_labels).transpose()?;
    let files = java_files(root)?;
    if files.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut labeled = Vec::with_capacity(files.len());
    for path in files {
        let rel = path.strip_prefix(root).unwrap_or(&path).to_path_buf();
        let label = match &label_map {
            Some(m) => m.get(&rel).copied(),
            None => label_from_dirs(&rel),
        };
        let label = label.ok_or_else(|| Error::LabelMissing(rel.clone()))?;
        labeled.push((path, label));
    }

    let loaded: Vec<(PathBuf, u8, Option<String>)> = labeled
        .into_par_iter()
        .map(|(path, label)| {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let id = SourceUnit::new(&path, text.clone())
                .ok()
                .filter(|u| matches!(parse_and_build(u), Ok(gs) if !gs.is_empty()))
                .map(|_| content_hash(&text));
            if id.is_none() {
                log::info!("skipping {}: no parsable method", path.display());
            }
            Ok((path, label, id))
        })
        .collect::<Result<_>>()?;

    let mut seen = HashSet::new();
    let (mut dup, mut bad) = (0, 0);
    let mut by_class: BTreeMap<u8, Vec<(PathBuf, String)>> = BTreeMap::new();
    for (path, label, id) in loaded {
        match id {
            None => bad += 1,
            Some(id) if !seen.insert(id.clone()) => dup += 1,
            Some(id) => by_class.entry(label).or_default().push((path, id)),
        }
    }
    if by_class.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(split.seed);
    let mut entries = Vec::new();
    for (label, mut items) in by_class {
        items.shuffle(&mut rng);
        let counts = split_counts(items.len(), split);
        let mut it = items.into_iter();
        for (s, c) in Split::ALL.into_iter().zip(counts) {
            for (path, sample_id) in it.by_ref().take(c) {
                entries.push(ManifestEntry {
                    path,
                    label,
                    sample_id,
                    split: s,
                });
            }
        }
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    log::info!(
        "ingested {} files ({} duplicates, {} unparsable dropped)",
        entries.len(),
        dup,
        bad
    );
    Ok(DatasetManifest {
        entries,
        dropped_duplicates: dup,
        dropped_unparsable: bad,
    })
}

impl DatasetManifest {
    pub fn split(&self, s: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == s)
    }

    /// `path,label,sample_id,split` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,label,sample_id,split\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.path.display(),
                e.label,
                e.sample_id,
                e.split.name()
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.rsplitn(4, ',').collect();
            if parts.len() != 4 {
                return Err(Error::format(
                    "manifest",
                    format!("line {}: expected 4 fields", i + 1),
                ));
            }
            let label = parse_label(parts[2])
                .ok_or_else(|| Error::format("manifest", format!("line {}: bad label", i + 1)))?;
            entries.push(ManifestEntry {
                path: PathBuf::from(parts[3]),
                label,
                sample_id: parts[1].to_string(),
                split: parts[0].parse()?,
            });
        }
        Ok(Self {
            entries,
            dropped_duplicates: 0,
            dropped_unparsable: 0,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if text.trim_start().starts_with('{') {
            let entries = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(serde_json::from_str)
                .collect::<std::result::Result<Vec<ManifestEntry>, _>>()?;
            return Ok(Self {
                entries,
                dropped_duplicates: 0,
                dropped_unparsable: 0,
            });
        }
        Self::from_csv(&text)
    }
}
