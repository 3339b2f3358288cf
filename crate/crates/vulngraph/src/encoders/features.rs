//! Node feature matrices built from CFG node labels.
//!
//! Hashed layout for width `d_in`: columns `0..9` are a one-hot of the node
//! kind (in [`NodeKind::ALL`] order); columns `9..d_in` are sign-hashed token
//! buckets. Each row is L2-normalized.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::java::{ControlFlowGraph, NodeKind};
use crate::tensor::Matrix;

const KIND_COLUMNS: usize = NodeKind::ALL.len();

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeaturizerKind {
    #[default]
    HashedBagOfTokens,
    SemanticPerNode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub matrix: Matrix,
    pub featurizer: FeaturizerKind,
}

impl NodeFeatures {
    pub fn d_in(&self) -> usize {
        self.matrix.ncols()
    }
}

fn token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"[A-Za-z_$][A-Za-z0-9_$]*|[0-9][0-9A-Za-z_.]*|"[^"]*"?|[^\sA-Za-z0-9_$"]+"#)
            .expect("valid token regex")
    })
}

fn camel_parts(ident: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut cur = String::new();
    let mut prev_lower = false;
    for c in ident.chars() {
        if c == '_' || c == '$' {
            if !cur.is_empty() {
                parts.push(std::mem::take(&mut cur));
            }
            prev_lower = false;
            continue;
        }
        if c.is_uppercase() && prev_lower && !cur.is_empty() {
            parts.push(std::mem::take(&mut cur));
        }
        prev_lower = c.is_lowercase() || c.is_ascii_digit();
        cur.extend(c.to_lowercase());
    }
    if !cur.is_empty() {
        parts.push(cur);
    }
    parts
}

/// Splits a label on identifier and operator boundaries. Identifiers also
/// contribute their lower-cased camel-case pieces; string literals collapse
/// to a single `<str>` token.
pub fn label_tokens(label: &str) -> Vec<String> {
    let mut out = Vec::new();
    for m in token_regex().find_iter(label) {
        let t = m.as_str();
        if t.starts_with('"') {
            out.push("<str>".to_string());
        } else if t.starts_with(|c: char| c.is_alphabetic() || c == '_' || c == '$') {
            out.push(t.to_string());
            let parts = camel_parts(t);
            if parts.len() > 1 {
                out.extend(parts);
            }
        } else {
            out.push(t.to_string());
        }
    }
    out
}

/// Bucket index and sign for `token` under `seed`.
pub fn hash_token(token: &str, seed: u64, buckets: usize) -> (usize, f64) {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(token.as_bytes());
    let digest = h.finalize();
    let word = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
    ((word % buckets as u64) as usize, sign)
}

pub fn featurize_hashed(g: &ControlFlowGraph, d_in: usize, seed: u64) -> Result<NodeFeatures> {
    if d_in <= KIND_COLUMNS {
        return Err(Error::Config(format!(
            "d_in must exceed {KIND_COLUMNS}, got {d_in}"
        )));
    }
    let buckets = d_in - KIND_COLUMNS;
    let mut x = Matrix::zeros((g.len(), d_in));
    for (i, node) in g.nodes.iter().enumerate() {
        x[[i, node.kind.index()]] = 1.0;
        for tok in label_tokens(&node.label) {
            let (b, s) = hash_token(&tok, seed, buckets);
            x[[i, KIND_COLUMNS + b]] += s;
        }
        let mut row = x.row_mut(i);
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    Ok(NodeFeatures {
        matrix: x,
        featurizer: FeaturizerKind::HashedBagOfTokens,
    })
}

/// Features from a per-label embedding function (normally a semantic
/// provider). Entry and exit nodes, whose labels are empty, embed their kind
/// name instead.
pub fn featurize_with<F>(g: &ControlFlowGraph, mut embed: F) -> Result<NodeFeatures>
where
    F: FnMut(&str) -> Result<Vec<f64>>,
{
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(g.len());
    for node in &g.nodes {
        let text = if node.label.is_empty() {
            node.kind.name().to_uppercase()
        } else {
            node.label.clone()
        };
        let v = embed(&text)?;
        if let Some(first) = rows.first() {
            if first.len() != v.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    got: v.len(),
                });
            }
        }
        rows.push(v);
    }
    let d = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let mut matrix = Matrix::from_shape_vec((g.len(), d), flat).expect("row-major feature layout");
    for mut row in matrix.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    Ok(NodeFeatures {
        matrix,
        featurizer: FeaturizerKind::SemanticPerNode,
    })
}
