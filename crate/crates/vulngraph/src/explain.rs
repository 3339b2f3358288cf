//! Per-prediction explanations: gate weights, node saliency and a one-line justification.

use serde::{Deserialize, Serialize};

use crate::encoders::PreparedGraph;
use crate::error::{Error, Result};
use crate::fusion::{ForwardOptions, FusionKind, Model, Sample};
use crate::java::{to_dot_marked, ControlFlowGraph};
use crate::pipeline::FileRecord;
use crate::semantic::Provider;
use crate::tensor::{sigmoid, Matrix, Tape, Var};

pub const REPORT_VERSION: u32 = 1;
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_STEPS: usize = 128;
pub const JUSTIFY_MAX_TOKENS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SaliencyMethod {
    InputGradient,
    #[default]
    IntegratedGradients,
}

impl std::str::FromStr for SaliencyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "input-gradient" | "grad" => Ok(Self::InputGradient),
            "integrated-gradients" | "ig" => Ok(Self::IntegratedGradients),
            other => Err(Error::Config(format!("unknown saliency method {other:?}"))),
        }
    }
}

/// What the attribution explains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SaliencyTarget {
    /// `ŷ` for class 1, `1 − ŷ` for class 0.
    #[default]
    Probability,
    /// `s` for class 1, `−s` for class 0.
    Logit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaliencyConfig {
    pub method: SaliencyMethod,
    pub target: SaliencyTarget,
    /// Riemann steps for integrated gradients.
    pub steps: usize,
    pub k: usize,
}

impl Default for SaliencyConfig {
    fn default() -> Self {
        Self {
            method: SaliencyMethod::default(),
            target: SaliencyTarget::default(),
            steps: DEFAULT_STEPS,
            k: DEFAULT_K,
        }
    }
}

/// Feature-level attributions for one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    /// `n × d_in`; signed for integrated gradients, raw gradient for input-gradient.
    pub features: Matrix,
    /// Per-node importance: sum of absolute attributions over feature dims.
    pub node_scores: Vec<f64>,
    /// Predicted class at the input.
    pub class: u8,
    /// Target value at the input and at the zero baseline.
    pub target_input: f64,
    pub target_baseline: f64,
}

impl Attribution {
    /// `Σ signed attributions − (target(X) − target(0))`.
    pub fn completeness_gap(&self) -> f64 {
        self.features.sum() - (self.target_input - self.target_baseline)
    }
}

fn target_var(tape: &mut Tape, logits: Var, class: u8, target: SaliencyTarget) -> Var {
    let signed = if class == 1 {
        logits
    } else {
        tape.scale(logits, -1.0)
    };
    let t = match target {
        SaliencyTarget::Probability => tape.sigmoid(signed),
        SaliencyTarget::Logit => signed,
    };
    tape.sum(t)
}

fn target_value(s: f64, class: u8, target: SaliencyTarget) -> f64 {
    let signed = if class == 1 { s } else { -s };
    match target {
        SaliencyTarget::Probability => sigmoid(signed),
        SaliencyTarget::Logit => signed,
    }
}

fn logit(model: &Model, graph: &PreparedGraph, h_l: &[f64]) -> Result<f64> {
    let mut tape = Tape::new();
    let out = model.forward(
        &mut tape,
        &[Sample { graph, h_l }],
        ForwardOptions::default(),
        None,
    )?;
    Ok(tape.value(out.logits)[[0, 0]])
}

fn with_features(graph: &PreparedGraph, features: Matrix) -> PreparedGraph {
    PreparedGraph {
        features,
        ..graph.clone()
    }
}

/// Sum over `scaled` inputs of `∂target/∂X`, from one batched backward pass.
/// Samples in a batch do not interact in the forward pass, so each copy gets
/// its own gradient.
fn summed_gradient(
    model: &Model,
    scaled: &[PreparedGraph],
    h_l: &[f64],
    class: u8,
    target: SaliencyTarget,
) -> Result<Matrix> {
    let batch: Vec<Sample<'_>> = scaled.iter().map(|g| Sample { graph: g, h_l }).collect();
    let mut tape = Tape::new();
    let opts = ForwardOptions {
        node_level: false,
        track_features: true,
    };
    let out = model.forward(&mut tape, &batch, opts, None)?;
    let t = target_var(&mut tape, out.logits, class, target);
    let grads = tape.backward(t)?;
    let first = &scaled[0].features;
    let mut total = Matrix::zeros(first.raw_dim());
    for &x in &out.features {
        total += &grads.get_or_zeros(&tape, x);
    }
    Ok(total)
}

/// Attributions for `graph` under the file embedding `h_l`.
pub fn attribute(
    model: &Model,
    graph: &PreparedGraph,
    h_l: &[f64],
    cfg: &SaliencyConfig,
) -> Result<Attribution> {
    let x = &graph.features;
    if let Some(d) = model.d_in() {
        if x.ncols() != d {
            return Err(Error::shape(
                "saliency",
                format!("{d} feature columns"),
                x.ncols().to_string(),
            ));
        }
    }
    let s = logit(model, graph, h_l)?;
    let class = u8::from(sigmoid(s) >= 0.5);
    let baseline = with_features(graph, Matrix::zeros(x.raw_dim()));
    let target_input = target_value(s, class, cfg.target);
    let target_baseline = target_value(logit(model, &baseline, h_l)?, class, cfg.target);

    let features = match cfg.method {
        SaliencyMethod::InputGradient => {
            summed_gradient(model, std::slice::from_ref(graph), h_l, class, cfg.target)?
        }
        SaliencyMethod::IntegratedGradients => {
            if cfg.steps == 0 {
                return Err(Error::Config(
                    "integrated gradients needs at least one step".into(),
                ));
            }
            let m = cfg.steps;
            let scaled: Vec<PreparedGraph> = (0..m)
                .map(|i| with_features(graph, x * ((i as f64 + 0.5) / m as f64)))
                .collect();
            let avg = summed_gradient(model, &scaled, h_l, class, cfg.target)? / m as f64;
            x * &avg
        }
    };
    let node_scores = features
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum())
        .collect();
    Ok(Attribution {
        features,
        node_scores,
        class,
        target_input,
        target_baseline,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeScore {
    pub id: usize,
    pub label: String,
    pub score: f64,
}

/// The `min(k, n)` highest scores, ties broken by lower node id.
pub fn top_k(scores: &[f64], labels: &[String], k: usize) -> Vec<NodeScore> {
    let mut ids: Vec<usize> = (0..scores.len()).collect();
    ids.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    ids.into_iter()
        .take(k)
        .map(|id| NodeScore {
            id,
            label: labels.get(id).cloned().unwrap_or_default(),
            score: scores[id],
        })
        .collect()
}

pub fn class_word(class: u8) -> &'static str {
    if class == 1 {
        "vulnerable"
    } else {
        "safe"
    }
}

/// The justification prompt.
pub fn build_prompt(code: &str, class: u8, node_labels: &[&str]) -> String {
    format!(
        "One sentence: main reason this code is {}. Provide only one sentence.\nCode: {}\nTop nodes: {}\nOne-sentence explanation:",
        class_word(class),
        code,
        node_labels.join(", ")
    )
}

/// Text up to and including the first `.`, `!` or `?` that ends the text or
/// is followed by whitespace.
pub fn first_sentence(text: &str) -> &str {
    let text = text.trim();
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|&(_, n)| n.is_whitespace()) {
            return &text[..i + c.len_utf8()];
        }
    }
    text
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Justification {
    pub sentence: String,
    /// Set when the template sentence replaced a model reply.
    pub fallback: bool,
}

pub fn fallback_sentence(modality: &str, nodes: &[NodeScore]) -> String {
    let ids: Vec<String> = nodes.iter().map(|n| n.id.to_string()).collect();
    format!(
        "Prediction driven by {modality} evidence at nodes {}.",
        ids.join(", ")
    )
}

/// Deterministic generation, trimmed to one sentence. Provider failures and
/// empty replies fall back to the template sentence.
pub fn justify(
    prompt: &str,
    provider: Option<&dyn Provider>,
    modality: &str,
    nodes: &[NodeScore],
) -> Justification {
    let fallback = || Justification {
        sentence: fallback_sentence(modality, nodes),
        fallback: true,
    };
    let Some(p) = provider else {
        return fallback();
    };
    match p.generate(prompt, JUSTIFY_MAX_TOKENS, 0.0) {
        Ok(reply) => {
            let s = first_sentence(&reply);
            if s.is_empty() {
                fallback()
            } else {
                Justification {
                    sentence: s.to_string(),
                    fallback: false,
                }
            }
        }
        Err(e) => {
            log::warn!("justification unavailable: {e}");
            fallback()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gates {
    pub a_g: f64,
    pub a_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub version: u32,
    pub sample_id: String,
    pub path: String,
    /// Method whose CFG is explained: the one with the highest `ŷ`.
    pub method: String,
    pub predicted_label: u8,
    pub y_hat: f64,
    pub gates: Option<Gates>,
    pub saliency: SaliencyConfig,
    pub top_nodes: Vec<NodeScore>,
    pub completeness_gap: Option<f64>,
    pub justification: Justification,
}

impl ExplanationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub struct Explanation {
    pub report: ExplanationReport,
    /// CFG with the top nodes filled.
    pub dot: String,
}

fn modality_word(gates: Option<Gates>) -> &'static str {
    match gates {
        Some(g) if g.a_g >= g.a_l => "graph",
        Some(_) => "semantic",
        None => "graph and semantic",
    }
}

/// Explains the file-level prediction through its highest-scoring method.
pub fn report(
    model: &Model,
    record: &FileRecord,
    cfg: &SaliencyConfig,
    provider: Option<&dyn Provider>,
    max_code_chars: usize,
) -> Result<Explanation> {
    let samples: Vec<Sample<'_>> = record
        .prepared
        .iter()
        .map(|g| Sample {
            graph: g,
            h_l: &record.h_l,
        })
        .collect();
    let probs = model.predict(&samples)?;
    let (idx, &y_hat) = probs
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, &f64)>, (i, p)| match best {
            Some((_, b)) if b >= p => best,
            _ => Some((i, p)),
        })
        .ok_or(Error::EmptyCorpus)?;
    let graph = &record.prepared[idx];
    let cfg_graph: &ControlFlowGraph = &record.cfgs[idx];

    let gates = if model.config.fusion.kind == FusionKind::Gate {
        model.gate_weights(&samples[idx..idx + 1])?.map(|g| Gates {
            a_g: g[0].0,
            a_l: g[0].1,
        })
    } else {
        None
    };
    let attr = attribute(model, graph, &record.h_l, cfg)?;
    let labels: Vec<String> = cfg_graph.nodes.iter().map(|n| n.label.clone()).collect();
    let top_nodes = top_k(&attr.node_scores, &labels, cfg.k);
    let class = u8::from(y_hat >= 0.5);
    let node_labels: Vec<&str> = top_nodes.iter().map(|n| n.label.as_str()).collect();
    let code = crate::semantic::head_truncate(&record.source, max_code_chars);
    let prompt = build_prompt(code, class, &node_labels);
    let justification = justify(&prompt, provider, modality_word(gates), &top_nodes);
    let marked: Vec<usize> = top_nodes.iter().map(|n| n.id).collect();
    let report = ExplanationReport {
        version: REPORT_VERSION,
        sample_id: record.sample_id.clone(),
        path: record.path.display().to_string(),
        method: cfg_graph.method_name.clone(),
        predicted_label: class,
        y_hat,
        gates,
        saliency: *cfg,
        top_nodes,
        completeness_gap: (cfg.method == SaliencyMethod::IntegratedGradients)
            .then(|| attr.completeness_gap()),
        justification,
    };
    Ok(Explanation {
        report,
        dot: to_dot_marked(cfg_graph, &marked),
    })
}

/// `sample_id,a_g,a_l` rows for a gating model, plus a 10-bin histogram of `a_g`.
pub fn gate_csv(model: &Model, records: &[FileRecord]) -> Result<Option<(String, String)>> {
    if model.config.fusion.kind != FusionKind::Gate {
        return Ok(None);
    }
    let mut rows = String::from("sample_id,method,a_g,a_l\n");
    let mut hist = [0usize; 10];
    let (mut sum, mut count) = (0.0, 0usize);
    for r in records {
        let samples: Vec<Sample<'_>> = r
            .prepared
            .iter()
            .map(|g| Sample {
                graph: g,
                h_l: &r.h_l,
            })
            .collect();
        let gates = model.gate_weights(&samples)?.unwrap_or_default();
        for ((a_g, a_l), g) in gates.into_iter().zip(&r.prepared) {
            rows.push_str(&format!(
                "{},{},{a_g:.6},{a_l:.6}\n",
                r.sample_id, g.method_name
            ));
            hist[((a_g * 10.0) as usize).min(9)] += 1;
            sum += a_g;
            count += 1;
        }
    }
    let mut summary = String::from("bin_lo,bin_hi,count\n");
    for (i, c) in hist.iter().enumerate() {
        summary.push_str(&format!(
            "{:.1},{:.1},{c}\n",
            i as f64 / 10.0,
            (i + 1) as f64 / 10.0
        ));
    }
    summary.push_str(&format!(
        "mean,,{:.6}\n",
        if count == 0 { 0.0 } else { sum / count as f64 }
    ));
    Ok(Some((rows, summary)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_matches_template() {
        let p = build_prompt("int x;", 1, &["a = b", "return a"]);
        assert_eq!(
            p,
            "One sentence: main reason this code is vulnerable. Provide only one sentence.\nCode: int x;\nTop nodes: a = b, return a\nOne-sentence explanation:"
        );
        assert!(build_prompt("x", 0, &[]).contains("main reason this code is safe."));
    }

    #[test]
    fn first_sentence_keeps_dotted_names() {
        assert_eq!(
            first_sentence(" Calls stmt.execute with input. Then more."),
            "Calls stmt.execute with input."
        );
        assert_eq!(first_sentence("No terminator"), "No terminator");
        assert_eq!(first_sentence("Why? Because."), "Why?");
    }

    #[test]
    fn top_k_clamps_and_breaks_ties_by_id() {
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let t = top_k(&[1.0, 2.0, 2.0], &labels, 10);
        assert_eq!(t.iter().map(|n| n.id).collect::<Vec<_>>(), vec![1, 2, 0]);
        assert_eq!(top_k(&[1.0, 2.0, 2.0], &labels, 1)[0].id, 1);
    }

    #[test]
    fn offline_justification_falls_back() {
        let nodes = vec![NodeScore {
            id: 3,
            label: "x".into(),
            score: 1.0,
        }];
        let j = justify("p", None, "graph", &nodes);
        assert!(j.fallback);
        assert_eq!(
            j.sentence,
            "Prediction driven by graph evidence at nodes 3."
        );
    }
}
