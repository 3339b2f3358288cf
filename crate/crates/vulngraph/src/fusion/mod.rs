//! The fusion model: structural encoder, projection heads, one of three
//! fusion heads, and the classifier.
//!
//! Classifier input by fusion kind:
//!
//! | kind              | input                  |
//! |-------------------|------------------------|
//! | `concat`          | `[ĝ ‖ l̂]`              |
//! | `gate`            | `ĥ`                    |
//! | `cross-attention` | `[F ‖ l̂]` (residual) or `F` (replace) |
//!
//! With `concat_classifier_input` set, non-concat kinds use `[fused ‖ ĝ ‖ l̂]`.

pub mod checkpoint;
pub mod heads;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoders::{self, EncoderConfig, PreparedGraph};
use crate::error::{Error, Result};
use crate::tensor::{sigmoid, xavier_uniform, Activation, Matrix, ParamStore, Tape, Var, NORM_EPS};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use heads::{
    classify, fuse_concat, fuse_cross_attention, fuse_gate, gate_combine, gate_scores,
    gate_weights, project, CrossAttentionParams, GateParams,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionKind {
    Concat,
    #[default]
    Gate,
    CrossAttention,
}

impl std::str::FromStr for FusionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concat" => Ok(Self::Concat),
            "gate" | "gating" => Ok(Self::Gate),
            "cross-attention" | "xattn" => Ok(Self::CrossAttention),
            other => Err(Error::Config(format!("unknown fusion kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossCombine {
    Replace,
    #[default]
    Residual,
}

/// Which modalities reach the fusion head.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    #[default]
    Both,
    /// `l̂` is zeroed and the gate frozen at `a_g = 1`.
    GraphOnly,
    /// `ĝ` is zeroed and the gate frozen at `a_l = 1`.
    SemanticOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub kind: FusionKind,
    pub d_proj: usize,
    pub activation: Activation,
    pub mlp_hidden: Vec<usize>,
    pub cross_combine: CrossCombine,
    pub concat_classifier_input: bool,
    pub modality: Modality,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            kind: FusionKind::Gate,
            d_proj: 128,
            activation: Activation::Gelu,
            mlp_hidden: vec![64],
            cross_combine: CrossCombine::Residual,
            concat_classifier_input: false,
            modality: Modality::Both,
        }
    }
}

impl FusionConfig {
    fn fused_dim(&self) -> usize {
        match (self.kind, self.cross_combine) {
            (FusionKind::Concat, _) => 2 * self.d_proj,
            (FusionKind::Gate, _) => self.d_proj,
            (FusionKind::CrossAttention, CrossCombine::Replace) => self.d_proj,
            (FusionKind::CrossAttention, CrossCombine::Residual) => 2 * self.d_proj,
        }
    }

    pub fn classifier_input_dim(&self) -> usize {
        if self.concat_classifier_input && self.kind != FusionKind::Concat {
            self.fused_dim() + 2 * self.d_proj
        } else {
            self.fused_dim()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub fusion: FusionConfig,
    /// Width of the semantic vectors `h_L`.
    pub d_l: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
}

/// One training or inference instance: a method CFG and its file's `h_L`.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub graph: &'a PreparedGraph,
    pub h_l: &'a [f64],
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardOptions {
    /// Compute projected node rows even when the fusion head does not need them.
    pub node_level: bool,
    /// Bind node features as tracked leaves (for saliency).
    pub track_features: bool,
}

#[derive(Debug, Clone)]
pub struct Forward {
    /// `B × 1`.
    pub logits: Var,
    pub g_hat: Var,
    pub l_hat: Var,
    pub fused: Var,
    /// `B × 2` gate weights for gating fusion.
    pub gates: Option<Var>,
    /// Per-sample `1 × n` attention rows for cross-attention fusion.
    pub attention: Vec<Var>,
    /// Per-sample projected node rows (`n × d′`) when requested.
    pub node_h: Vec<Var>,
    /// Per-sample node feature inputs.
    pub features: Vec<Var>,
}

fn insert_linear(
    store: &mut ParamStore,
    rng: &mut ChaCha8Rng,
    name: &str,
    fan_in: usize,
    fan_out: usize,
) {
    store.insert(format!("{name}.w"), xavier_uniform(rng, fan_in, fan_out));
    store.insert(format!("{name}.b"), Matrix::zeros((1, fan_out)));
}

fn insert_projection(
    store: &mut ParamStore,
    rng: &mut ChaCha8Rng,
    name: &str,
    fan_in: usize,
    d: usize,
) {
    insert_linear(store, rng, name, fan_in, d);
    store.insert(format!("{name}.gamma"), Matrix::ones((1, d)));
    store.insert(format!("{name}.beta"), Matrix::zeros((1, d)));
}

impl Model {
    /// Xavier weights, zero biases, unit LayerNorm gains; all drawn from one
    /// ChaCha stream seeded by `seed`.
    pub fn init(config: ModelConfig, d_in: usize, seed: u64) -> Result<Self> {
        config.encoder.validate()?;
        let f = &config.fusion;
        if f.d_proj == 0 || config.d_l == 0 || f.mlp_hidden.contains(&0) {
            return Err(Error::Config(
                "projection, d_l and MLP widths must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        encoders::init_params(&mut store, &config.encoder, d_in, &mut rng)?;
        let d = f.d_proj;
        insert_projection(&mut store, &mut rng, "proj_g", config.encoder.d_g, d);
        insert_projection(&mut store, &mut rng, "proj_l", config.d_l, d);
        match f.kind {
            FusionKind::Concat => {}
            FusionKind::Gate => {
                store.insert("fuse.gate.w_e", xavier_uniform(&mut rng, 2 * d, d));
                store.insert("fuse.gate.b_e", Matrix::zeros((1, d)));
                store.insert("fuse.gate.w_e2", xavier_uniform(&mut rng, 2 * d, d));
                store.insert("fuse.gate.b_e2", Matrix::zeros((1, d)));
                store.insert("fuse.gate.v", xavier_uniform(&mut rng, d, 1));
            }
            FusionKind::CrossAttention => {
                for name in ["w_q", "w_k", "w_v"] {
                    store.insert(format!("fuse.xattn.{name}"), xavier_uniform(&mut rng, d, d));
                }
            }
        }
        let mut width = f.classifier_input_dim();
        for (i, &h) in f.mlp_hidden.iter().enumerate() {
            insert_linear(&mut store, &mut rng, &format!("cls.{i}"), width, h);
            width = h;
        }
        insert_linear(&mut store, &mut rng, "cls.out", width, 1);
        Ok(Self {
            config,
            params: store,
        })
    }

    pub fn d_in(&self) -> Option<usize> {
        match self.config.encoder.kind {
            encoders::EncoderKind::Node2vec => None,
            encoders::EncoderKind::Sage => self.params.get("enc.0.w").map(|w| w.nrows() / 2),
            encoders::EncoderKind::Gcn => self.params.get("enc.0.w").map(|w| w.nrows()),
            encoders::EncoderKind::Gat => self.params.get("enc.0.h0.w").map(|w| w.nrows()),
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        batch: &[Sample<'_>],
        opts: ForwardOptions,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Forward> {
        if batch.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let cfg = &self.config;
        let f = &cfg.fusion;
        let store = &self.params;
        let want_nodes = opts.node_level || f.kind == FusionKind::CrossAttention;

        let mut features = Vec::with_capacity(batch.len());
        let mut pooled = Vec::with_capacity(batch.len());
        let mut node_h = Vec::new();
        for s in batch {
            let x = if opts.track_features {
                tape.leaf(s.graph.features.clone())
            } else {
                tape.constant(s.graph.features.clone())
            };
            features.push(x);
            let z =
                encoders::encode_nodes(tape, store, &cfg.encoder, s.graph, x, rng.as_deref_mut())?;
            pooled.push(encoders::pool(tape, z)?);
            if want_nodes {
                let zn = tape.l2_normalize_rows(z, NORM_EPS);
                node_h.push(project(tape, store, "proj_g", zn, f.activation)?);
            }
        }
        let h_g = tape.concat_rows(&pooled)?;
        let h_g = tape.l2_normalize_rows(h_g, NORM_EPS);
        let mut g_hat = project(tape, store, "proj_g", h_g, f.activation)?;

        let mut flat = Vec::with_capacity(batch.len() * cfg.d_l);
        for s in batch {
            if s.h_l.len() != cfg.d_l {
                return Err(Error::DimensionMismatch {
                    expected: cfg.d_l,
                    got: s.h_l.len(),
                });
            }
            flat.extend_from_slice(s.h_l);
        }
        let h_l = tape
            .constant(Matrix::from_shape_vec((batch.len(), cfg.d_l), flat).expect("batch layout"));
        let h_l = tape.l2_normalize_rows(h_l, NORM_EPS);
        let mut l_hat = project(tape, store, "proj_l", h_l, f.activation)?;

        let zeros = Matrix::zeros((batch.len(), f.d_proj));
        match f.modality {
            Modality::Both => {}
            Modality::GraphOnly => l_hat = tape.constant(zeros),
            Modality::SemanticOnly => g_hat = tape.constant(zeros),
        }

        let mut gates = None;
        let mut attention = Vec::new();
        let fused = match f.kind {
            FusionKind::Concat => fuse_concat(tape, g_hat, l_hat)?,
            FusionKind::Gate => {
                let a = match f.modality {
                    Modality::Both => {
                        let p = GateParams::bind(tape, store)?;
                        let scores = gate_scores(tape, p, g_hat, l_hat)?;
                        gate_weights(tape, scores)?
                    }
                    Modality::GraphOnly => heads::frozen_gate(tape, batch.len(), 1.0),
                    Modality::SemanticOnly => heads::frozen_gate(tape, batch.len(), 0.0),
                };
                gates = Some(a);
                gate_combine(tape, a, g_hat, l_hat)?
            }
            FusionKind::CrossAttention => {
                let p = CrossAttentionParams::bind(tape, store)?;
                let mut rows = Vec::with_capacity(batch.len());
                for (i, &nodes) in node_h.iter().enumerate() {
                    let nodes = if f.modality == Modality::SemanticOnly {
                        let n = tape.shape(nodes).0;
                        tape.constant(Matrix::zeros((n, f.d_proj)))
                    } else {
                        nodes
                    };
                    let q = tape.slice_rows(l_hat, i, i + 1)?;
                    let (fi, alpha) = fuse_cross_attention(tape, p, q, nodes)?;
                    attention.push(alpha);
                    rows.push(fi);
                }
                let fmat = tape.concat_rows(&rows)?;
                match f.cross_combine {
                    CrossCombine::Replace => fmat,
                    CrossCombine::Residual => tape.concat_cols(&[fmat, l_hat])?,
                }
            }
        };
        let u = if f.concat_classifier_input && f.kind != FusionKind::Concat {
            tape.concat_cols(&[fused, g_hat, l_hat])?
        } else {
            fused
        };
        let logits = classify(tape, store, u, f.mlp_hidden.len(), f.activation)?;
        Ok(Forward {
            logits,
            g_hat,
            l_hat,
            fused,
            gates,
            attention,
            node_h,
            features,
        })
    }

    /// `ŷ` for each sample in evaluation mode.
    pub fn predict(&self, batch: &[Sample<'_>]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, batch, ForwardOptions::default(), None)?;
        Ok(tape.value(out.logits).iter().map(|&s| sigmoid(s)).collect())
    }

    /// `(a_g, a_l)` per sample for gating fusion, `None` otherwise.
    pub fn gate_weights(&self, batch: &[Sample<'_>]) -> Result<Option<Vec<(f64, f64)>>> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, batch, ForwardOptions::default(), None)?;
        Ok(out.gates.map(|a| {
            tape.value(a)
                .rows()
                .into_iter()
                .map(|r| (r[0], r[1]))
                .collect()
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::prepare_hashed;
    use crate::java::{parse_and_build, SourceUnit};

    fn tiny(kind: FusionKind) -> (Model, PreparedGraph) {
        let enc = EncoderConfig {
            d_in: 16,
            hidden: 8,
            d_g: 8,
            dropout: 0.0,
            ..Default::default()
        };
        let cfg = ModelConfig {
            encoder: enc.clone(),
            fusion: FusionConfig {
                kind,
                d_proj: 8,
                mlp_hidden: vec![4],
                ..Default::default()
            },
            d_l: 6,
        };
        let unit = SourceUnit::new("T.java", "int f(int x){while(x>0){x--;}return x;}").unwrap();
        let g = parse_and_build(&unit).unwrap().remove(0);
        (
            Model::init(cfg, 16, 5).unwrap(),
            prepare_hashed(&g, &enc).unwrap(),
        )
    }

    #[test]
    fn every_fusion_kind_runs() {
        let h = [0.1, -0.3, 0.5, 0.0, 0.2, 0.9];
        for kind in [
            FusionKind::Concat,
            FusionKind::Gate,
            FusionKind::CrossAttention,
        ] {
            let (m, g) = tiny(kind);
            let p = m.predict(&[Sample { graph: &g, h_l: &h }]).unwrap();
            assert!(p[0] > 0.0 && p[0] < 1.0, "{kind:?}");
        }
    }

    #[test]
    fn gate_weights_only_for_gating() {
        let h = [0.1; 6];
        let (m, g) = tiny(FusionKind::Gate);
        let w = m
            .gate_weights(&[Sample { graph: &g, h_l: &h }])
            .unwrap()
            .unwrap();
        assert_eq!(w[0].0 + w[0].1, 1.0);
        let (m, g) = tiny(FusionKind::Concat);
        assert!(m
            .gate_weights(&[Sample { graph: &g, h_l: &h }])
            .unwrap()
            .is_none());
    }

    #[test]
    fn wrong_semantic_width_is_rejected() {
        let (m, g) = tiny(FusionKind::Gate);
        let err = m.predict(&[Sample {
            graph: &g,
            h_l: &[1.0],
        }]);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }
}
