//! Structural encoders producing node embeddings `Z` (`|V| × d_G`) and the
//! pooled graph vector `h_G = mean_rows(Z)`.

pub mod features;
pub mod layers;
pub mod node2vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{gcn_operator, mean_operator, neighbor_matrix, Neighborhood};
use crate::java::ControlFlowGraph;
use crate::tensor::{xavier_uniform, Activation, Matrix, ParamStore, Tape, Var};

pub use features::{featurize_hashed, featurize_with, label_tokens, FeaturizerKind, NodeFeatures};
pub use layers::{gat_head, gat_layer, gcn_layer, sage_layer, GatHead};
pub use node2vec::{node2vec_embed, node2vec_on_edges, Node2VecConfig, Node2VecModel};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    #[default]
    Gcn,
    Gat,
    Sage,
    Node2vec,
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(Self::Gcn),
            "gat" => Ok(Self::Gat),
            "sage" => Ok(Self::Sage),
            "node2vec" => Ok(Self::Node2vec),
            other => Err(Error::Config(format!("unknown encoder {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub layers: usize,
    pub hidden: usize,
    pub d_g: usize,
    pub heads: usize,
    pub dropout: f64,
    pub d_in: usize,
    pub neighborhood: Neighborhood,
    pub activation: Activation,
    pub featurizer: FeaturizerKind,
    pub feature_seed: u64,
    pub node2vec: Node2VecConfig,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            kind: EncoderKind::Gcn,
            layers: 2,
            hidden: 128,
            d_g: 128,
            heads: 4,
            dropout: 0.1,
            d_in: 256,
            neighborhood: Neighborhood::Symmetric,
            activation: Activation::Gelu,
            featurizer: FeaturizerKind::HashedBagOfTokens,
            feature_seed: 0,
            node2vec: Node2VecConfig::default(),
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.d_g == 0 || self.heads == 0 {
            return Err(Error::Config(
                "encoder layers, hidden, d_g and heads must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.kind == EncoderKind::Gat
            && self.layers > 1
            && !self.hidden.is_multiple_of(self.heads)
        {
            return Err(Error::Config(format!(
                "GAT hidden width {} is not divisible by {} heads",
                self.hidden, self.heads
            )));
        }
        Ok(())
    }

    fn layer_dims(&self, i: usize, d_in: usize) -> (usize, usize) {
        let input = if i == 0 { d_in } else { self.hidden };
        let output = if i + 1 == self.layers {
            self.d_g
        } else {
            self.hidden
        };
        (input, output)
    }
}

/// A CFG with its features and the constant operators the encoders need.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedGraph {
    pub sample_id: String,
    pub method_name: String,
    pub edges: Vec<(usize, usize)>,
    pub features: Matrix,
    pub gcn_op: Matrix,
    pub mean_op: Matrix,
    /// Neighbors plus self, used by attention.
    pub scope_mask: Matrix,
    /// Frozen Node2Vec node vectors when the encoder is `node2vec`.
    pub node_vectors: Option<Matrix>,
}

impl PreparedGraph {
    pub fn n(&self) -> usize {
        self.features.nrows()
    }
}

pub fn prepare(
    g: &ControlFlowGraph,
    cfg: &EncoderConfig,
    features: NodeFeatures,
) -> Result<PreparedGraph> {
    let n = g.len();
    if features.matrix.nrows() != n {
        return Err(Error::shape(
            "prepare",
            format!("{n} feature rows"),
            features.matrix.nrows().to_string(),
        ));
    }
    let mut scope_mask = neighbor_matrix(n, &g.edges, cfg.neighborhood);
    for i in 0..n {
        scope_mask[[i, i]] = 1.0;
    }
    let node_vectors = if cfg.kind == EncoderKind::Node2vec {
        let n2v = Node2VecConfig {
            dims: cfg.d_g,
            ..cfg.node2vec
        };
        Some(node2vec_embed(g, &n2v)?.vectors)
    } else {
        None
    };
    Ok(PreparedGraph {
        sample_id: g.sample_id.clone(),
        method_name: g.method_name.clone(),
        edges: g.edges.clone(),
        features: features.matrix,
        gcn_op: gcn_operator(n, &g.edges, cfg.neighborhood),
        mean_op: mean_operator(n, &g.edges, cfg.neighborhood),
        scope_mask,
        node_vectors,
    })
}

/// [`prepare`] with hashed bag-of-tokens features.
pub fn prepare_hashed(g: &ControlFlowGraph, cfg: &EncoderConfig) -> Result<PreparedGraph> {
    let x = featurize_hashed(g, cfg.d_in, cfg.feature_seed)?;
    prepare(g, cfg, x)
}

fn head_name(layer: usize, head: usize, part: &str) -> String {
    format!("enc.{layer}.h{head}.{part}")
}

/// Adds Xavier-initialized encoder weights to `store` (none for Node2Vec).
pub fn init_params(
    store: &mut ParamStore,
    cfg: &EncoderConfig,
    d_in: usize,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    cfg.validate()?;
    for i in 0..cfg.layers {
        let (fin, fout) = cfg.layer_dims(i, d_in);
        match cfg.kind {
            EncoderKind::Gcn => store.insert(format!("enc.{i}.w"), xavier_uniform(rng, fin, fout)),
            EncoderKind::Sage => {
                store.insert(format!("enc.{i}.w"), xavier_uniform(rng, 2 * fin, fout))
            }
            EncoderKind::Gat => {
                let last = i + 1 == cfg.layers;
                let width = if last { fout } else { fout / cfg.heads };
                for k in 0..cfg.heads {
                    store.insert(head_name(i, k, "w"), xavier_uniform(rng, fin, width));
                    store.insert(head_name(i, k, "a_src"), xavier_uniform(rng, width, 1));
                    store.insert(head_name(i, k, "a_dst"), xavier_uniform(rng, width, 1));
                }
            }
            EncoderKind::Node2vec => {}
        }
    }
    Ok(())
}

fn dropout(tape: &mut Tape, v: Var, p: f64, rng: Option<&mut ChaCha8Rng>) -> Result<Var> {
    match rng {
        Some(rng) if p > 0.0 => {
            let keep = 1.0 / (1.0 - p);
            let mask = tape
                .value(v)
                .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep });
            tape.dropout_with_mask(v, mask)
        }
        _ => Ok(v),
    }
}

/// Node embeddings `Z` for `pg`, reading features from `x` so callers can
/// differentiate with respect to them. Dropout runs only when `rng` is given.
pub fn encode_nodes(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &EncoderConfig,
    pg: &PreparedGraph,
    x: Var,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<Var> {
    if let Some(v) = &pg.node_vectors {
        return Ok(tape.constant(v.clone()));
    }
    let mut h = x;
    for i in 0..cfg.layers {
        let last = i + 1 == cfg.layers;
        let act = if last { None } else { Some(cfg.activation) };
        h = match cfg.kind {
            EncoderKind::Gcn => {
                let w = tape.param(store, &format!("enc.{i}.w"))?;
                gcn_layer(tape, h, &pg.gcn_op, w, act)?
            }
            EncoderKind::Sage => {
                let w = tape.param(store, &format!("enc.{i}.w"))?;
                sage_layer(tape, h, &pg.mean_op, w, act)?
            }
            EncoderKind::Gat => {
                let mut heads = Vec::with_capacity(cfg.heads);
                for k in 0..cfg.heads {
                    heads.push(GatHead {
                        w: tape.param(store, &head_name(i, k, "w"))?,
                        a_src: tape.param(store, &head_name(i, k, "a_src"))?,
                        a_dst: tape.param(store, &head_name(i, k, "a_dst"))?,
                    });
                }
                gat_layer(tape, h, &pg.scope_mask, &heads, !last, act)?
            }
            EncoderKind::Node2vec => unreachable!("handled above"),
        };
        if !last {
            h = dropout(tape, h, cfg.dropout, rng.as_deref_mut())?;
        }
    }
    Ok(h)
}

/// Global mean pooling.
pub fn pool(tape: &mut Tape, z: Var) -> Result<Var> {
    tape.mean_rows(z)
}

/// `h_G` for `pg` in evaluation mode.
pub fn encode_graph(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &EncoderConfig,
    pg: &PreparedGraph,
) -> Result<Var> {
    let x = tape.constant(pg.features.clone());
    let z = encode_nodes(tape, store, cfg, pg, x, None)?;
    pool(tape, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::java::{parse_and_build, SourceUnit};
    use ndarray::array;
    use rand::SeedableRng;

    fn graph() -> ControlFlowGraph {
        let unit =
            SourceUnit::new("T.java", "int f(int x){if(x>0){x=1;}else{x=2;}return x;}").unwrap();
        parse_and_build(&unit).unwrap().remove(0)
    }

    #[test]
    fn every_kind_pools_to_d_g() {
        for kind in [
            EncoderKind::Gcn,
            EncoderKind::Gat,
            EncoderKind::Sage,
            EncoderKind::Node2vec,
        ] {
            let cfg = EncoderConfig {
                kind,
                d_in: 32,
                ..Default::default()
            };
            let pg = prepare_hashed(&graph(), &cfg).unwrap();
            let mut store = ParamStore::new();
            init_params(&mut store, &cfg, 32, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            let mut tape = Tape::new();
            let h = encode_graph(&mut tape, &store, &cfg, &pg).unwrap();
            assert_eq!(tape.shape(h), (1, 128), "{kind:?}");
        }
    }

    #[test]
    fn pooling_examples() {
        let mut t = Tape::new();
        let z = t.constant(array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let h = pool(&mut t, z).unwrap();
        assert_eq!(t.value(h), &array![[0.5, 0.5, 0.0]]);
        let z = t.constant(array![[2.0, -1.0], [-2.0, 1.0]]);
        let h = pool(&mut t, z).unwrap();
        assert_eq!(t.value(h), &array![[0.0, 0.0]]);
    }

    #[test]
    fn gat_rejects_uneven_heads() {
        let cfg = EncoderConfig {
            kind: EncoderKind::Gat,
            hidden: 10,
            heads: 4,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn dropout_only_in_training() {
        let cfg = EncoderConfig {
            d_in: 32,
            dropout: 0.5,
            ..Default::default()
        };
        let pg = prepare_hashed(&graph(), &cfg).unwrap();
        let mut store = ParamStore::new();
        init_params(&mut store, &cfg, 32, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let run = |rng: Option<&mut ChaCha8Rng>| {
            let mut t = Tape::new();
            let x = t.constant(pg.features.clone());
            let z = encode_nodes(&mut t, &store, &cfg, &pg, x, rng).unwrap();
            t.value(z).clone()
        };
        assert_eq!(run(None), run(None));
        assert_ne!(run(None), run(Some(&mut ChaCha8Rng::seed_from_u64(3))));
    }
}
