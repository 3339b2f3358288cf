//! Mini-batch training with Adam and best-validation model selection.

use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Split;
use super::metrics::Metrics;
use super::FileRecord;
use crate::encoders::EncoderConfig;
use crate::error::{Error, Result};
use crate::fusion::{ForwardOptions, FusionConfig, Model, ModelConfig, Sample};
use crate::objectives::{
    balanced_pos_weight, bce_with_logits, info_nce, laplacian_reg, total_loss, LossConfig,
    LossParts,
};
use crate::tensor::{sigmoid, Adam, AdamConfig, Matrix, Tape, NORM_EPS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub encoder: EncoderConfig,
    pub fusion: FusionConfig,
    pub loss: LossConfig,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            adam: AdamConfig::default(),
            seed: 7,
            encoder: EncoderConfig::default(),
            fusion: FusionConfig::default(),
            loss: LossConfig::default(),
            patience: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return Err(Error::Config(
                "epochs, batch_size and patience must be positive".into(),
            ));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        self.encoder.validate()?;
        self.loss.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub cls_loss: f64,
    pub nce_loss: f64,
    pub lap_loss: f64,
    /// Method-level accuracy of the training forward passes.
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
    pub val_f1: Option<f64>,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best epoch.
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub pos_weight: f64,
}

/// JSON lines, one record per epoch.
pub fn history_jsonl(history: &[EpochRecord]) -> Result<String> {
    let mut out = String::new();
    for r in history {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Groups `items` into batches of at most `size` with no sample id twice in
/// a batch. Items that would collide wait for a later batch.
pub fn batches_without_duplicates<'a>(
    items: &[(usize, usize)],
    ids: &[&'a str],
    size: usize,
) -> Vec<Vec<(usize, usize)>> {
    let mut queue: VecDeque<(usize, usize)> = items.iter().copied().collect();
    let mut out = Vec::new();
    while !queue.is_empty() {
        let mut batch = Vec::with_capacity(size);
        let mut seen: HashSet<&'a str> = HashSet::new();
        let mut rest = VecDeque::with_capacity(queue.len());
        while let Some(it) = queue.pop_front() {
            if batch.len() < size && seen.insert(ids[it.0]) {
                batch.push(it);
            } else {
                rest.push_back(it);
            }
        }
        queue = rest;
        out.push(batch);
    }
    out
}

/// File-level `ŷ`: the maximum over the file's methods.
pub fn file_scores(model: &Model, records: &[&FileRecord]) -> Result<Vec<f64>> {
    records
        .par_iter()
        .map(|r| {
            let samples: Vec<Sample<'_>> = r
                .prepared
                .iter()
                .map(|g| Sample {
                    graph: g,
                    h_l: &r.h_l,
                })
                .collect();
            let probs = model.predict(&samples)?;
            Ok(probs.into_iter().fold(0.0, f64::max))
        })
        .collect()
}

pub fn evaluate(model: &Model, records: &[&FileRecord]) -> Result<Metrics> {
    let scores = file_scores(model, records)?;
    let labels: Vec<u8> = records.iter().map(|r| r.label).collect();
    Ok(Metrics::from_predictions(&scores, &labels))
}

pub fn evaluate_split(model: &Model, records: &[FileRecord], split: Split) -> Result<Metrics> {
    let sel: Vec<&FileRecord> = records.iter().filter(|r| r.split == split).collect();
    evaluate(model, &sel)
}

fn file_bce(scores: &[f64], labels: &[u8]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(1e-12, 1.0 - 1e-12);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / scores.len().max(1) as f64
}

struct StepLosses {
    total: f64,
    cls: f64,
    nce: f64,
    lap: f64,
    correct: usize,
}

/// One optimization step on `batch`.
fn step(
    model: &mut Model,
    adam: &mut Adam,
    batch: &[Sample<'_>],
    labels: &[f64],
    loss_cfg: &LossConfig,
    pos_weight: f64,
    rng: &mut ChaCha8Rng,
) -> Result<StepLosses> {
    let mut tape = Tape::new();
    let opts = ForwardOptions {
        node_level: loss_cfg.lambda_lap > 0.0,
        track_features: false,
    };
    let out = model.forward(&mut tape, batch, opts, Some(rng))?;
    let cls = bce_with_logits(&mut tape, out.logits, labels, pos_weight)?;
    let nce = if loss_cfg.lambda_nce > 0.0 {
        let g = tape.l2_normalize_rows(out.g_hat, NORM_EPS);
        let l = tape.l2_normalize_rows(out.l_hat, NORM_EPS);
        info_nce(&mut tape, g, l, loss_cfg.tau)?
    } else {
        tape.constant(Matrix::zeros((1, 1)))
    };
    let lap = if loss_cfg.lambda_lap > 0.0 {
        let pairs: Vec<_> = out
            .node_h
            .iter()
            .zip(batch)
            .map(|(&h, s)| (h, s.graph.edges.as_slice()))
            .collect();
        laplacian_reg(&mut tape, &pairs)?
    } else {
        tape.constant(Matrix::zeros((1, 1)))
    };
    let loss = total_loss(&mut tape, LossParts { cls, nce, lap }, loss_cfg)?;
    let grads = tape.backward(loss)?.params(&tape);
    adam.step(&mut model.params, &grads);
    let correct = tape
        .value(out.logits)
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| (sigmoid(s) >= 0.5) == (y == 1.0))
        .count();
    Ok(StepLosses {
        total: tape.scalar(loss),
        cls: tape.scalar(cls),
        nce: tape.scalar(nce),
        lap: tape.scalar(lap),
        correct,
    })
}

/// Trains on the `train` split and selects the epoch with the best `val`
/// accuracy (ties go to lower validation loss, then to the earlier epoch).
/// Without validation files, selection uses training loss.
pub fn train(records: &[FileRecord], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train_files: Vec<usize> = (0..records.len())
        .filter(|&i| records[i].split == Split::Train)
        .collect();
    if train_files.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let val: Vec<&FileRecord> = records.iter().filter(|r| r.split == Split::Val).collect();
    let val_labels: Vec<u8> = val.iter().map(|r| r.label).collect();

    let first = &records[train_files[0]];
    let d_in = first.prepared[0].features.ncols();
    let model_cfg = ModelConfig {
        encoder: cfg.encoder.clone(),
        fusion: cfg.fusion.clone(),
        d_l: first.h_l.len(),
    };
    let mut model = Model::init(model_cfg, d_in, cfg.seed)?;
    let mut adam = Adam::new(cfg.adam);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));

    let instances: Vec<(usize, usize)> = train_files
        .iter()
        .flat_map(|&f| (0..records[f].prepared.len()).map(move |m| (f, m)))
        .collect();
    let inst_labels: Vec<u8> = instances.iter().map(|&(f, _)| records[f].label).collect();
    let pos_weight = cfg
        .loss
        .pos_weight
        .unwrap_or_else(|| balanced_pos_weight(&inst_labels));
    let ids: Vec<&str> = records.iter().map(|r| r.sample_id.as_str()).collect();

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(Model, usize, f64, f64)> = None;
    for epoch in 1..=cfg.epochs {
        let mut order = instances.clone();
        order.shuffle(&mut shuffle_rng);
        let (mut tot, mut cls, mut nce, mut lap, mut correct, mut steps) =
            (0.0, 0.0, 0.0, 0.0, 0, 0);
        for batch in batches_without_duplicates(&order, &ids, cfg.batch_size) {
            let samples: Vec<Sample<'_>> = batch
                .iter()
                .map(|&(f, m)| Sample {
                    graph: &records[f].prepared[m],
                    h_l: &records[f].h_l,
                })
                .collect();
            let labels: Vec<f64> = batch
                .iter()
                .map(|&(f, _)| f64::from(records[f].label))
                .collect();
            let s = step(
                &mut model,
                &mut adam,
                &samples,
                &labels,
                &cfg.loss,
                pos_weight,
                &mut dropout_rng,
            )?;
            tot += s.total;
            cls += s.cls;
            nce += s.nce;
            lap += s.lap;
            correct += s.correct;
            steps += 1;
        }
        let n = steps as f64;
        let (val_accuracy, val_f1, val_loss) = if val.is_empty() {
            (None, None, None)
        } else {
            let scores = file_scores(&model, &val)?;
            let m = Metrics::from_predictions(&scores, &val_labels);
            (
                Some(m.accuracy),
                Some(m.f1),
                Some(file_bce(&scores, &val_labels)),
            )
        };
        let rec = EpochRecord {
            epoch,
            train_loss: tot / n,
            cls_loss: cls / n,
            nce_loss: nce / n,
            lap_loss: lap / n,
            train_accuracy: correct as f64 / instances.len() as f64,
            val_accuracy,
            val_f1,
            val_loss,
        };
        log::debug!("epoch {epoch}: {rec:?}");
        let (acc, loss) = match (val_accuracy, val_loss) {
            (Some(a), Some(l)) => (a, l),
            _ => (0.0, rec.train_loss),
        };
        history.push(rec);
        let improved = match &best {
            None => true,
            Some((_, _, ba, bl)) => acc > *ba || (acc == *ba && loss < *bl),
        };
        if improved {
            best = Some((model.clone(), epoch, acc, loss));
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
        if epoch - best_epoch >= cfg.patience {
            log::info!("early stop at epoch {epoch}; best epoch {best_epoch}");
            break;
        }
    }
    let (model, best_epoch, _, _) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        pos_weight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_skip_duplicate_ids() {
        let ids = ["a", "b"];
        let items = [(0, 0), (0, 1), (1, 0), (0, 2)];
        let b = batches_without_duplicates(&items, &ids, 3);
        assert_eq!(b, vec![vec![(0, 0), (1, 0)], vec![(0, 1)], vec![(0, 2)]]);
    }

    #[test]
    fn file_bce_matches_formula() {
        assert!((file_bce(&[0.5], &[1]) - std::f64::consts::LN_2).abs() < 1e-12);
    }
}
