//! Modality and loss-term ablations over several seeds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Split;
use super::train::{evaluate_split, train, TrainConfig};
use super::FileRecord;
use crate::error::Result;
use crate::fusion::Modality;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    NoGraphs,
    NoSemantics,
    NoInfoNce,
    NoLaplacian,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::NoGraphs,
        Variant::NoSemantics,
        Variant::NoInfoNce,
        Variant::NoLaplacian,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "Full (Graph + Semantics + Losses)",
            Variant::NoGraphs => "No Graphs",
            Variant::NoSemantics => "No Semantics",
            Variant::NoInfoNce => "No InfoNCE",
            Variant::NoLaplacian => "No Laplacian",
        }
    }

    /// The training config this variant runs with.
    pub fn apply(self, base: &TrainConfig) -> TrainConfig {
        let mut cfg = base.clone();
        match self {
            Variant::Full => {}
            Variant::NoGraphs => cfg.fusion.modality = Modality::SemanticOnly,
            Variant::NoSemantics => cfg.fusion.modality = Modality::GraphOnly,
            Variant::NoInfoNce => cfg.loss.lambda_nce = 0.0,
            Variant::NoLaplacian => cfg.loss.lambda_lap = 0.0,
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    pub base: TrainConfig,
    pub seeds: Vec<u64>,
    /// Split the accuracies are measured on.
    pub split: Split,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            base: TrainConfig::default(),
            seeds: vec![1, 2, 3],
            split: Split::Val,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub label: String,
    pub config: TrainConfig,
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Full-model mean minus this row's mean, in accuracy points; `None` for the full row.
    pub drop: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub split: Split,
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, v: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == v)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Model Variant | Accuracy (%) | Drop By |\n|---|---|---|\n");
        for r in &self.rows {
            let drop = r
                .drop
                .map_or("–".to_string(), |d| format!("{:.2}", 100.0 * d));
            out.push_str(&format!(
                "| {} | {:.2} | {} |\n",
                r.label,
                100.0 * r.mean_accuracy,
                drop
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("Model Variant,Accuracy (%),Drop By\n");
        for r in &self.rows {
            let drop = r
                .drop
                .map_or("–".to_string(), |d| format!("{:.2}", 100.0 * d));
            out.push_str(&format!(
                "\"{}\",{:.2},{}\n",
                r.label,
                100.0 * r.mean_accuracy,
                drop
            ));
        }
        out
    }
}

/// Trains every variant under every seed. Runs are independent, so they go
/// through the rayon pool; results do not depend on scheduling.
pub fn ablate(records: &[FileRecord], cfg: &AblationConfig) -> Result<AblationTable> {
    let runs: Vec<(Variant, u64)> = Variant::ALL
        .iter()
        .flat_map(|&v| cfg.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let accs: Vec<f64> = runs
        .par_iter()
        .map(|&(v, seed)| {
            let mut tc = v.apply(&cfg.base);
            tc.seed = seed;
            let out = train(records, &tc)?;
            let acc = evaluate_split(&out.model, records, cfg.split)?.accuracy;
            log::info!("ablation {} seed {seed}: {acc:.4}", v.label());
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let k = cfg.seeds.len();
    let mut rows: Vec<AblationRow> = Variant::ALL
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let accuracies = accs[i * k..(i + 1) * k].to_vec();
            let mean_accuracy = accuracies.iter().sum::<f64>() / k.max(1) as f64;
            AblationRow {
                variant: v,
                label: v.label().to_string(),
                config: v.apply(&cfg.base),
                accuracies,
                mean_accuracy,
                drop: None,
            }
        })
        .collect();
    let full = rows[0].mean_accuracy;
    for r in rows.iter_mut().skip(1) {
        r.drop = Some(full - r.mean_accuracy);
    }
    Ok(AblationTable {
        split: cfg.split,
        seeds: cfg.seeds.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_ablations_zero_their_lambda() {
        let base = TrainConfig::default();
        assert_eq!(Variant::NoInfoNce.apply(&base).loss.lambda_nce, 0.0);
        assert_eq!(Variant::NoLaplacian.apply(&base).loss.lambda_lap, 0.0);
        assert_eq!(
            Variant::NoGraphs.apply(&base).fusion.modality,
            Modality::SemanticOnly
        );
        assert_eq!(Variant::Full.apply(&base), base);
    }

    #[test]
    fn full_row_first_with_dash() {
        let row = |v: Variant, acc: f64, drop| AblationRow {
            variant: v,
            label: v.label().into(),
            config: TrainConfig::default(),
            accuracies: vec![acc],
            mean_accuracy: acc,
            drop,
        };
        let t = AblationTable {
            split: Split::Val,
            seeds: vec![1],
            rows: vec![
                row(Variant::Full, 0.9, None),
                row(Variant::NoGraphs, 0.8, Some(0.1)),
            ],
        };
        let md = t.to_markdown();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[0], "| Model Variant | Accuracy (%) | Drop By |");
        assert_eq!(
            lines[2],
            "| Full (Graph + Semantics + Losses) | 90.00 | – |"
        );
        assert_eq!(lines[3], "| No Graphs | 80.00 | 10.00 |");
    }
}
