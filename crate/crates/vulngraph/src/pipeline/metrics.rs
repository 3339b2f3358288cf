use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_prediction: f64,
    pub positive_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    pub calibration: Vec<CalibrationBin>,
}

pub const THRESHOLD: f64 = 0.5;
const BINS: usize = 10;

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    /// Precision, recall and F1 from confusion counts, with `0/0 = 0`.
    pub fn from_counts(tp: usize, tn: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            accuracy: ratio(tp + tn, tp + tn + fp + fn_),
            precision,
            recall,
            f1,
            tp,
            tn,
            fp,
            fn_,
            calibration: Vec::new(),
        }
    }

    /// Thresholds `preds` at 0.5 (`ŷ ≥ 0.5` is vulnerable).
    pub fn from_predictions(preds: &[f64], labels: &[u8]) -> Self {
        assert_eq!(preds.len(), labels.len(), "one prediction per label");
        let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
        for (&p, &y) in preds.iter().zip(labels) {
            match (p >= THRESHOLD, y == 1) {
                (true, true) => tp += 1,
                (false, false) => tn += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
            }
        }
        let mut m = Self::from_counts(tp, tn, fp, fn_);
        m.calibration = (0..BINS)
            .map(|b| {
                let lo = b as f64 / BINS as f64;
                let hi = (b + 1) as f64 / BINS as f64;
                let members: Vec<(f64, u8)> = preds
                    .iter()
                    .zip(labels)
                    .filter(|(&p, _)| p >= lo && (p < hi || (b + 1 == BINS && p <= hi)))
                    .map(|(&p, &y)| (p, y))
                    .collect();
                let count = members.len();
                let mean_prediction = if count == 0 {
                    0.0
                } else {
                    members.iter().map(|m| m.0).sum::<f64>() / count as f64
                };
                let positives = members.iter().filter(|m| m.1 == 1).count();
                CalibrationBin {
                    lo,
                    hi,
                    count,
                    mean_prediction,
                    positive_rate: ratio(positives, count),
                }
            })
            .collect();
        m
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `metric,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (k, v) in [
            ("accuracy", self.accuracy),
            ("precision", self.precision),
            ("recall", self.recall),
            ("f1", self.f1),
        ] {
            out.push_str(&format!("{k},{v:.6}\n"));
        }
        for (k, v) in [
            ("tp", self.tp),
            ("tn", self.tn),
            ("fp", self.fp),
            ("fn", self.fn_),
        ] {
            out.push_str(&format!("{k},{v}\n"));
        }
        for b in &self.calibration {
            out.push_str(&format!(
                "calibration[{:.1},{:.1}),{} {:.6} {:.6}\n",
                b.lo, b.hi, b.count, b.mean_prediction, b.positive_rate
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_built_confusion() {
        let m = Metrics::from_counts(2, 2, 1, 0);
        assert_eq!(m.precision, 2.0 / 3.0);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.accuracy, 0.8);
        assert!((m.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn just_below_threshold_on_all_vulnerable() {
        let m = Metrics::from_predictions(&[0.4999; 4], &[1; 4]);
        assert_eq!((m.accuracy, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn calibration_bins_cover_everything() {
        let preds = [0.0, 0.05, 0.5, 0.95, 1.0];
        let m = Metrics::from_predictions(&preds, &[0, 0, 1, 1, 1]);
        assert_eq!(
            m.calibration.iter().map(|b| b.count).sum::<usize>(),
            preds.len()
        );
        assert_eq!(m.accuracy, 1.0);
    }
}
