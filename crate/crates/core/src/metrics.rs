//! Confusion matrices, per-class Jaccard index and overall accuracy.

use std::fmt::Write as _;

use crate::data::{LabelMap, Palette};
use crate::error::{Error, Result};

/// Counts indexed `[ground truth][prediction]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::argument("a confusion matrix needs at least one class"));
        }
        Ok(ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        })
    }

    pub fn from_labels(prediction: &[u8], truth: &[u8], classes: usize) -> Result<Self> {
        let mut m = ConfusionMatrix::new(classes)?;
        m.accumulate(prediction, truth)?;
        Ok(m)
    }

    pub fn from_maps(prediction: &LabelMap, truth: &LabelMap, classes: usize) -> Result<Self> {
        if !prediction.same_size(truth) {
            return Err(Error::shape(format!(
                "prediction is {}×{} but ground truth is {}×{}",
                prediction.width(),
                prediction.height(),
                truth.width(),
                truth.height()
            )));
        }
        Self::from_labels(prediction.labels(), truth.labels(), classes)
    }

    /// Adds label pairs; on error the matrix is unchanged.
    pub fn accumulate(&mut self, prediction: &[u8], truth: &[u8]) -> Result<()> {
        if prediction.len() != truth.len() {
            return Err(Error::shape(format!(
                "{} predicted labels against {} ground-truth labels",
                prediction.len(),
                truth.len()
            )));
        }
        let k = self.classes;
        if let Some((i, &l)) = prediction.iter().chain(truth).enumerate().find(|(_, &l)| l as usize >= k) {
            let which = if i < prediction.len() { "prediction" } else { "ground truth" };
            return Err(Error::data(format!(
                "{which} label {l} at index {} is outside 0..{k}",
                i % prediction.len().max(1)
            )));
        }
        for (&p, &t) in prediction.iter().zip(truth) {
            self.counts[t as usize * k + p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::shape(format!(
                "cannot merge {}-class and {}-class confusion matrices",
                self.classes, other.classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, prediction: usize) -> u64 {
        self.counts[truth * self.classes + prediction]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn diagonal(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    /// `(true positives, false positives, false negatives)` of class `c`.
    pub fn class_counts(&self, c: usize) -> (u64, u64, u64) {
        let tp = self.get(c, c);
        let predicted: u64 = (0..self.classes).map(|t| self.get(t, c)).sum();
        let actual: u64 = (0..self.classes).map(|p| self.get(c, p)).sum();
        (tp, predicted - tp, actual - tp)
    }

    /// TP / (TP + FP + FN), or `None` when the class appears in neither
    /// prediction nor ground truth.
    pub fn jaccard(&self, c: usize) -> Option<f64> {
        let (tp, fp, fn_) = self.class_counts(c);
        let union = tp + fp + fn_;
        (union > 0).then(|| tp as f64 / union as f64)
    }

    pub fn per_class_jaccard(&self) -> Vec<Option<f64>> {
        (0..self.classes).map(|c| self.jaccard(c)).collect()
    }

    /// Mean over classes with a defined Jaccard index.
    pub fn mean_jaccard(&self) -> Result<f64> {
        let defined: Vec<f64> = self.per_class_jaccard().into_iter().flatten().collect();
        if defined.is_empty() {
            return Err(Error::argument("mean Jaccard of an empty confusion matrix"));
        }
        Ok(defined.iter().sum::<f64>() / defined.len() as f64)
    }

    /// Jaccard index of the pooled TP/FP/FN counts over all classes.
    pub fn micro_jaccard(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::argument("micro Jaccard of an empty confusion matrix"));
        }
        let tp = self.diagonal();
        let wrong = total - tp;
        Ok(tp as f64 / (tp + 2 * wrong) as f64)
    }

    pub fn overall_accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::argument("overall accuracy of an empty confusion matrix"));
        }
        Ok(self.diagonal() as f64 / total as f64)
    }

    pub fn summary(&self) -> Result<Evaluation> {
        Ok(Evaluation {
            mean_jaccard: self.mean_jaccard()?,
            micro_jaccard: self.micro_jaccard()?,
            overall_accuracy: self.overall_accuracy()?,
            per_class: self.per_class_jaccard(),
        })
    }

    /// CSV with one row per class and summary rows at the bottom. Class
    /// names come from `palette` when given.
    pub fn report_csv(&self, palette: Option<&Palette>) -> Result<String> {
        let summary = self.summary()?;
        let mut out = String::from("class,name,tp,fp,fn,jaccard\n");
        for c in 0..self.classes {
            let (tp, fp, fn_) = self.class_counts(c);
            let name = palette.and_then(|p| p.name(c as u8)).unwrap_or("");
            let j = summary.per_class[c].map_or_else(|| "undefined".to_string(), |j| format!("{j:.6}"));
            let _ = writeln!(out, "{c},{name},{tp},{fp},{fn_},{j}");
        }
        let _ = writeln!(out, "mean_jaccard,,,,,{:.6}", summary.mean_jaccard);
        let _ = writeln!(out, "micro_jaccard,,,,,{:.6}", summary.micro_jaccard);
        let _ = writeln!(out, "overall_accuracy,,,,,{:.6}", summary.overall_accuracy);
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub mean_jaccard: f64,
    pub micro_jaccard: f64,
    pub overall_accuracy: f64,
    pub per_class: Vec<Option<f64>>,
}
