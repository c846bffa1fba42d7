//! Detection metrics with fake as the positive class, and clip-level
//! detection reports.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetIndex, Split};
use crate::error::{Error, Result};
use crate::ingest::Label;
use crate::train::{load_split, Checkpoint, Skipped};

pub const THRESHOLD: f64 = 0.5;

fn check_lengths(scores: &[f64], labels: &[Label]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Empty);
    }
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    Ok(())
}

pub fn predict_label(score: f64, threshold: f64) -> Label {
    if score >= threshold {
        Label::Fake
    } else {
        Label::Real
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn new(scores: &[f64], labels: &[Label], threshold: f64) -> Result<Self> {
        check_lengths(scores, labels)?;
        let mut c = Confusion { tp: 0, fp: 0, tn: 0, fn_: 0 };
        for (&s, &y) in scores.iter().zip(labels) {
            match (predict_label(s, threshold), y) {
                (Label::Fake, Label::Fake) => c.tp += 1,
                (Label::Fake, Label::Real) => c.fp += 1,
                (Label::Real, Label::Real) => c.tn += 1,
                (Label::Real, Label::Fake) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    pub fn error_rate(&self) -> f64 {
        (self.fp + self.fn_) as f64 / self.total() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionAccuracy {
    pub precision: f64,
    /// False when nothing was predicted fake; precision is then reported as 1.
    pub precision_defined: bool,
    pub accuracy: f64,
}

pub fn precision_accuracy(scores: &[f64], labels: &[Label], threshold: f64) -> Result<PrecisionAccuracy> {
    let c = Confusion::new(scores, labels, threshold)?;
    let predicted = c.tp + c.fp;
    Ok(PrecisionAccuracy {
        precision: if predicted == 0 { 1.0 } else { c.tp as f64 / predicted as f64 },
        precision_defined: predicted > 0,
        accuracy: c.accuracy(),
    })
}

/// Mann–Whitney AUC: probability a fake outscores a real clip, ties
/// counting one half.
pub fn auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|l| l.is_fake()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 {
        return Err(Error::SingleClass("real"));
    }
    if n_neg == 0 {
        return Err(Error::SingleClass("fake"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the midrank sum of positives keeps everything integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u128;
        let pos = order[i..=j].iter().filter(|&&k| labels[k].is_fake()).count() as u128;
        twice_rank_sum += twice_mid * pos;
        i = j + 1;
    }
    let (p, n) = (n_pos as u128, n_neg as u128);
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * n) as f64)
}

/// Average precision over the ranking by descending score, ties kept in
/// input order.
pub fn average_precision(scores: &[f64], labels: &[Label]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|l| l.is_fake()).count();
    if n_pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut tp = 0usize;
    let mut ap = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if labels[i].is_fake() {
            tp += 1;
            ap += tp as f64 / (k + 1) as f64;
        }
    }
    Ok(ap / n_pos as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub clip_id: String,
    /// Fake probability.
    pub score: f64,
    pub predicted: Label,
    pub label: Option<Label>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub count: usize,
    pub precision: f64,
    pub precision_defined: bool,
    pub accuracy: f64,
    /// Absent when no clip is fake.
    pub ap: Option<f64>,
    /// Absent when only one class is present.
    pub auc: Option<f64>,
}

impl Aggregates {
    pub fn compute(scores: &[f64], labels: &[Label], threshold: f64) -> Result<Self> {
        let pa = precision_accuracy(scores, labels, threshold)?;
        Ok(Aggregates {
            count: scores.len(),
            precision: pa.precision,
            precision_defined: pa.precision_defined,
            accuracy: pa.accuracy,
            ap: average_precision(scores, labels).ok(),
            auc: auc(scores, labels).ok(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub threshold: f64,
    pub split: Option<Split>,
    pub checkpoint: crate::train::TrainConfig,
    pub checkpoint_epoch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub rows: Vec<ReportRow>,
    /// Present iff every scored row is labeled and at least one was scored.
    pub aggregates: Option<Aggregates>,
    pub skipped: Vec<Skipped>,
    pub config: ReportConfig,
}

impl DetectionReport {
    pub fn from_rows(rows: Vec<ReportRow>, skipped: Vec<Skipped>, config: ReportConfig) -> Result<Self> {
        let labels: Option<Vec<Label>> = rows.iter().map(|r| r.label).collect();
        let aggregates = match labels {
            Some(labels) if !labels.is_empty() => {
                let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
                Some(Aggregates::compute(&scores, &labels, config.threshold)?)
            }
            _ => None,
        };
        Ok(DetectionReport {
            rows,
            aggregates,
            skipped,
            config,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let width = self.rows.iter().map(|r| r.clip_id.len()).max().unwrap_or(7).max(7);
        let _ = writeln!(out, "{:<width$}  {:>8}  {:<7}  {:<7}", "clip_id", "p_fake", "verdict", "label");
        for r in &self.rows {
            let label = r.label.map_or("-".to_string(), |l| l.to_string());
            let _ = writeln!(out, "{:<width$}  {:>8.4}  {:<7}  {:<7}", r.clip_id, r.score, r.predicted.to_string(), label);
        }
        for s in &self.skipped {
            let _ = writeln!(out, "{:<width$}  skipped  {}  {}", s.clip_id, s.code, s.message);
        }
        if let Some(a) = &self.aggregates {
            let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
            let flag = if a.precision_defined { "" } else { " (no fake predictions)" };
            let _ = writeln!(out, "clips      {}", a.count);
            let _ = writeln!(out, "precision  {:.4}{flag}", a.precision);
            let _ = writeln!(out, "accuracy   {:.4}", a.accuracy);
            let _ = writeln!(out, "AP         {}", opt(a.ap));
            let _ = writeln!(out, "AUC        {}", opt(a.auc));
        }
        out
    }
}

/// Scores every clip of `split` (all clips when `None`) on a pool of `jobs`
/// threads. Rows follow index order whatever the job count.
pub fn evaluate(ckpt: &Checkpoint, index: &DatasetIndex, split: Option<Split>, jobs: usize) -> Result<DetectionReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let (bundles, mut skipped) = load_split(index, split, &ckpt.config.extract)?;
        let scored: Vec<_> = bundles.par_iter().map(|(label, b)| (label, b, ckpt.predict(b))).collect();
        let mut rows = Vec::new();
        for (label, b, r) in scored {
            match r {
                Ok(p) => {
                    let score = p[0] as f64;
                    rows.push(ReportRow {
                        clip_id: b.clip_id.clone(),
                        score,
                        predicted: predict_label(score, THRESHOLD),
                        label: *label,
                    });
                }
                Err(e) => skipped.push(Skipped {
                    clip_id: b.clip_id.clone(),
                    code: e.code().to_string(),
                    message: e.to_string(),
                }),
            }
        }
        let order: std::collections::HashMap<&str, usize> =
            index.entries.iter().enumerate().map(|(i, e)| (e.clip_id.as_str(), i)).collect();
        skipped.sort_by_key(|s| order.get(s.clip_id.as_str()).copied().unwrap_or(usize::MAX));
        DetectionReport::from_rows(
            rows,
            skipped,
            ReportConfig {
                threshold: THRESHOLD,
                split,
                checkpoint: ckpt.config.clone(),
                checkpoint_epoch: ckpt.epoch,
            },
        )
    })
}
