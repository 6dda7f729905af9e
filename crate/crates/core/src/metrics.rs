//! Classification accuracy, expected calibration error over 20 equal-width
//! bins, and reliability-diagram data.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::{LabeledDataset, Provenance};
use crate::error::{Error, Result};
use crate::numerics::{forward, ModelParams, Probs};

pub const N_BINS: usize = 20;

/// One prediction: argmax class (ties broken toward the lowest index), its
/// softmax probability, and the true label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub predicted: usize,
    pub confidence: f64,
    pub true_label: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    pub predictions: Vec<Prediction>,
}

impl PredictionSet {
    pub fn from_probs(probs: &[f64], true_label: usize) -> Prediction {
        let mut best = 0;
        for (i, &v) in probs.iter().enumerate() {
            if v > probs[best] {
                best = i;
            }
        }
        Prediction {
            predicted: best + 1,
            confidence: probs[best],
            true_label,
        }
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }
}

/// One reliability bin over [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_confidence: f64,
    pub accuracy: f64,
}

/// 20 equal-width bins; a sample with confidence c falls in bin
/// ceil(20 c), with c = 0 mapped to bin 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityBins {
    pub bins: Vec<Bin>,
}

impl ReliabilityBins {
    /// Write the reliability table as CSV with columns
    /// bin_low, bin_high, count, mean_confidence, accuracy.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count,mean_confidence,accuracy\n");
        for b in &self.bins {
            writeln!(
                out,
                "{},{},{},{},{}",
                b.lo, b.hi, b.count, b.mean_confidence, b.accuracy
            )
            .expect("string write");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn bin_index(confidence: f64) -> usize {
    if confidence <= 0.0 {
        return 0;
    }
    let idx = (confidence * N_BINS as f64).ceil() as usize;
    idx.clamp(1, N_BINS) - 1
}

/// Fraction of predictions matching the true label.
pub fn accuracy(preds: &PredictionSet) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::Usage("accuracy of an empty prediction set".into()));
    }
    let correct = preds
        .predictions
        .iter()
        .filter(|p| p.predicted == p.true_label)
        .count();
    Ok(correct as f64 / preds.len() as f64)
}

/// Expected calibration error: count-weighted mean absolute gap between
/// per-bin accuracy and mean confidence. Empty bins contribute 0.
pub fn ece(preds: &PredictionSet) -> Result<(f64, ReliabilityBins)> {
    if preds.is_empty() {
        return Err(Error::Usage("calibration of an empty prediction set".into()));
    }
    let mut counts = [0usize; N_BINS];
    let mut conf_sums = [0.0f64; N_BINS];
    let mut correct = [0usize; N_BINS];
    for p in &preds.predictions {
        let b = bin_index(p.confidence);
        counts[b] += 1;
        conf_sums[b] += p.confidence;
        if p.predicted == p.true_label {
            correct[b] += 1;
        }
    }
    let n = preds.len() as f64;
    let mut total = 0.0;
    let mut bins = Vec::with_capacity(N_BINS);
    for b in 0..N_BINS {
        let (mean_confidence, acc) = if counts[b] > 0 {
            let mc = conf_sums[b] / counts[b] as f64;
            let a = correct[b] as f64 / counts[b] as f64;
            total += (counts[b] as f64 / n) * (a - mc).abs();
            (mc, a)
        } else {
            (0.0, 0.0)
        };
        bins.push(Bin {
            lo: b as f64 / N_BINS as f64,
            hi: (b + 1) as f64 / N_BINS as f64,
            count: counts[b],
            mean_confidence,
            accuracy: acc,
        });
    }
    Ok((total, ReliabilityBins { bins }))
}

/// Assembled evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub ece: f64,
    pub bins: ReliabilityBins,
    /// Per-class accuracy, indexed by class - 1; classes absent from the
    /// test set report 0 correct of 0.
    pub per_class: Vec<(usize, usize)>,
    pub predictions: PredictionSet,
}

/// Predict every test sample and compute accuracy, calibration, and
/// per-class counts. The test set must be purely in-distribution.
pub fn evaluate(params: &ModelParams, test: &LabeledDataset) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::Usage("evaluation on an empty test set".into()));
    }
    if test.provenance.iter().any(|&p| p == Provenance::Ood) {
        return Err(Error::Usage(
            "test set contains contaminated samples; evaluation requires in-distribution data"
                .into(),
        ));
    }
    let mut predictions = PredictionSet::default();
    let mut per_class = vec![(0usize, 0usize); test.k];
    for i in 0..test.len() {
        let trace = forward(params, test.features.row(i))?;
        let probs = Probs::from_logits(trace.logits())?;
        let pred = PredictionSet::from_probs(&probs.values, test.labels[i]);
        let cls = &mut per_class[test.labels[i] - 1];
        cls.1 += 1;
        if pred.predicted == pred.true_label {
            cls.0 += 1;
        }
        predictions.predictions.push(pred);
    }
    let acc = accuracy(&predictions)?;
    let (e, bins) = ece(&predictions)?;
    Ok(MetricsReport {
        accuracy: acc,
        ece: e,
        bins,
        per_class,
        predictions,
    })
}
