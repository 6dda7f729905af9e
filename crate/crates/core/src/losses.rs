//! The confidence-weighted loss family, baseline losses, and the empirical
//! risk over a batch.
//!
//! Class labels are 1-based throughout (`y` in `1..=K`); probability vectors
//! are indexed so that entry `i` corresponds to class `i + 1`. All
//! probability inputs are assumed to come from [`Probs`], i.e. already
//! clamped to `[PROB_EPS, 1 - PROB_EPS]`.

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::{backward, forward, ModelParams, Probs};

/// Per-run loss selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossMethod {
    /// Confidence-weighted blend of the ground-truth and complementary losses.
    Gl,
    /// Plain cross-entropy on the annotated label.
    Standard,
    /// Negative learning: cross-entropy against the complementary label set.
    Nl,
    /// Fixed 0.5/0.5 blend of Standard and Nl.
    StandardPlusNl,
    /// Mean absolute error against the one-hot target.
    Mae,
    /// Soft bootstrapping with mixing weight beta in (0,1).
    Bootstrap(f64),
}

impl LossMethod {
    pub fn name(&self) -> &'static str {
        match self {
            LossMethod::Gl => "gl",
            LossMethod::Standard => "standard",
            LossMethod::Nl => "nl",
            LossMethod::StandardPlusNl => "standard_plus_nl",
            LossMethod::Mae => "mae",
            LossMethod::Bootstrap(_) => "bootstrap",
        }
    }
}

/// Whether gradients flow through the confidence weight of the blended loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConfidenceGradient {
    /// Differentiate the blended loss fully, confidence included.
    #[default]
    Full,
    /// Treat the per-sample confidence as a constant.
    Detached,
}

/// Options for the blended loss.
#[derive(Debug, Clone, Copy, Default)]
pub struct GlOptions {
    pub gradient: ConfidenceGradient,
    /// Synthetic override of the confidence weight; used to recover the
    /// Standard (C=1) and Nl (C=0) endpoints exactly.
    pub confidence_override: Option<f64>,
}

/// All pieces of the blended loss for one sample.
#[derive(Debug, Clone, Copy)]
pub struct SampleLossBreakdown {
    /// Confidence C(x,y), the predicted probability of the annotated label.
    pub confidence: f64,
    pub loss_g: f64,
    pub loss_c: f64,
    pub loss_m: f64,
    /// r = loss_m - loss_g, the amount by which the blend exceeds the
    /// ground-truth loss.
    pub regularizer: f64,
}

fn check_label(probs: &[f64], y: usize) -> Result<()> {
    if y == 0 || y > probs.len() {
        return Err(Error::IndexOutOfRange {
            index: y,
            k: probs.len(),
        });
    }
    Ok(())
}

/// Predicted probability of the annotated label.
pub fn confidence(probs: &[f64], y: usize) -> Result<f64> {
    check_label(probs, y)?;
    Ok(probs[y - 1])
}

/// Cross-entropy on the annotated label: -ln Q(y|x).
pub fn loss_ground_truth(probs: &[f64], y: usize) -> Result<f64> {
    check_label(probs, y)?;
    Ok(-probs[y - 1].ln())
}

/// The classes a sample with label `y` is asserted not to belong to:
/// {1..K} \ {y}.
pub fn complementary_set(y: usize, k: usize) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Usage("complementary set needs K >= 2".into()));
    }
    if y == 0 || y > k {
        return Err(Error::IndexOutOfRange { index: y, k });
    }
    Ok((1..=k).filter(|&c| c != y).collect())
}

/// Complementary-label loss: -sum over y' != y of ln(1 - Q(y'|x)).
pub fn loss_complementary(probs: &[f64], y: usize) -> Result<f64> {
    check_label(probs, y)?;
    let mut acc = 0.0;
    for (i, &q) in probs.iter().enumerate() {
        if i + 1 != y {
            acc -= (1.0 - q).ln();
        }
    }
    Ok(acc)
}

/// The blended loss L_M = C L_G + (1 - C) L_C with C = confidence (or the
/// override, when set).
pub fn loss_gl(
    probs: &[f64],
    y: usize,
    confidence_override: Option<f64>,
) -> Result<SampleLossBreakdown> {
    let c = match confidence_override {
        Some(v) => v,
        None => confidence(probs, y)?,
    };
    let loss_g = loss_ground_truth(probs, y)?;
    let loss_c = loss_complementary(probs, y)?;
    let loss_m = c * loss_g + (1.0 - c) * loss_c;
    Ok(SampleLossBreakdown {
        confidence: c,
        loss_g,
        loss_c,
        loss_m,
        regularizer: loss_m - loss_g,
    })
}

/// The constraint-form regularizer
/// r = (1-Q_y) ln(Q_y (1-Q_y)) - (1-Q_y) sum_k ln(1-Q_k),
/// which satisfies L_G + r = L_M identically.
pub fn regularizer_r(probs: &[f64], y: usize) -> Result<f64> {
    check_label(probs, y)?;
    let qy = probs[y - 1];
    let sum_log: f64 = probs.iter().map(|&q| (1.0 - q).ln()).sum();
    Ok((1.0 - qy) * (qy * (1.0 - qy)).ln() - (1.0 - qy) * sum_log)
}

/// Evaluate any non-blended loss.
pub fn loss_baseline(method: LossMethod, probs: &[f64], y: usize) -> Result<f64> {
    check_label(probs, y)?;
    match method {
        LossMethod::Gl => Err(Error::Usage(
            "loss_baseline does not accept the blended method".into(),
        )),
        LossMethod::Standard => loss_ground_truth(probs, y),
        LossMethod::Nl => loss_complementary(probs, y),
        LossMethod::StandardPlusNl => Ok(0.5 * loss_ground_truth(probs, y)?
            + 0.5 * loss_complementary(probs, y)?),
        LossMethod::Mae => {
            let mut acc = 0.0;
            for (i, &q) in probs.iter().enumerate() {
                let target = if i + 1 == y { 1.0 } else { 0.0 };
                acc += (q - target).abs();
            }
            Ok(acc)
        }
        LossMethod::Bootstrap(beta) => {
            if !(0.0 < beta && beta < 1.0) {
                return Err(Error::Usage("bootstrap beta must be in (0,1)".into()));
            }
            let mut acc = 0.0;
            for (i, &q) in probs.iter().enumerate() {
                let target = if i + 1 == y { beta } else { 0.0 };
                acc -= (target + (1.0 - beta) * q) * q.ln();
            }
            Ok(acc)
        }
    }
}

/// Per-sample loss value for any method.
pub fn sample_loss(method: LossMethod, opts: &GlOptions, probs: &[f64], y: usize) -> Result<f64> {
    match method {
        LossMethod::Gl => Ok(loss_gl(probs, y, opts.confidence_override)?.loss_m),
        other => loss_baseline(other, probs, y),
    }
}

/// Per-sample loss value and its gradient w.r.t. the (clamped) probability
/// vector. The gradient matches exactly what finite differences of
/// `sample_loss` see, modulo the chosen confidence-gradient mode.
pub fn sample_loss_grad(
    method: LossMethod,
    opts: &GlOptions,
    probs: &[f64],
    y: usize,
) -> Result<(f64, Vec<f64>)> {
    check_label(probs, y)?;
    let k = probs.len();
    let yi = y - 1;
    let mut grad = vec![0.0; k];
    let value = match method {
        LossMethod::Standard => {
            grad[yi] = -1.0 / probs[yi];
            loss_ground_truth(probs, y)?
        }
        LossMethod::Nl => {
            for (i, &q) in probs.iter().enumerate() {
                if i != yi {
                    grad[i] = 1.0 / (1.0 - q);
                }
            }
            loss_complementary(probs, y)?
        }
        LossMethod::StandardPlusNl => {
            grad[yi] = -0.5 / probs[yi];
            for (i, &q) in probs.iter().enumerate() {
                if i != yi {
                    grad[i] = 0.5 / (1.0 - q);
                }
            }
            loss_baseline(method, probs, y)?
        }
        LossMethod::Mae => {
            for (i, g) in grad.iter_mut().enumerate() {
                *g = if i == yi { -1.0 } else { 1.0 };
            }
            loss_baseline(method, probs, y)?
        }
        LossMethod::Bootstrap(beta) => {
            for (i, &q) in probs.iter().enumerate() {
                let delta = if i == yi { beta } else { 0.0 };
                grad[i] = -(delta / q + (1.0 - beta)) - (1.0 - beta) * q.ln();
            }
            loss_baseline(method, probs, y)?
        }
        LossMethod::Gl => {
            let b = loss_gl(probs, y, opts.confidence_override)?;
            let c = b.confidence;
            grad[yi] = -c / probs[yi];
            for (i, &q) in probs.iter().enumerate() {
                if i != yi {
                    grad[i] += (1.0 - c) / (1.0 - q);
                }
            }
            // The weight C is itself Q_y; in full mode the product rule adds
            // (L_G - L_C) to the gradient at the label coordinate.
            if opts.confidence_override.is_none()
                && opts.gradient == ConfidenceGradient::Full
            {
                grad[yi] += b.loss_g - b.loss_c;
            }
            b.loss_m
        }
    };
    Ok((value, grad))
}

/// Mean per-sample loss over a batch, plus parameter gradients.
///
/// Batch reduction order follows ascending position in `batch`, keeping the
/// result bit-deterministic.
pub fn empirical_risk(
    method: LossMethod,
    opts: &GlOptions,
    params: &ModelParams,
    data: &LabeledDataset,
    batch: &[usize],
) -> Result<(f64, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::Usage("empirical risk over an empty batch".into()));
    }
    let inv_n = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    let mut grads = params.zeros_like();
    for &idx in batch {
        let x = data.features.row(idx);
        let y = data.labels[idx];
        let trace = forward(params, x)?;
        let probs = Probs::from_logits(trace.logits())?;
        let (loss, grad_probs) = sample_loss_grad(method, opts, &probs.values, y)?;
        total += loss;
        let grad_logits = probs.backward(&grad_probs)?;
        let sample_grads = backward(params, &trace, x, &grad_logits)?;
        for (gl, sl) in grads.layers.iter_mut().zip(sample_grads.layers.iter()) {
            for (a, b) in gl.weight.data.iter_mut().zip(sl.weight.data.iter()) {
                *a += inv_n * b;
            }
            for (a, b) in gl.bias.iter_mut().zip(sl.bias.iter()) {
                *a += inv_n * b;
            }
        }
    }
    Ok((total * inv_n, grads))
}

/// Mean per-sample loss over an entire dataset, without gradients.
pub fn mean_loss(
    method: LossMethod,
    opts: &GlOptions,
    params: &ModelParams,
    data: &LabeledDataset,
) -> Result<f64> {
    if data.len() == 0 {
        return Err(Error::Usage("mean loss over an empty dataset".into()));
    }
    let mut total = 0.0;
    for idx in 0..data.len() {
        let trace = forward(params, data.features.row(idx))?;
        let probs = Probs::from_logits(trace.logits())?;
        total += sample_loss(method, opts, &probs.values, data.labels[idx])?;
    }
    Ok(total / data.len() as f64)
}
