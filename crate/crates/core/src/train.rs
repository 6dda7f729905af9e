//! Epoch/mini-batch training with any loss method, learning-rate
//! scheduling, checkpointing, and per-epoch tracking of the confidence gap
//! between in-distribution and contaminated samples.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

use crate::data::{LabeledDataset, Provenance};
use crate::error::{Error, Result};
use crate::losses::{empirical_risk, ConfidenceGradient, GlOptions, LossMethod};
use crate::numerics::{forward, Layer, Matrix, ModelParams, Probs};
use crate::optim::{OptimizerSpec, OptimizerState};

const CHECKPOINT_MAGIC: &[u8; 4] = b"GLCK";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub method: LossMethod,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerSpec,
    /// (epoch, multiplier) pairs with strictly increasing epochs; the
    /// learning rate is multiplied at the start of the named epoch (0-based).
    pub lr_schedule: Vec<(usize, f64)>,
    pub seed: u64,
    pub confidence_gradient: ConfidenceGradient,
    /// Synthetic override of the blend weight; None in normal training.
    pub confidence_override: Option<f64>,
    /// Hidden layer widths; input and output widths come from the data.
    pub hidden_layout: Vec<usize>,
}

impl TrainConfig {
    /// The tabular recipe: 2 hidden layers of 128 ReLU units, Adam with
    /// defaults, 10 epochs, batches of 16.
    pub fn tabular(method: LossMethod, seed: u64) -> Self {
        TrainConfig {
            method,
            epochs: 10,
            batch_size: 16,
            optimizer: OptimizerSpec::adam(0.001),
            lr_schedule: Vec::new(),
            seed,
            confidence_gradient: ConfidenceGradient::Full,
            confidence_override: None,
            hidden_layout: vec![128, 128],
        }
    }

    /// Long-run preset: SGD at 0.1 with x0.1 drops at epochs 100 and 150,
    /// 200 epochs, batches of 128.
    pub fn long_run(method: LossMethod, seed: u64) -> Self {
        TrainConfig {
            method,
            epochs: 200,
            batch_size: 128,
            optimizer: OptimizerSpec::Sgd {
                learning_rate: 0.1,
                momentum: 0.9,
            },
            lr_schedule: vec![(100, 0.1), (150, 0.1)],
            seed,
            confidence_gradient: ConfidenceGradient::Full,
            confidence_override: None,
            hidden_layout: vec![128, 128],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Usage("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Usage("batch_size must be >= 1".into()));
        }
        if !self.lr_schedule.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(Error::Usage("schedule epochs must be strictly increasing".into()));
        }
        Ok(())
    }

    fn gl_options(&self) -> GlOptions {
        GlOptions {
            gradient: self.confidence_gradient,
            confidence_override: self.confidence_override,
        }
    }
}

/// Per-epoch statistics recorded from the end-of-epoch model.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub train_accuracy: f64,
    pub mean_confidence_id: Option<f64>,
    pub mean_confidence_ood: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainRecord {
    pub epochs: Vec<EpochStats>,
    pub params: ModelParams,
    pub optimizer_steps: u64,
    pub wall_clock_secs: f64,
}

/// Mean confidence of the annotated label, split by provenance tag, plus
/// argmax training accuracy. Used for the end-of-epoch snapshot and callable
/// on an untrained model.
pub fn confidence_stats(
    params: &ModelParams,
    data: &LabeledDataset,
) -> Result<(Option<f64>, Option<f64>, f64)> {
    let mut id_sum = 0.0;
    let mut id_n = 0usize;
    let mut ood_sum = 0.0;
    let mut ood_n = 0usize;
    let mut correct = 0usize;
    for i in 0..data.len() {
        let trace = forward(params, data.features.row(i))?;
        let probs = Probs::from_logits(trace.logits())?;
        let y = data.labels[i];
        let c = probs.values[y - 1];
        match data.provenance[i] {
            Provenance::Id => {
                id_sum += c;
                id_n += 1;
            }
            Provenance::Ood => {
                ood_sum += c;
                ood_n += 1;
            }
        }
        let pred = argmax_lowest(&probs.values);
        if pred == y {
            correct += 1;
        }
    }
    let id = (id_n > 0).then(|| id_sum / id_n as f64);
    let ood = (ood_n > 0).then(|| ood_sum / ood_n as f64);
    Ok((id, ood, correct as f64 / data.len() as f64))
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best + 1
}

/// Run the full training loop. Fully deterministic given (config, data).
pub fn train(config: &TrainConfig, data: &LabeledDataset) -> Result<TrainRecord> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Usage("training data is empty".into()));
    }
    let start = Instant::now();
    let mut dims = vec![data.n_features()];
    dims.extend_from_slice(&config.hidden_layout);
    dims.push(data.k);
    let mut params = ModelParams::init_gaussian(&dims, config.seed)?;
    let mut optimizer = OptimizerState::new(config.optimizer, &params)?;
    let mut shuffle_rng = Xoshiro256StarStar::seed_from_u64(config.seed ^ 0x9e3779b97f4a7c15);
    let opts = config.gl_options();

    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        for &(at, mult) in &config.lr_schedule {
            if at == epoch {
                optimizer.scale_learning_rate(mult);
            }
        }
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let (loss, grads) = empirical_risk(config.method, &opts, &params, data, batch)?;
            if !loss.is_finite() {
                return Err(Error::NumericAbort {
                    epoch,
                    batch: batch_idx,
                    sample: batch[0],
                });
            }
            loss_sum += loss * batch.len() as f64;
            optimizer.step(&mut params, &grads)?;
        }
        let (mean_confidence_id, mean_confidence_ood, train_accuracy) =
            confidence_stats(&params, data)?;
        epochs.push(EpochStats {
            mean_loss: loss_sum / n as f64,
            train_accuracy,
            mean_confidence_id,
            mean_confidence_ood,
        });
    }
    Ok(TrainRecord {
        epochs,
        params,
        optimizer_steps: optimizer.steps(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

/// Per-epoch (mean in-distribution confidence - mean contaminated
/// confidence). Requires the training data to have carried both tags.
pub fn confidence_gap(record: &TrainRecord) -> Result<Vec<f64>> {
    record
        .epochs
        .iter()
        .map(|e| match (e.mean_confidence_id, e.mean_confidence_ood) {
            (Some(id), Some(ood)) => Ok(id - ood),
            _ => Err(Error::Usage(
                "confidence gap needs both provenance classes in the training data".into(),
            )),
        })
        .collect()
}

/// Lossless binary checkpoint: magic "GLCK", u32 version, layer count,
/// per-layer dims and raw little-endian f64 weights then biases.
pub fn checkpoint_save(params: &ModelParams, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(params.layers.len() as u32).to_le_bytes());
    for layer in &params.layers {
        buf.extend_from_slice(&(layer.weight.rows as u32).to_le_bytes());
        buf.extend_from_slice(&(layer.weight.cols as u32).to_le_bytes());
        for v in &layer.weight.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in &layer.bias {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn checkpoint_load(path: &Path) -> Result<ModelParams> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut cursor = 0usize;
    let take = |cursor: &mut usize, n: usize| -> Result<&[u8]> {
        if *cursor + n > buf.len() {
            return Err(Error::CheckpointLoad("truncated checkpoint".into()));
        }
        let s = &buf[*cursor..*cursor + n];
        *cursor += n;
        Ok(s)
    };
    if take(&mut cursor, 4)? != CHECKPOINT_MAGIC {
        return Err(Error::CheckpointLoad("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointLoad(format!(
            "unsupported version {version}"
        )));
    }
    let n_layers = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let rows = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
        let mut weight = Matrix::zeros(rows, cols);
        for v in weight.data.iter_mut() {
            *v = f64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap());
        }
        let mut bias = vec![0.0; rows];
        for v in bias.iter_mut() {
            *v = f64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap());
        }
        layers.push(Layer { weight, bias });
    }
    if cursor != buf.len() {
        return Err(Error::CheckpointLoad("trailing bytes".into()));
    }
    Ok(ModelParams { layers })
}
