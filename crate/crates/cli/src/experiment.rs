//! Wiring from a parsed configuration to trained, evaluated runs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use graylearn::{
    evaluate, gen_blobs, load_csv, make_smallest_class_ood, mix, train, train_test_split, Error,
    LabeledDataset, LossMethod, MetricsReport, MixtureSpec, OodLabeling, Result, TrainConfig,
    TrainRecord,
};

use crate::config::{DatasetSource, ExperimentConfig};

// Salts keep the per-stage RNG streams distinct while still deriving
// everything from the one experiment seed.
const BLOB_SALT: u64 = 0x626c6f62;
const SPLIT_SALT: u64 = 0x73706c69;
const MIX_SALT: u64 = 0x6d697800;

/// A train/test pair with contamination applied to the training part only.
pub struct PreparedData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

pub fn load_base(cfg: &ExperimentConfig, seed: u64) -> Result<LabeledDataset> {
    match &cfg.dataset {
        DatasetSource::Blobs {
            n_per_class,
            classes,
            features,
            centers_scale,
            noise_sd,
        } => gen_blobs(
            *n_per_class,
            *classes,
            *features,
            *centers_scale,
            *noise_sd,
            seed ^ BLOB_SALT,
        ),
        DatasetSource::Csv {
            path,
            label_column,
            has_header,
        } => load_csv(path, label_column, *has_header),
    }
}

/// Build the contaminated training set and the clean test set for one seed.
pub fn prepare(
    cfg: &ExperimentConfig,
    alpha: f64,
    labeling: OodLabeling,
    seed: u64,
) -> Result<PreparedData> {
    let base = load_base(cfg, seed)?;
    let base_k = base.k;
    let (id_data, ood_pool) = if cfg.smallest_class_ood {
        let (id, ood) = make_smallest_class_ood(&base)?;
        (id, Some(ood))
    } else if let Some(path) = &cfg.ood_csv {
        (base, Some(load_csv(path, "label", true)?))
    } else {
        (base, None)
    };
    let (train_id, test) = train_test_split(&id_data, cfg.test_fraction, seed ^ SPLIT_SALT)?;
    let mut train = match &ood_pool {
        Some(pool) => mix(
            &train_id,
            pool,
            &MixtureSpec {
                alpha,
                labeling,
                ood_subset: cfg.mixture.ood_subset,
                seed: seed ^ MIX_SALT,
            },
        )?,
        None if alpha > 0.0 => {
            return Err(Error::Usage(
                "alpha > 0 requires a contamination pool (smallest_class_ood or ood_path)".into(),
            ))
        }
        None => train_id,
    };
    // Keep the source dataset's full class count as the classifier's output
    // width. When the smallest class becomes the contamination pool, only two
    // in-distribution classes can remain, and over two classes the blended
    // loss collapses to plain cross-entropy (the lone complementary term
    // equals the positive one). A spare output keeps the losses distinct.
    train.k = train.k.max(base_k);
    Ok(PreparedData { train, test })
}

pub fn train_config(cfg: &ExperimentConfig, method: LossMethod, seed: u64) -> TrainConfig {
    TrainConfig {
        method,
        epochs: cfg.train.epochs,
        batch_size: cfg.train.batch_size,
        optimizer: cfg.train.optimizer,
        lr_schedule: cfg.train.lr_schedule.clone(),
        seed,
        confidence_gradient: cfg.train.confidence_gradient,
        confidence_override: None,
        hidden_layout: cfg.train.hidden.clone(),
    }
}

/// One completed (method, seed) cell.
pub struct RunResult {
    pub method: LossMethod,
    pub alpha: f64,
    pub labeling: OodLabeling,
    pub seed: u64,
    pub report: MetricsReport,
    pub record: TrainRecord,
}

impl RunResult {
    /// Final-epoch in-distribution minus contaminated mean confidence, when
    /// both tags were present in training.
    pub fn final_confidence_gap(&self) -> Option<f64> {
        let last = self.record.epochs.last()?;
        match (last.mean_confidence_id, last.mean_confidence_ood) {
            (Some(id), Some(ood)) => Some(id - ood),
            _ => None,
        }
    }
}

pub fn run_one(
    cfg: &ExperimentConfig,
    method: LossMethod,
    alpha: f64,
    labeling: OodLabeling,
    seed: u64,
) -> Result<RunResult> {
    let data = prepare(cfg, alpha, labeling, seed)?;
    let record = train(&train_config(cfg, method, seed), &data.train)?;
    let report = evaluate(&record.params, &data.test)?;
    Ok(RunResult {
        method,
        alpha,
        labeling,
        seed,
        report,
        record,
    })
}

pub fn labeling_name(l: OodLabeling) -> &'static str {
    match l {
        OodLabeling::Specific => "specific",
        OodLabeling::Random => "random",
    }
}

pub fn result_row_header() -> &'static str {
    "method,alpha,labeling,seed,accuracy,ece,confidence_gap\n"
}

pub fn result_row(r: &RunResult) -> String {
    let gap = r
        .final_confidence_gap()
        .map(|g| g.to_string())
        .unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{}\n",
        r.method.name(),
        r.alpha,
        labeling_name(r.labeling),
        r.seed,
        r.report.accuracy,
        r.report.ece,
        gap
    )
}

/// Sample mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

pub fn aggregate_row(
    method: LossMethod,
    alpha: f64,
    labeling: OodLabeling,
    results: &[&RunResult],
) -> String {
    let accs: Vec<f64> = results.iter().map(|r| r.report.accuracy).collect();
    let eces: Vec<f64> = results.iter().map(|r| r.report.ece).collect();
    let gaps: Vec<f64> = results
        .iter()
        .filter_map(|r| r.final_confidence_gap())
        .collect();
    let (ma, sa) = mean_std(&accs);
    let (me, se) = mean_std(&eces);
    let mg = if gaps.is_empty() {
        String::new()
    } else {
        mean_std(&gaps).0.to_string()
    };
    let mut row = String::new();
    write!(
        row,
        "{},{},{},{},{},{},{},{},{}\n",
        method.name(),
        alpha,
        labeling_name(labeling),
        results.len(),
        ma,
        sa,
        me,
        se,
        mg
    )
    .expect("string write");
    row
}

pub const AGGREGATE_HEADER: &str =
    "method,alpha,labeling,n_seeds,mean_accuracy,std_accuracy,mean_ece,std_ece,mean_confidence_gap\n";

/// Write-temp-then-rename so partially written outputs never appear.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
