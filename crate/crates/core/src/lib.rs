//! Training classifiers on contaminated non-IID data.
//!
//! The training set mixes trustworthy in-distribution samples with
//! out-of-distribution samples that were mislabeled as in-distribution. The
//! blended loss here weights a ground-truth cross-entropy term against a
//! complementary-label term per sample, using the model's own confidence in
//! the annotated label as the adaptive weight.
//!
//! Modules:
//! - [`numerics`]: dense network, stable softmax, exact reverse-mode gradients
//! - [`optim`]: SGD-with-momentum and Adam
//! - [`losses`]: the blended loss family, baselines, empirical risk
//! - [`data`]: contamination protocol, CSV ingestion, synthetic blobs
//! - [`train`]: the epoch/mini-batch loop and checkpointing
//! - [`metrics`]: accuracy, 20-bin expected calibration error
//! - [`bounds`]: generalization-bound calculators and the discrepancy proxy

pub mod bounds;
pub mod data;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod numerics;
pub mod optim;
pub mod train;

pub use bounds::{
    bound_gl, bound_standard, coef, discrepancy_proxy, lambda_threshold, rademacher_term,
    BoundInputs,
};
pub use data::{
    gen_blobs, load_csv, make_smallest_class_ood, mix, save_csv, split_ood_source,
    train_test_split, LabeledDataset, MixtureSpec, OodLabeling, OodSubset, Provenance,
};
pub use error::{Error, Result};
pub use losses::{
    complementary_set, confidence, empirical_risk, loss_baseline, loss_complementary, loss_gl,
    loss_ground_truth, mean_loss, regularizer_r, sample_loss, sample_loss_grad,
    ConfidenceGradient, GlOptions, LossMethod, SampleLossBreakdown,
};
pub use metrics::{
    accuracy, ece, evaluate, Bin, MetricsReport, Prediction, PredictionSet, ReliabilityBins,
    N_BINS,
};
pub use numerics::{
    backward, forward, softmax, ForwardTrace, Layer, Matrix, ModelParams, Probs, PROB_EPS,
};
pub use optim::{OptimizerSpec, OptimizerState};
pub use train::{
    checkpoint_load, checkpoint_save, confidence_gap, confidence_stats, train, EpochStats,
    TrainConfig, TrainRecord,
};
