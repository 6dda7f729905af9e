//! Numeric evaluation of the generalization bounds for the standard and
//! confidence-weighted objectives, the network Rademacher term, the lambda
//! tightness condition, and a pool-based proxy for the distribution
//! discrepancy.

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::losses::{mean_loss, GlOptions, LossMethod};
use crate::numerics::ModelParams;

/// Inputs shared by both bound evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    /// Contamination proportion in [0,1].
    pub alpha: f64,
    pub n_id: usize,
    pub n_ood: usize,
    /// Bound on the input norm.
    pub input_bound: f64,
    /// Lipschitz constant of the loss.
    pub lipschitz: f64,
    /// Bound on the loss magnitude.
    pub loss_bound: f64,
    /// Network depth.
    pub depth: usize,
    /// Per-layer Frobenius-norm bounds, one per layer.
    pub frobenius_bounds: Vec<f64>,
    pub k: usize,
    /// Constraint cap; must exceed 1 so ln(2 lambda - 2) is defined.
    pub lambda: f64,
    /// Bound on the log-sum-exp of the logits.
    pub log_sum_exp_bound: f64,
    /// Confidence parameter in (0,1).
    pub delta: f64,
    /// Discrepancy value (user-supplied or proxy estimate).
    pub discrepancy: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Usage("alpha must be in [0,1]".into()));
        }
        if self.n_id == 0 || self.n_ood == 0 {
            return Err(Error::Usage("sample counts must be positive".into()));
        }
        if self.input_bound <= 0.0 || self.lipschitz <= 0.0 || self.loss_bound <= 0.0 {
            return Err(Error::Usage("B, L, c must be positive".into()));
        }
        if self.depth == 0 || self.frobenius_bounds.len() != self.depth {
            return Err(Error::Usage(
                "depth must be >= 1 and match the Frobenius bound count".into(),
            ));
        }
        if self.frobenius_bounds.iter().any(|&m| m < 0.0) {
            return Err(Error::Usage("Frobenius bounds must be nonnegative".into()));
        }
        if self.k < 2 {
            return Err(Error::Usage("K must be >= 2".into()));
        }
        if self.lambda <= 1.0 {
            return Err(Error::Usage("lambda must exceed 1".into()));
        }
        if !(0.0 < self.delta && self.delta < 1.0) {
            return Err(Error::Usage("delta must be in (0,1)".into()));
        }
        if self.discrepancy < 0.0 {
            return Err(Error::Usage("discrepancy must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Shared sample-size factor (alpha sqrt(N_I) + (1-alpha) sqrt(N_O)) /
/// sqrt(N_I N_O).
pub fn coef(alpha: f64, n_id: usize, n_ood: usize) -> f64 {
    let ni = n_id as f64;
    let no = n_ood as f64;
    (alpha * ni.sqrt() + (1.0 - alpha) * no.sqrt()) / (ni * no).sqrt()
}

fn depth_factor(depth: usize) -> f64 {
    (2.0 * depth as f64 * std::f64::consts::LN_2).sqrt() + 1.0
}

fn product(ms: &[f64]) -> f64 {
    ms.iter().product()
}

fn tail_term(inp: &BoundInputs) -> f64 {
    8.0 * inp.loss_bound
        * coef(inp.alpha, inp.n_id, inp.n_ood)
        * (2.0 * (16.0 / inp.delta).ln()).sqrt()
}

/// Generalization gap bound for the plain cross-entropy objective:
/// 2 alpha d_H + 4BL coef (sqrt(2 d ln 2) + 1) prod M_i
/// + 8c coef sqrt(2 ln(16/delta)).
pub fn bound_standard(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    let c = coef(inp.alpha, inp.n_id, inp.n_ood);
    Ok(2.0 * inp.alpha * inp.discrepancy
        + 4.0 * inp.input_bound
            * inp.lipschitz
            * c
            * depth_factor(inp.depth)
            * product(&inp.frobenius_bounds)
        + tail_term(inp))
}

/// Generalization gap bound for the confidence-weighted objective:
/// 2 alpha d_H + 4BLK coef (c + ln(2 lambda - 2))
/// + 8c coef sqrt(2 ln(16/delta)).
pub fn bound_gl(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    let c = coef(inp.alpha, inp.n_id, inp.n_ood);
    Ok(2.0 * inp.alpha * inp.discrepancy
        + 4.0 * inp.input_bound
            * inp.lipschitz
            * inp.k as f64
            * c
            * (inp.loss_bound + (2.0 * inp.lambda - 2.0).ln())
        + tail_term(inp))
}

/// Largest lambda for which the weighted bound is the tighter one:
/// 1 + exp(B (sqrt(2 d ln 2) + 1) prod M_i / (L sqrt(K)) - z) / 2.
pub fn lambda_threshold(
    input_bound: f64,
    depth: usize,
    frobenius_bounds: &[f64],
    lipschitz: f64,
    k: usize,
    log_sum_exp_bound: f64,
) -> f64 {
    let arg = input_bound * depth_factor(depth) * product(frobenius_bounds)
        / (lipschitz * (k as f64).sqrt())
        - log_sum_exp_bound;
    1.0 + 0.5 * arg.exp()
}

/// Rademacher term for a norm-bounded ReLU network:
/// sqrt(N) B (sqrt(2 d ln 2) + 1) prod M_i.
pub fn rademacher_term(n: usize, input_bound: f64, depth: usize, frobenius_bounds: &[f64]) -> f64 {
    (n as f64).sqrt() * input_bound * depth_factor(depth) * product(frobenius_bounds)
}

/// Pool-based proxy for the discrepancy: max over given hypotheses of the
/// absolute difference between mean losses on the two datasets. A lower
/// bound on the true supremum over the hypothesis class.
pub fn discrepancy_proxy(
    pool: &[ModelParams],
    id_data: &LabeledDataset,
    ood_data: &LabeledDataset,
    method: LossMethod,
) -> Result<f64> {
    if pool.is_empty() {
        return Err(Error::Usage("discrepancy proxy needs a nonempty pool".into()));
    }
    if id_data.is_empty() || ood_data.is_empty() {
        return Err(Error::Usage("discrepancy proxy needs nonempty datasets".into()));
    }
    let opts = GlOptions::default();
    let mut best = 0.0f64;
    for params in pool {
        let diff =
            (mean_loss(method, &opts, params, id_data)? - mean_loss(method, &opts, params, ood_data)?).abs();
        best = best.max(diff);
    }
    Ok(best)
}
