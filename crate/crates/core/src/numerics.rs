//! Dense linear algebra and a depth-d fully connected ReLU network with
//! exact reverse-mode gradients.
//!
//! Everything is `f64` and row-major. Hidden layers apply ReLU, the output
//! layer is identity (the logits). The ReLU subgradient at 0 is 0.

use rand::Rng;
use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{Error, Result};

/// Probability clamp applied to softmax outputs before any log.
pub const PROB_EPS: f64 = 1e-7;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Returns row `r` as a slice.
    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `y = A x` for a column vector `x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Shape(format!(
                "matvec: vector length {} does not match cols {}",
                x.len(),
                self.cols
            )));
        }
        let mut out = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = self.row(r);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            out[r] = acc;
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// One dense layer: `z = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Parameters of a depth-d dense network. ReLU on hidden layers,
/// identity on the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
}

impl ModelParams {
    /// Gaussian init with per-layer standard deviation sqrt(2 / fan_in),
    /// biases zero. `dims` is `[input, hidden..., output]`.
    pub fn init_gaussian(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Shape("need at least input and output dims".into()));
        }
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let sd = (2.0 / fan_in as f64).sqrt();
            let mut weight = Matrix::zeros(fan_out, fan_in);
            for v in weight.data.iter_mut() {
                *v = sd * standard_normal(&mut rng);
            }
            layers.push(Layer {
                weight,
                bias: vec![0.0; fan_out],
            });
        }
        Ok(ModelParams { layers })
    }

    /// All-zero parameters with the same layout as `self`.
    pub fn zeros_like(&self) -> Self {
        ModelParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Matrix::zeros(l.weight.rows, l.weight.cols),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.weight.rows).unwrap_or(0)
    }

    /// Per-layer Frobenius norms of the weight matrices (biases excluded).
    pub fn frobenius_norms(&self) -> Vec<f64> {
        self.layers
            .iter()
            .map(|l| l.weight.frobenius_norm())
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weight.data.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite())
        })
    }

    /// Flat view of all parameters, weights then bias per layer. Used by
    /// finite-difference checks.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weight.data);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten); panics on length mismatch.
    pub fn unflatten_into(&mut self, flat: &[f64]) {
        let mut i = 0;
        for l in self.layers.iter_mut() {
            let nw = l.weight.data.len();
            l.weight.data.copy_from_slice(&flat[i..i + nw]);
            i += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[i..i + nb]);
            i += nb;
        }
        assert_eq!(i, flat.len(), "flat parameter length mismatch");
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; draws two uniforms per call, discards the second variate
    // to keep the stream layout simple.
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Per-layer intermediates from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Pre-activations z_l = W_l a_{l-1} + b_l, one per layer.
    pub pre_activations: Vec<Vec<f64>>,
    /// Post-activations a_l; the last entry equals the logits.
    pub activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    /// Network outputs for all K classes.
    pub fn logits(&self) -> &[f64] {
        self.activations.last().expect("trace has at least one layer")
    }
}

/// Evaluate the network on one input.
pub fn forward(params: &ModelParams, x: &[f64]) -> Result<ForwardTrace> {
    if x.len() != params.input_dim() {
        return Err(Error::Shape(format!(
            "input length {} does not match first layer input {}",
            x.len(),
            params.input_dim()
        )));
    }
    let depth = params.depth();
    let mut pre_activations = Vec::with_capacity(depth);
    let mut activations = Vec::with_capacity(depth);
    let mut a = x.to_vec();
    for (i, layer) in params.layers.iter().enumerate() {
        let mut z = layer.weight.matvec(&a)?;
        for (zv, b) in z.iter_mut().zip(layer.bias.iter()) {
            *zv += b;
        }
        a = if i + 1 < depth {
            z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
        } else {
            z.clone()
        };
        pre_activations.push(z);
        activations.push(a.clone());
    }
    Ok(ForwardTrace {
        pre_activations,
        activations,
    })
}

/// Exact reverse-mode gradients of a scalar loss w.r.t. every weight and
/// bias, given the loss gradient at the logits.
pub fn backward(
    params: &ModelParams,
    trace: &ForwardTrace,
    x: &[f64],
    grad_logits: &[f64],
) -> Result<ModelParams> {
    if grad_logits.len() != params.output_dim() {
        return Err(Error::Shape(format!(
            "logit gradient length {} does not match output dim {}",
            grad_logits.len(),
            params.output_dim()
        )));
    }
    if x.len() != params.input_dim() {
        return Err(Error::Shape("input length mismatch in backward".into()));
    }
    let depth = params.depth();
    let mut grads = params.zeros_like();
    // dL/dz for the current layer, walking backwards.
    let mut delta = grad_logits.to_vec();
    for l in (0..depth).rev() {
        let input: &[f64] = if l == 0 {
            x
        } else {
            &trace.activations[l - 1]
        };
        let layer = &params.layers[l];
        let g = &mut grads.layers[l];
        for r in 0..layer.weight.rows {
            let d = delta[r];
            g.bias[r] = d;
            let row = &mut g.weight.data[r * layer.weight.cols..(r + 1) * layer.weight.cols];
            for (gw, xin) in row.iter_mut().zip(input.iter()) {
                *gw = d * xin;
            }
        }
        if l > 0 {
            // Propagate through W_l then the ReLU of layer l-1.
            let mut prev = vec![0.0; layer.weight.cols];
            for r in 0..layer.weight.rows {
                let d = delta[r];
                let row = layer.weight.row(r);
                for (p, w) in prev.iter_mut().zip(row.iter()) {
                    *p += d * w;
                }
            }
            for (p, z) in prev.iter_mut().zip(trace.pre_activations[l - 1].iter()) {
                if *z <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }
    Ok(grads)
}

/// Softmax probabilities with the clamping pipeline, plus the state needed
/// to backpropagate through it exactly.
#[derive(Debug, Clone)]
pub struct Probs {
    /// Final clamped, renormalized probabilities; each entry is in
    /// [PROB_EPS, 1 - PROB_EPS].
    pub values: Vec<f64>,
    raw: Vec<f64>,
    clamp_active: Vec<bool>,
    final_clamp_active: Vec<bool>,
    inv_sum: f64,
}

impl Probs {
    pub fn k(&self) -> usize {
        self.values.len()
    }

    /// Stable softmax followed by clamping to [PROB_EPS, 1 - PROB_EPS] and
    /// renormalization.
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        if logits.len() < 2 {
            return Err(Error::Shape("softmax needs K >= 2 logits".into()));
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite logit".into()));
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let raw: Vec<f64> = exps.iter().map(|&e| e / sum).collect();

        let mut clamp_active = vec![false; raw.len()];
        let clamped: Vec<f64> = raw
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let c = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
                clamp_active[i] = c != p;
                c
            })
            .collect();
        let csum: f64 = clamped.iter().sum();
        let inv_sum = 1.0 / csum;
        let mut final_clamp_active = vec![false; raw.len()];
        let values: Vec<f64> = clamped
            .iter()
            .enumerate()
            .map(|(i, &q)| {
                let r = q * inv_sum;
                let c = r.clamp(PROB_EPS, 1.0 - PROB_EPS);
                final_clamp_active[i] = c != r;
                c
            })
            .collect();
        Ok(Probs {
            values,
            raw,
            clamp_active,
            final_clamp_active,
            inv_sum,
        })
    }

    /// Raw softmax before clamping; sums to 1 within 1e-12.
    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// Chain `dL/dvalues` back through the renormalization, the clamps, and
    /// the softmax, yielding `dL/dlogits`.
    pub fn backward(&self, grad_values: &[f64]) -> Result<Vec<f64>> {
        let k = self.k();
        if grad_values.len() != k {
            return Err(Error::Shape("probability gradient length mismatch".into()));
        }
        // Through the final clamp: zero where it saturated.
        let g_r: Vec<f64> = grad_values
            .iter()
            .zip(self.final_clamp_active.iter())
            .map(|(&g, &a)| if a { 0.0 } else { g })
            .collect();
        // Through renormalization r = q / sum(q): dL/dq_j = (g_j - <g, r>) / S.
        let dot: f64 = g_r
            .iter()
            .zip(self.values.iter())
            .map(|(g, r)| g * r)
            .sum();
        // Through the first clamp, then the softmax Jacobian
        // dp_i/dz_j = p_i (delta_ij - p_j).
        let g_p: Vec<f64> = (0..k)
            .map(|j| {
                if self.clamp_active[j] {
                    0.0
                } else {
                    (g_r[j] - dot) * self.inv_sum
                }
            })
            .collect();
        let inner: f64 = g_p
            .iter()
            .zip(self.raw.iter())
            .map(|(g, p)| g * p)
            .sum();
        Ok((0..k).map(|i| self.raw[i] * (g_p[i] - inner)).collect())
    }
}

/// Convenience wrapper returning just the clamped probability vector.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    Ok(Probs::from_logits(logits)?.values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_zero_params_gives_zero_logits() {
        let params = ModelParams {
            layers: vec![Layer {
                weight: Matrix::zeros(3, 2),
                bias: vec![0.0; 3],
            }],
        };
        let t = forward(&params, &[1.0, -2.0]).unwrap();
        assert_eq!(t.logits(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn forward_identity_layer() {
        let params = ModelParams {
            layers: vec![Layer {
                weight: Matrix::identity(2),
                bias: vec![0.0, 0.0],
            }],
        };
        let t = forward(&params, &[1.0, 2.0]).unwrap();
        assert_eq!(t.logits(), &[1.0, 2.0]);
    }

    #[test]
    fn forward_dimension_mismatch_is_shape_error() {
        let params = ModelParams::init_gaussian(&[4, 3], 1).unwrap();
        assert!(matches!(forward(&params, &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    // Oracle: straight-line re-evaluation of the affine/ReLU chain,
    // independent of the Matrix/trace machinery.
    fn straight_line_eval(params: &ModelParams, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for (li, layer) in params.layers.iter().enumerate() {
            let rows = layer.weight.rows;
            let cols = layer.weight.cols;
            let mut z = vec![0.0; rows];
            for r in 0..rows {
                let mut s = layer.bias[r];
                for c in 0..cols {
                    s += layer.weight.data[r * cols + c] * a[c];
                }
                z[r] = s;
            }
            if li + 1 < params.layers.len() {
                for v in z.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            a = z;
        }
        a
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        let params = ModelParams::init_gaussian(&[5, 7, 3], 42).unwrap();
        let mut rng = Xoshiro256StarStar::seed_from_u64(7);
        for _ in 0..20 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let t = forward(&params, &x).unwrap();
            let oracle = straight_line_eval(&params, &x);
            for (a, b) in t.logits().iter().zip(oracle.iter()) {
                assert!((a - b).abs() < 1e-14, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let params = ModelParams::init_gaussian(&[5, 7, 3], 42).unwrap();
        let x = vec![0.3, -0.1, 2.0, 0.5, -1.5];
        let a = forward(&params, &x).unwrap();
        let b = forward(&params, &x).unwrap();
        assert_eq!(a.logits(), b.logits());
    }

    #[test]
    fn softmax_symmetry() {
        let p = softmax(&[0.0, 0.0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn softmax_analytic_two_thirds() {
        let p = softmax(&[2.0f64.ln(), 0.0]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_extreme_logits_clamped() {
        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!(p[0] >= 1.0 - 1e-6);
        assert!(p.iter().all(|&v| (PROB_EPS..=1.0 - PROB_EPS).contains(&v)));
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(matches!(
            softmax(&[f64::NAN, 0.0]),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn softmax_raw_sums_to_one() {
        let probs = Probs::from_logits(&[0.3, -2.0, 5.0, 1.1]).unwrap();
        let s: f64 = probs.raw().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn backward_zero_upstream_gives_zero_grads() {
        let params = ModelParams::init_gaussian(&[4, 6, 3], 3).unwrap();
        let x = vec![1.0, -0.5, 0.2, 0.9];
        let t = forward(&params, &x).unwrap();
        let g = backward(&params, &t, &x, &[0.0, 0.0, 0.0]).unwrap();
        for l in &g.layers {
            assert!(l.weight.data.iter().all(|&v| v == 0.0));
            assert!(l.bias.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn backward_linear_layer_is_outer_product() {
        // d=1 linear net with scalar residual-style upstream gradient:
        // dL/dW = residual x^T.
        let params = ModelParams {
            layers: vec![Layer {
                weight: Matrix::zeros(2, 3),
                bias: vec![0.0; 2],
            }],
        };
        let x = vec![1.0, 2.0, 3.0];
        let t = forward(&params, &x).unwrap();
        let residual = [0.5, -1.5];
        let g = backward(&params, &t, &x, &residual).unwrap();
        for r in 0..2 {
            for c in 0..3 {
                assert_eq!(g.layers[0].weight.get(r, c), residual[r] * x[c]);
            }
            assert_eq!(g.layers[0].bias[r], residual[r]);
        }
    }

    #[test]
    fn frobenius_norms_trivial_cases() {
        let zero = Matrix::zeros(3, 4);
        assert_eq!(zero.frobenius_norm(), 0.0);
        let id = Matrix::identity(2);
        assert!((id.frobenius_norm() - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn frobenius_norm_matches_direct_summation() {
        let params = ModelParams::init_gaussian(&[6, 4, 3], 9).unwrap();
        for (norm, layer) in params.frobenius_norms().iter().zip(params.layers.iter()) {
            let oracle: f64 = layer
                .weight
                .data
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            assert!((norm - oracle).abs() < 1e-15);
        }
    }
}
