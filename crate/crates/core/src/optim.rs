//! First-order optimizers over [`ModelParams`]-shaped accumulators.

use crate::error::{Error, Result};
use crate::numerics::ModelParams;

/// Optimizer configuration used to build an [`OptimizerState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerSpec {
    /// SGD with momentum: v <- mu v - eta g; theta <- theta + v.
    Sgd { learning_rate: f64, momentum: f64 },
    /// Adam with bias correction.
    Adam {
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl OptimizerSpec {
    /// Adam with the conventional defaults beta1=0.9, beta2=0.999, eps=1e-8.
    pub fn adam(learning_rate: f64) -> Self {
        OptimizerSpec::Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match self {
            OptimizerSpec::Sgd { learning_rate, .. } => *learning_rate,
            OptimizerSpec::Adam { learning_rate, .. } => *learning_rate,
        }
    }
}

#[derive(Debug, Clone)]
pub enum OptimizerState {
    Sgd {
        learning_rate: f64,
        momentum: f64,
        velocity: ModelParams,
        step: u64,
    },
    Adam {
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        m: ModelParams,
        v: ModelParams,
        step: u64,
    },
}

impl OptimizerState {
    pub fn new(spec: OptimizerSpec, params: &ModelParams) -> Result<Self> {
        let lr = spec.learning_rate();
        if !(lr > 0.0) {
            return Err(Error::Usage("learning rate must be positive".into()));
        }
        Ok(match spec {
            OptimizerSpec::Sgd {
                learning_rate,
                momentum,
            } => OptimizerState::Sgd {
                learning_rate,
                momentum,
                velocity: params.zeros_like(),
                step: 0,
            },
            OptimizerSpec::Adam {
                learning_rate,
                beta1,
                beta2,
                epsilon,
            } => OptimizerState::Adam {
                learning_rate,
                beta1,
                beta2,
                epsilon,
                m: params.zeros_like(),
                v: params.zeros_like(),
                step: 0,
            },
        })
    }

    pub fn steps(&self) -> u64 {
        match self {
            OptimizerState::Sgd { step, .. } => *step,
            OptimizerState::Adam { step, .. } => *step,
        }
    }

    pub fn scale_learning_rate(&mut self, factor: f64) {
        match self {
            OptimizerState::Sgd { learning_rate, .. } => *learning_rate *= factor,
            OptimizerState::Adam { learning_rate, .. } => *learning_rate *= factor,
        }
    }

    /// One update. Aborts without touching the parameters if any gradient
    /// entry is non-finite.
    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) -> Result<()> {
        if params.layers.len() != grads.layers.len() {
            return Err(Error::Shape("gradient layout mismatch".into()));
        }
        if !grads.all_finite() {
            return Err(Error::Numeric("non-finite gradient; step aborted".into()));
        }
        match self {
            OptimizerState::Sgd {
                learning_rate,
                momentum,
                velocity,
                step,
            } => {
                *step += 1;
                for (l, (p, g)) in params
                    .layers
                    .iter_mut()
                    .zip(grads.layers.iter())
                    .enumerate()
                {
                    let vel = &mut velocity.layers[l];
                    for (i, gw) in g.weight.data.iter().enumerate() {
                        let v = *momentum * vel.weight.data[i] - *learning_rate * gw;
                        vel.weight.data[i] = v;
                        p.weight.data[i] += v;
                    }
                    for (i, gb) in g.bias.iter().enumerate() {
                        let v = *momentum * vel.bias[i] - *learning_rate * gb;
                        vel.bias[i] = v;
                        p.bias[i] += v;
                    }
                }
            }
            OptimizerState::Adam {
                learning_rate,
                beta1,
                beta2,
                epsilon,
                m,
                v,
                step,
            } => {
                *step += 1;
                let t = *step as f64;
                let bc1 = 1.0 - beta1.powf(t);
                let bc2 = 1.0 - beta2.powf(t);
                for (l, (p, g)) in params
                    .layers
                    .iter_mut()
                    .zip(grads.layers.iter())
                    .enumerate()
                {
                    let ml = &mut m.layers[l];
                    let vl = &mut v.layers[l];
                    for (i, gw) in g.weight.data.iter().enumerate() {
                        ml.weight.data[i] = *beta1 * ml.weight.data[i] + (1.0 - *beta1) * gw;
                        vl.weight.data[i] = *beta2 * vl.weight.data[i] + (1.0 - *beta2) * gw * gw;
                        let mhat = ml.weight.data[i] / bc1;
                        let vhat = vl.weight.data[i] / bc2;
                        p.weight.data[i] -= *learning_rate * mhat / (vhat.sqrt() + *epsilon);
                    }
                    for (i, gb) in g.bias.iter().enumerate() {
                        ml.bias[i] = *beta1 * ml.bias[i] + (1.0 - *beta1) * gb;
                        vl.bias[i] = *beta2 * vl.bias[i] + (1.0 - *beta2) * gb * gb;
                        let mhat = ml.bias[i] / bc1;
                        let vhat = vl.bias[i] / bc2;
                        p.bias[i] -= *learning_rate * mhat / (vhat.sqrt() + *epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Layer, Matrix};

    fn scalar_params(value: f64) -> ModelParams {
        ModelParams {
            layers: vec![Layer {
                weight: Matrix::from_vec(1, 1, vec![value]).unwrap(),
                bias: vec![0.0],
            }],
        }
    }

    fn scalar_grad(g: f64) -> ModelParams {
        ModelParams {
            layers: vec![Layer {
                weight: Matrix::from_vec(1, 1, vec![g]).unwrap(),
                bias: vec![0.0],
            }],
        }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = scalar_params(0.7);
        let mut state = OptimizerState::new(
            OptimizerSpec::Sgd {
                learning_rate: 0.1,
                momentum: 0.0,
            },
            &params,
        )
        .unwrap();
        state.step(&mut params, &scalar_grad(0.0)).unwrap();
        assert_eq!(params.layers[0].weight.data[0], 0.7);
    }

    #[test]
    fn sgd_scalar_step() {
        let mut params = scalar_params(1.0);
        let mut state = OptimizerState::new(
            OptimizerSpec::Sgd {
                learning_rate: 0.1,
                momentum: 0.0,
            },
            &params,
        )
        .unwrap();
        state.step(&mut params, &scalar_grad(1.0)).unwrap();
        assert!((params.layers[0].weight.data[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_magnitude_is_learning_rate() {
        // Hand evaluation: bias-corrected first step with g=1 moves theta by
        // exactly eta / (1 + eps) ~= eta.
        let lr = 0.01;
        let mut params = scalar_params(0.0);
        let mut state = OptimizerState::new(OptimizerSpec::adam(lr), &params).unwrap();
        state.step(&mut params, &scalar_grad(1.0)).unwrap();
        let delta = params.layers[0].weight.data[0].abs();
        let expected = lr / (1.0 + 1e-8);
        assert!((delta - expected).abs() < 1e-15, "{delta} vs {expected}");
    }

    #[test]
    fn non_finite_gradient_aborts_step() {
        let mut params = scalar_params(1.0);
        let mut state = OptimizerState::new(OptimizerSpec::adam(0.01), &params).unwrap();
        let err = state.step(&mut params, &scalar_grad(f64::NAN));
        assert!(matches!(err, Err(crate::error::Error::Numeric(_))));
        assert_eq!(params.layers[0].weight.data[0], 1.0);
        assert_eq!(state.steps(), 0);
    }
}
