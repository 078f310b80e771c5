//! AdamW with decoupled weight decay.

use serde::{Deserialize, Serialize};

use super::{TdtfConfig, TdtfGrads, TdtfParams};
use crate::error::{Error, Result};

/// Optimizer and schedule hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    /// Seed for the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            batch_size: 100,
            epochs: 500,
            weight_decay: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::invalid("weight_decay must be >= 0"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0 < b && b < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1)")));
            }
        }
        if !self.eps_adam.is_finite() || self.eps_adam <= 0.0 {
            return Err(Error::invalid("eps_adam must be positive"));
        }
        Ok(())
    }
}

/// First and second moment estimates, one entry per parameter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: TdtfGrads,
    v: TdtfGrads,
}

impl AdamState {
    pub fn zeros(cfg: &TdtfConfig) -> Result<Self> {
        Ok(Self {
            m: TdtfGrads::zeros(cfg)?,
            v: TdtfGrads::zeros(cfg)?,
        })
    }
}

/// One decoupled-weight-decay update:
/// `theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)`
/// with bias-corrected moment estimates. `step_index` starts at 1.
pub fn adamw_step(
    params: &mut TdtfParams,
    grads: &TdtfGrads,
    state: &mut AdamState,
    tc: &TrainConfig,
    step_index: usize,
) -> Result<()> {
    if step_index == 0 {
        return Err(Error::invalid("step_index must be >= 1"));
    }
    tc.validate()?;
    let bc1 = 1.0 - tc.beta1.powi(step_index as i32);
    let bc2 = 1.0 - tc.beta2.powi(step_index as i32);

    let theta = params.slices_mut();
    let g = grads.slices();
    let m = state.m.slices_mut();
    let v = state.v.slices_mut();
    for field in 0..5 {
        if theta[field].len() != g[field].len() {
            return Err(Error::invalid("gradient shapes do not match the parameters"));
        }
    }
    for (((theta, g), m), v) in theta.into_iter().zip(g).zip(m).zip(v) {
        for i in 0..theta.len() {
            m[i] = tc.beta1 * m[i] + (1.0 - tc.beta1) * g[i];
            v[i] = tc.beta2 * v[i] + (1.0 - tc.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            theta[i] -= tc.lr * (m_hat / (v_hat.sqrt() + tc.eps_adam) + tc.weight_decay * theta[i]);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tdtf::Activation;

    fn small_cfg() -> TdtfConfig {
        TdtfConfig {
            n: 2,
            d: 1,
            h: 3,
            pos_enc: true,
            activation: Activation::Tanh,
            seed: 7,
        }
    }

    #[test]
    fn zero_gradients_without_decay_leave_params_unchanged() {
        let cfg = small_cfg();
        let mut params = TdtfParams::init(&cfg).unwrap();
        let before = params.clone();
        let grads = TdtfGrads::zeros(&cfg).unwrap();
        let mut state = AdamState::zeros(&cfg).unwrap();
        let tc = TrainConfig::default();
        for step in 1..=5 {
            adamw_step(&mut params, &grads, &mut state, &tc, step).unwrap();
        }
        assert_eq!(params, before);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let cfg = small_cfg();
        let mut params = TdtfParams::init(&cfg).unwrap();
        let before = params.clone();
        let mut grads = TdtfGrads::zeros(&cfg).unwrap();
        grads.w_in[(0, 0)] = 0.3;
        grads.w_in[(1, 1)] = -4.0;
        let mut state = AdamState::zeros(&cfg).unwrap();
        let tc = TrainConfig::default();
        adamw_step(&mut params, &grads, &mut state, &tc, 1).unwrap();
        // Bias-corrected first step: m_hat = g, v_hat = g^2, so the update is
        // -lr * g / (|g| + eps) = -lr * sign(g) up to O(eps).
        let d00 = params.w_in[(0, 0)] - before.w_in[(0, 0)];
        let d11 = params.w_in[(1, 1)] - before.w_in[(1, 1)];
        assert!((d00 + tc.lr).abs() < 1e-7);
        assert!((d11 - tc.lr).abs() < 1e-7);
        // Untouched entries stay put.
        assert_eq!(params.w_qk, before.w_qk);
    }

    #[test]
    fn pure_decay_scales_parameters_geometrically() {
        let cfg = small_cfg();
        let mut params = TdtfParams::init(&cfg).unwrap();
        let before = params.clone();
        let grads = TdtfGrads::zeros(&cfg).unwrap();
        let mut state = AdamState::zeros(&cfg).unwrap();
        let tc = TrainConfig {
            weight_decay: 0.1,
            lr: 0.01,
            ..TrainConfig::default()
        };
        adamw_step(&mut params, &grads, &mut state, &tc, 1).unwrap();
        for (a, b) in params.slices().iter().zip(before.slices().iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y * (1.0 - 0.001)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_step_index_zero() {
        let cfg = small_cfg();
        let mut params = TdtfParams::init(&cfg).unwrap();
        let grads = TdtfGrads::zeros(&cfg).unwrap();
        let mut state = AdamState::zeros(&cfg).unwrap();
        assert!(adamw_step(&mut params, &grads, &mut state, &TrainConfig::default(), 0).is_err());
    }
}
