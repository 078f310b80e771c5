//! Mean-squared increment loss and its exact reverse-mode gradients.
//!
//! The backward pass walks the forward composition in reverse: value path,
//! softmax Jacobian, query and key paths through the score bilinear form,
//! then the shared feedforward map. The feature of the last window state
//! receives three contributions (value, key, query).

use nalgebra::{DMatrix, DVector};

use super::model::forward_cached;
use super::{TdtfConfig, TdtfParams};
use crate::data::State;
use crate::error::{Error, Result};

/// Gradient of the loss with respect to each learnable array.
#[derive(Debug, Clone, PartialEq)]
pub struct TdtfGrads {
    pub w_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
    pub w_out: DMatrix<f64>,
    pub w_qk: DMatrix<f64>,
    pub w_val: DMatrix<f64>,
}

impl TdtfGrads {
    pub fn zeros(cfg: &TdtfConfig) -> Result<Self> {
        cfg.validate()?;
        let d_in = cfg.d_in();
        Ok(Self {
            w_in: DMatrix::zeros(cfg.h, d_in),
            b_in: DVector::zeros(cfg.h),
            w_out: DMatrix::zeros(d_in, cfg.h),
            w_qk: DMatrix::zeros(d_in, d_in),
            w_val: DMatrix::zeros(cfg.d, d_in),
        })
    }

    pub fn slices(&self) -> [&[f64]; 5] {
        [
            self.w_in.as_slice(),
            self.b_in.as_slice(),
            self.w_out.as_slice(),
            self.w_qk.as_slice(),
            self.w_val.as_slice(),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.w_in.as_mut_slice(),
            self.b_in.as_mut_slice(),
            self.w_out.as_mut_slice(),
            self.w_qk.as_mut_slice(),
            self.w_val.as_mut_slice(),
        ]
    }

    fn scale(&mut self, s: f64) {
        for slice in self.slices_mut() {
            for v in slice {
                *v *= s;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

fn check_burst(cfg: &TdtfConfig, j: usize, burst: &[State]) -> Result<()> {
    if burst.len() != cfg.n + 1 {
        return Err(Error::invalid(format!(
            "burst {j} has {} states, expected n + 1 = {}",
            burst.len(),
            cfg.n + 1
        )));
    }
    Ok(())
}

/// Mean over the batch of the squared prediction error
/// `|| w_n - forward(w_0..w_{n-1}) ||^2`.
pub fn loss(cfg: &TdtfConfig, params: &TdtfParams, batch: &[Vec<State>]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("loss needs a non-empty batch"));
    }
    let mut total = 0.0;
    for (j, burst) in batch.iter().enumerate() {
        check_burst(cfg, j, burst)?;
        let out = super::forward(cfg, params, &burst[..cfg.n])?;
        total += (&burst[cfg.n] - out).norm_squared();
    }
    Ok(total / batch.len() as f64)
}

/// Accumulates one burst's (unaveraged) gradient contribution and returns
/// its squared-error loss term.
fn accumulate_burst(
    cfg: &TdtfConfig,
    params: &TdtfParams,
    burst: &[State],
    grads: &mut TdtfGrads,
) -> Result<f64> {
    let n = cfg.n;
    let cache = forward_cached(cfg, params, &burst[..n])?;
    let residual = &cache.out - &burst[n];
    let l = residual.norm_squared();
    let g_out = residual * 2.0;

    // Value path: d/dV of V zbar.
    grads.w_val.ger(1.0, &g_out, &cache.zbar, 1.0);

    // Softmax Jacobian: gamma_k = alpha_k (c_k - sum_r alpha_r c_r) with
    // c_k = <V^T g_out, z_k>.
    let vg = params.w_val.tr_mul(&g_out);
    let c: Vec<f64> = cache.z.iter().map(|zk| vg.dot(zk)).collect();
    let cbar: f64 = (0..n).map(|k| cache.alpha[k] * c[k]).sum();
    let gamma: Vec<f64> = (0..n).map(|k| cache.alpha[k] * (c[k] - cbar)).collect();

    let mut zgamma = DVector::zeros(cfg.d_in());
    for k in 0..n {
        zgamma.axpy(gamma[k], &cache.z[k], 1.0);
    }

    // Score bilinear form: dB = z_{n-1} zgamma^T.
    grads.w_qk.ger(1.0, &cache.z[n - 1], &zgamma, 1.0);

    // Gradients flowing into each feature z_k: value path for every k, key
    // path for every k, query path only into z_{n-1}.
    let key_dir = params.w_qk.tr_mul(&cache.z[n - 1]);
    let query_extra = &params.w_qk * &zgamma;
    for k in 0..n {
        let mut g_z = &vg * cache.alpha[k];
        g_z.axpy(gamma[k], &key_dir, 1.0);
        if k == n - 1 {
            g_z += &query_extra;
        }
        // Feedforward backward: z_k = W sigma(U y_k + b).
        grads.w_out.ger(1.0, &g_z, &cache.hid[k], 1.0);
        let g_hid = params.w_out.tr_mul(&g_z);
        let g_pre = DVector::from_fn(cfg.h, |i, _| {
            g_hid[i] * cfg.activation.deriv(cache.pre[k][i], cache.hid[k][i])
        });
        grads.w_in.ger(1.0, &g_pre, &cache.y[k], 1.0);
        grads.b_in += g_pre;
    }
    Ok(l)
}

/// Shared core: accumulates over any burst sequence in iteration order.
pub(crate) fn loss_and_gradients_from<'a, I>(
    cfg: &TdtfConfig,
    params: &TdtfParams,
    bursts: I,
    count: usize,
) -> Result<(f64, TdtfGrads)>
where
    I: Iterator<Item = &'a Vec<State>>,
{
    if count == 0 {
        return Err(Error::invalid("gradients need a non-empty batch"));
    }
    let mut grads = TdtfGrads::zeros(cfg)?;
    let mut total = 0.0;
    // Fixed accumulation order (by burst index) keeps training bit-reproducible.
    for (j, burst) in bursts.enumerate() {
        check_burst(cfg, j, burst)?;
        total += accumulate_burst(cfg, params, burst, &mut grads)?;
    }
    let scale = 1.0 / count as f64;
    grads.scale(scale);
    let loss = total * scale;
    if !loss.is_finite() || grads.max_abs().is_nan() {
        return Err(Error::Numerical("non-finite loss or gradient".into()));
    }
    Ok((loss, grads))
}

pub(crate) fn loss_and_gradients(
    cfg: &TdtfConfig,
    params: &TdtfParams,
    batch: &[Vec<State>],
) -> Result<(f64, TdtfGrads)> {
    loss_and_gradients_from(cfg, params, batch.iter(), batch.len())
}

/// Analytic gradient of [`loss`] with respect to every parameter.
pub fn gradients(cfg: &TdtfConfig, params: &TdtfParams, batch: &[Vec<State>]) -> Result<TdtfGrads> {
    Ok(loss_and_gradients(cfg, params, batch)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tdtf::Activation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(n: usize, d: usize, h: usize, pos_enc: bool, seed: u64) -> TdtfConfig {
        TdtfConfig {
            n,
            d,
            h,
            pos_enc,
            activation: Activation::Tanh,
            seed,
        }
    }

    fn random_batch(cfg: &TdtfConfig, count: usize, seed: u64) -> Vec<Vec<State>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                (0..cfg.n + 1)
                    .map(|_| DVector::from_fn(cfg.d, |_, _| rng.gen_range(-1.0..1.0)))
                    .collect()
            })
            .collect()
    }

    /// Central finite differences over every parameter entry.
    fn fd_gradients(cfg: &TdtfConfig, params: &TdtfParams, batch: &[Vec<State>]) -> TdtfGrads {
        let step = 1e-5;
        let mut fd = TdtfGrads::zeros(cfg).unwrap();
        for field in 0..5 {
            let len = params.slices()[field].len();
            for idx in 0..len {
                let mut plus = params.clone();
                plus.slices_mut()[field][idx] += step;
                let mut minus = params.clone();
                minus.slices_mut()[field][idx] -= step;
                let lp = loss(cfg, &plus, batch).unwrap();
                let lm = loss(cfg, &minus, batch).unwrap();
                fd.slices_mut()[field][idx] = (lp - lm) / (2.0 * step);
            }
        }
        fd
    }

    fn assert_grads_close(analytic: &TdtfGrads, fd: &TdtfGrads, tol: f64) {
        for (a_slice, f_slice) in analytic.slices().iter().zip(fd.slices().iter()) {
            for (a, f) in a_slice.iter().zip(f_slice.iter()) {
                let rel = (a - f).abs() / a.abs().max(1e-8);
                assert!(rel < tol, "gradient mismatch: analytic {a}, fd {f}, rel {rel}");
            }
        }
    }

    #[test]
    fn loss_is_zero_when_targets_match_predictions() {
        let c = cfg(2, 1, 4, true, 3);
        let params = TdtfParams::init(&c).unwrap();
        let mut batch = random_batch(&c, 5, 4);
        for burst in &mut batch {
            let out = super::super::forward(&c, &params, &burst[..2]).unwrap();
            burst[2] = out;
        }
        assert!(loss(&c, &params, &batch).unwrap() < 1e-30);
    }

    #[test]
    fn loss_zero_value_matrix_with_constant_bursts() {
        let c = cfg(2, 1, 4, true, 3);
        let mut params = TdtfParams::init(&c).unwrap();
        params.w_val = DMatrix::zeros(1, 2);
        let mut batch = random_batch(&c, 5, 4);
        for burst in &mut batch {
            burst[2] = burst[1].clone();
        }
        assert_eq!(loss(&c, &params, &batch).unwrap(), 0.0);
    }

    #[test]
    fn loss_single_burst_arithmetic() {
        // V = 0 makes the prediction w_{n-1}; an increment of 0.3 costs 0.09.
        let c = cfg(2, 1, 4, true, 1);
        let mut params = TdtfParams::init(&c).unwrap();
        params.w_val = DMatrix::zeros(1, 2);
        let burst = vec![
            DVector::from_element(1, 0.1),
            DVector::from_element(1, 0.2),
            DVector::from_element(1, 0.5),
        ];
        let l = loss(&c, &params, &[burst]).unwrap();
        assert!((l - 0.09).abs() < 1e-15);
    }

    #[test]
    fn gradients_vanish_at_a_global_minimum() {
        let c = cfg(3, 2, 5, true, 9);
        let params = TdtfParams::init(&c).unwrap();
        let mut batch = random_batch(&c, 4, 10);
        for burst in &mut batch {
            let out = super::super::forward(&c, &params, &burst[..3]).unwrap();
            burst[3] = out;
        }
        let grads = gradients(&c, &params, &batch).unwrap();
        assert!(grads.max_abs() < 1e-10);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (i, (n, d, h, pos_enc)) in [(1usize, 1usize, 4usize, true), (2, 3, 4, false), (5, 1, 16, true), (3, 2, 8, false)]
            .into_iter()
            .enumerate()
        {
            let c = cfg(n, d, h, pos_enc, 100 + i as u64);
            let params = TdtfParams::init(&c).unwrap();
            let batch = random_batch(&c, 3, 200 + i as u64);
            let analytic = gradients(&c, &params, &batch).unwrap();
            let fd = fd_gradients(&c, &params, &batch);
            assert_grads_close(&analytic, &fd, 1e-5);
        }
    }

    #[test]
    fn value_gradient_hand_derivation_uniform_attention() {
        // With B = 0 and n = 2 the attention is uniform, so
        // dL/dV = mean_j 2 (forward - w_n) ((z_0 + z_1)/2)^T.
        let c = cfg(2, 1, 4, true, 21);
        let mut params = TdtfParams::init(&c).unwrap();
        params.w_qk = DMatrix::zeros(2, 2);
        let batch = random_batch(&c, 6, 22);

        let mut expect = DMatrix::zeros(1, 2);
        for burst in &batch {
            let cache = forward_cached(&c, &params, &burst[..2]).unwrap();
            let g = (&cache.out - &burst[2]) * 2.0;
            let mean_z = (&cache.z[0] + &cache.z[1]) / 2.0;
            expect.ger(1.0 / batch.len() as f64, &g, &mean_z, 1.0);
        }
        let grads = gradients(&c, &params, &batch).unwrap();
        assert!((grads.w_val.clone() - expect).amax() < 1e-12);
    }
}
