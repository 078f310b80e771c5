//! Forward pass: positional encoding, shared feedforward map, single-query
//! attention, residual increment.

use nalgebra::{DMatrix, DVector};

use super::{instrument, TdtfConfig, TdtfParams};
use crate::data::State;
use crate::error::{Error, Result};

/// Appends the normalized window index `k/n` to a state.
pub fn positional_encode(w: &State, k: usize, n: usize) -> Result<DVector<f64>> {
    if n == 0 {
        return Err(Error::invalid("delay length n must be >= 1"));
    }
    if k >= n {
        return Err(Error::invalid(format!(
            "position index k = {k} out of range 0..={}",
            n - 1
        )));
    }
    let d = w.len();
    let mut y = DVector::zeros(d + 1);
    y.rows_mut(0, d).copy_from(w);
    y[d] = k as f64 / n as f64;
    Ok(y)
}

/// The shared feature map `W sigma(U y + b)`.
pub fn feedforward(
    y: &DVector<f64>,
    params: &TdtfParams,
    activation: super::Activation,
) -> Result<DVector<f64>> {
    if y.len() != params.w_in.ncols() {
        return Err(Error::invalid(format!(
            "feedforward input has dimension {}, expected {}",
            y.len(),
            params.w_in.ncols()
        )));
    }
    instrument::bump_ff();
    let mut pre = &params.w_in * y;
    pre += &params.b_in;
    let hid = pre.map(|x| activation.apply(x));
    Ok(&params.w_out * hid)
}

/// Numerically safe softmax (max-score subtraction).
pub(crate) fn softmax(scores: &DVector<f64>) -> DVector<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut weights = scores.map(|s| (s - max).exp());
    let sum: f64 = weights.iter().sum();
    weights /= sum;
    weights
}

/// Single-query attention over transformed states: scores the last entry
/// against every entry through the query-key matrix and returns the
/// weighted sum of value projections.
pub fn attention(
    z: &[DVector<f64>],
    w_qk: &DMatrix<f64>,
    w_val: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let n = z.len();
    if n == 0 {
        return Err(Error::invalid("attention needs at least one input"));
    }
    let d_in = z[0].len();
    if w_qk.shape() != (d_in, d_in) || w_val.ncols() != d_in {
        return Err(Error::invalid("attention matrix shapes do not match the inputs"));
    }
    if z.iter().any(|zk| zk.len() != d_in) {
        return Err(Error::invalid("attention inputs disagree on dimension"));
    }
    // s_k = <z_{n-1}, B z_k> = (B^T z_{n-1}) . z_k
    let query = w_qk.tr_mul(&z[n - 1]);
    let mut scores = DVector::zeros(n);
    for k in 0..n {
        instrument::bump_score();
        scores[k] = query.dot(&z[k]);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical("non-finite attention score".into()));
    }
    let alpha = softmax(&scores);
    let mut zbar = DVector::zeros(d_in);
    for k in 0..n {
        zbar.axpy(alpha[k], &z[k], 1.0);
    }
    Ok(w_val * zbar)
}

/// Intermediate quantities of one forward pass, kept for backpropagation.
pub(crate) struct ForwardCache {
    /// Encoded inputs y_k.
    pub y: Vec<DVector<f64>>,
    /// Pre-activations U y_k + b.
    pub pre: Vec<DVector<f64>>,
    /// Hidden activations sigma(pre_k).
    pub hid: Vec<DVector<f64>>,
    /// Features z_k = W hid_k.
    pub z: Vec<DVector<f64>>,
    pub alpha: DVector<f64>,
    /// Attention-weighted feature sum.
    pub zbar: DVector<f64>,
    pub out: State,
}

pub(crate) fn forward_cached(
    cfg: &TdtfConfig,
    params: &TdtfParams,
    window: &[State],
) -> Result<ForwardCache> {
    cfg.validate()?;
    params.check_shapes(cfg)?;
    if window.len() != cfg.n {
        return Err(Error::invalid(format!(
            "window has {} states, expected n = {}",
            window.len(),
            cfg.n
        )));
    }
    let n = cfg.n;
    let mut y = Vec::with_capacity(n);
    for (k, w) in window.iter().enumerate() {
        if w.len() != cfg.d {
            return Err(Error::invalid(format!(
                "window state {k} has dimension {}, expected d = {}",
                w.len(),
                cfg.d
            )));
        }
        y.push(if cfg.pos_enc {
            positional_encode(w, k, n)?
        } else {
            w.clone()
        });
    }

    let mut pre = Vec::with_capacity(n);
    let mut hid = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for yk in &y {
        instrument::bump_ff();
        let mut p = &params.w_in * yk;
        p += &params.b_in;
        let h = p.map(|x| cfg.activation.apply(x));
        z.push(&params.w_out * &h);
        pre.push(p);
        hid.push(h);
    }

    let query = params.w_qk.tr_mul(&z[n - 1]);
    let mut scores = DVector::zeros(n);
    for k in 0..n {
        instrument::bump_score();
        scores[k] = query.dot(&z[k]);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical("non-finite attention score".into()));
    }
    let alpha = softmax(&scores);
    let mut zbar = DVector::zeros(cfg.d_in());
    for k in 0..n {
        zbar.axpy(alpha[k], &z[k], 1.0);
    }
    let out = &window[n - 1] + &params.w_val * &zbar;
    Ok(ForwardCache {
        y,
        pre,
        hid,
        z,
        alpha,
        zbar,
        out,
    })
}

/// Predicts the next state from a window of `n` states: residual plus the
/// attention-weighted increment.
pub fn forward(cfg: &TdtfConfig, params: &TdtfParams, window: &[State]) -> Result<State> {
    Ok(forward_cached(cfg, params, window)?.out)
}
