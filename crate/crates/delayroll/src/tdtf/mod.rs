//! The time-delayed transformer: a deliberately minimal sequence model for
//! delay windows.
//!
//! Each of the `n` window states is positionally encoded (its normalized
//! window index is appended), passed through one shared feedforward map,
//! and combined by a single attention query evaluated at the final index.
//! The model predicts the increment to the last state, so the output is
//! `w_{n-1} + sum_k alpha_k * V z_k`. Parameter count is independent of the
//! delay length and one evaluation costs O(n).

mod grad;
mod model;
mod optim;
mod train;

pub use grad::{gradients, loss, TdtfGrads};
pub use model::{attention, feedforward, forward, positional_encode};
pub use optim::{adamw_step, AdamState, TrainConfig};
pub use train::{rollout_tdtf, train};

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Normalizer;
use crate::error::{Error, Result};
use crate::io;

/// Componentwise nonlinearity of the feedforward layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Gelu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            // tanh form of GELU; the analytic derivative below differentiates
            // exactly this expression.
            Activation::Gelu => {
                let c = (2.0 / std::f64::consts::PI).sqrt();
                0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
            }
        }
    }

    /// Derivative at pre-activation `x`, given `out = apply(x)`.
    pub fn deriv(self, x: f64, out: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - out * out,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => {
                let c = (2.0 / std::f64::consts::PI).sqrt();
                let inner = c * (x + 0.044715 * x * x * x);
                let t = inner.tanh();
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x)
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "gelu" => Ok(Activation::Gelu),
            other => Err(Error::invalid(format!(
                "unknown activation `{other}` (expected tanh, relu, or gelu)"
            ))),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Gelu => "gelu",
        };
        f.write_str(s)
    }
}

/// Architecture of a time-delayed transformer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TdtfConfig {
    /// Delay length (window size).
    pub n: usize,
    /// Observable dimension.
    pub d: usize,
    /// Hidden width of the feedforward map.
    pub h: usize,
    /// Append the normalized window index k/n to each state.
    pub pos_enc: bool,
    pub activation: Activation,
    /// Seed for parameter initialization.
    pub seed: u64,
}

impl Default for TdtfConfig {
    fn default() -> Self {
        Self {
            n: 1,
            d: 1,
            h: 10,
            pos_enc: true,
            activation: Activation::Tanh,
            seed: 0,
        }
    }
}

impl TdtfConfig {
    /// Input dimension of the feedforward map: d + 1 with positional
    /// encoding, d without.
    pub fn d_in(&self) -> usize {
        if self.pos_enc {
            self.d + 1
        } else {
            self.d
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.h == 0 {
            return Err(Error::invalid("n, d, and h must all be >= 1"));
        }
        Ok(())
    }

    /// Number of learnable scalars; independent of the delay length.
    pub fn param_count(&self) -> usize {
        let d_in = self.d_in();
        self.h * d_in + self.h + d_in * self.h + d_in * d_in + self.d * d_in
    }
}

/// The five learnable arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct TdtfParams {
    /// First feedforward layer, h x d_in.
    pub w_in: DMatrix<f64>,
    /// Bias of the first layer, h.
    pub b_in: DVector<f64>,
    /// Second feedforward layer, d_in x h.
    pub w_out: DMatrix<f64>,
    /// Query-key matrix, d_in x d_in.
    pub w_qk: DMatrix<f64>,
    /// Value matrix, d x d_in.
    pub w_val: DMatrix<f64>,
}

impl TdtfParams {
    /// Seeded uniform(-s, s) initialization with s = 1/sqrt(fan_in) per
    /// matrix; biases start at zero. Matrices are filled row-major in the
    /// fixed order w_in, w_out, w_qk, w_val.
    pub fn init(cfg: &TdtfConfig) -> Result<Self> {
        cfg.validate()?;
        let d_in = cfg.d_in();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut fill = |rows: usize, cols: usize, fan_in: usize| -> DMatrix<f64> {
            let s = 1.0 / (fan_in as f64).sqrt();
            let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-s..s)).collect();
            DMatrix::from_row_slice(rows, cols, &data)
        };
        Ok(Self {
            w_in: fill(cfg.h, d_in, d_in),
            b_in: DVector::zeros(cfg.h),
            w_out: fill(d_in, cfg.h, cfg.h),
            w_qk: fill(d_in, d_in, d_in),
            w_val: fill(cfg.d, d_in, d_in),
        })
    }

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

    pub fn check_shapes(&self, cfg: &TdtfConfig) -> Result<()> {
        let d_in = cfg.d_in();
        let ok = self.w_in.shape() == (cfg.h, d_in)
            && self.b_in.len() == cfg.h
            && self.w_out.shape() == (d_in, cfg.h)
            && self.w_qk.shape() == (d_in, d_in)
            && self.w_val.shape() == (cfg.d, d_in);
        if !ok {
            return Err(Error::invalid("parameter shapes do not match the config"));
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.w_in.len() + self.b_in.len() + self.w_out.len() + self.w_qk.len() + self.w_val.len()
    }

    /// Flat views over all parameters in a fixed field order.
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
}

fn matrix_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct TdtfParamsRepr {
    #[serde(rename = "U")]
    u: Vec<f64>,
    b: Vec<f64>,
    #[serde(rename = "W")]
    w: Vec<f64>,
    #[serde(rename = "B")]
    qk: Vec<f64>,
    #[serde(rename = "V")]
    v: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TdtfFile {
    config: TdtfConfig,
    params: TdtfParamsRepr,
    normalizer: Normalizer,
    train_config: TrainConfig,
    final_loss: f64,
}

pub fn save_tdtf(
    path: &Path,
    cfg: &TdtfConfig,
    params: &TdtfParams,
    normalizer: &Normalizer,
    train_config: &TrainConfig,
    final_loss: f64,
) -> Result<()> {
    params.check_shapes(cfg)?;
    io::write_json(
        path,
        &TdtfFile {
            config: cfg.clone(),
            params: TdtfParamsRepr {
                u: matrix_row_major(&params.w_in),
                b: params.b_in.as_slice().to_vec(),
                w: matrix_row_major(&params.w_out),
                qk: matrix_row_major(&params.w_qk),
                v: matrix_row_major(&params.w_val),
            },
            normalizer: normalizer.clone(),
            train_config: train_config.clone(),
            final_loss,
        },
    )
}

pub fn load_tdtf(path: &Path) -> Result<(TdtfConfig, TdtfParams, Normalizer, TrainConfig, f64)> {
    let file: TdtfFile = io::read_json(path)?;
    let cfg = file.config;
    cfg.validate()?;
    let d_in = cfg.d_in();
    let expect = |name: &str, len: usize, got: usize| -> Result<()> {
        if len != got {
            return Err(Error::invalid(format!(
                "tdtf file field {name} has length {got}, expected {len}"
            )));
        }
        Ok(())
    };
    expect("U", cfg.h * d_in, file.params.u.len())?;
    expect("b", cfg.h, file.params.b.len())?;
    expect("W", d_in * cfg.h, file.params.w.len())?;
    expect("B", d_in * d_in, file.params.qk.len())?;
    expect("V", cfg.d * d_in, file.params.v.len())?;
    let params = TdtfParams {
        w_in: DMatrix::from_row_slice(cfg.h, d_in, &file.params.u),
        b_in: DVector::from_vec(file.params.b),
        w_out: DMatrix::from_row_slice(d_in, cfg.h, &file.params.w),
        w_qk: DMatrix::from_row_slice(d_in, d_in, &file.params.qk),
        w_val: DMatrix::from_row_slice(cfg.d, d_in, &file.params.v),
    };
    Ok((cfg, params, file.normalizer, file.train_config, file.final_loss))
}

/// Thread-local operation counters used to assert the O(n) cost contract.
#[doc(hidden)]
pub mod instrument {
    use std::cell::Cell;

    thread_local! {
        static FF_EVALS: Cell<u64> = const { Cell::new(0) };
        static SCORE_EVALS: Cell<u64> = const { Cell::new(0) };
    }

    pub fn reset() {
        FF_EVALS.with(|c| c.set(0));
        SCORE_EVALS.with(|c| c.set(0));
    }

    pub fn ff_evals() -> u64 {
        FF_EVALS.with(|c| c.get())
    }

    pub fn score_evals() -> u64 {
        SCORE_EVALS.with(|c| c.get())
    }

    pub(crate) fn bump_ff() {
        FF_EVALS.with(|c| c.set(c.get() + 1));
    }

    pub(crate) fn bump_score() {
        SCORE_EVALS.with(|c| c.set(c.get() + 1));
    }
}
