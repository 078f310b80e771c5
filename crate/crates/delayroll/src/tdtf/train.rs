//! Mini-batch AdamW training loop and autoregressive rollout.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::grad::loss_and_gradients_from;
use super::{adamw_step, forward, AdamState, TdtfConfig, TdtfParams, TrainConfig};
use crate::data::{BurstDataset, Normalizer, State, Trajectory};
use crate::error::{Error, Result};

/// Trains a fresh parameter set on the burst dataset and returns it together
/// with the per-epoch mean training loss.
///
/// Bursts are reshuffled every epoch with the seeded source and consumed in
/// mini-batches (the last batch may be smaller). Given identical seeds the
/// run is bit-reproducible.
pub fn train(
    cfg: &TdtfConfig,
    tc: &TrainConfig,
    data: &BurstDataset,
) -> Result<(TdtfParams, Vec<f64>)> {
    cfg.validate()?;
    tc.validate()?;
    if data.n() != cfg.n {
        return Err(Error::invalid(format!(
            "dataset delay length {} does not match config n = {}",
            data.n(),
            cfg.n
        )));
    }
    if data.d() != cfg.d {
        return Err(Error::invalid(format!(
            "dataset dimension {} does not match config d = {}",
            data.d(),
            cfg.d
        )));
    }

    let mut params = TdtfParams::init(cfg)?;
    let mut state = AdamState::zeros(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let j = data.len();
    let mut order: Vec<usize> = (0..j).collect();
    let mut history = Vec::with_capacity(tc.epochs);
    let mut step = 0usize;

    for epoch in 0..tc.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, chunk) in order.chunks(tc.batch_size).enumerate() {
            step += 1;
            let batch = chunk.iter().map(|&i| &data.bursts()[i]);
            let (batch_loss, grads) =
                loss_and_gradients_from(cfg, &params, batch, chunk.len()).map_err(|e| match e {
                    Error::Numerical(_) => Error::Diverged {
                        context: format!("tdtf training (epoch {epoch}, batch {batch_idx})"),
                        step,
                    },
                    other => other,
                })?;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    context: format!("tdtf training (epoch {epoch}, batch {batch_idx})"),
                    step,
                });
            }
            adamw_step(&mut params, &grads, &mut state, tc, step)?;
            epoch_loss += batch_loss * chunk.len() as f64;
        }
        history.push(epoch_loss / j as f64);
    }
    Ok((params, history))
}

/// Autoregressive rollout: normalizes the seed window, repeatedly applies the
/// model with window-relative position indices, and denormalizes the
/// predictions. The returned trajectory starts with the original window.
pub fn rollout_tdtf(
    cfg: &TdtfConfig,
    params: &TdtfParams,
    normalizer: &Normalizer,
    initial_window: &Trajectory,
    steps: usize,
) -> Result<Trajectory> {
    cfg.validate()?;
    params.check_shapes(cfg)?;
    if initial_window.len() != cfg.n {
        return Err(Error::invalid(format!(
            "initial window must contain exactly n = {} states, got {}",
            cfg.n,
            initial_window.len()
        )));
    }
    if initial_window.dim() != cfg.d {
        return Err(Error::invalid(format!(
            "window dimension {} does not match model d = {}",
            initial_window.dim(),
            cfg.d
        )));
    }

    let mut normalized: Vec<State> = initial_window
        .states()
        .iter()
        .map(|s| normalizer.normalize(s))
        .collect::<Result<_>>()?;
    let mut out_states: Vec<State> = initial_window.states().to_vec();
    for step in 0..steps {
        let window = &normalized[normalized.len() - cfg.n..];
        let next = forward(cfg, params, window)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                context: "tdtf rollout".into(),
                step,
            });
        }
        out_states.push(normalizer.denormalize(&next)?);
        normalized.push(next);
    }
    Trajectory::new(
        out_states,
        initial_window.dt(),
        initial_window.t0(),
        initial_window.label().map(String::from),
    )
}
