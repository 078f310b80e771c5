//! delayroll: delay-embedded forecasting for dynamical systems.
//!
//! Two models share one data pipeline. Time-delayed dynamic mode
//! decomposition ([`tddmd`]) fits the best linear map from a window of past
//! states to the next state in closed form. The time-delayed transformer
//! ([`tdtf`]) replaces that linear map with a minimal single-head attention
//! model (one shared feedforward feature map, one query per prediction, a
//! residual increment) trained with exact analytic gradients and AdamW.
//!
//! The [`generators`] module produces the bundled experiment data (sinusoid
//! signals, Lorenz '63 ensembles, a reaction-diffusion PDE reduced by POD),
//! [`metrics`] quantifies rollouts (RMSE, lobe switching, peak statistics),
//! and [`experiment`] wires everything into config-driven runs. See the
//! crate examples for end-to-end usage.

pub mod data;
pub mod error;
pub mod experiment;
pub mod generators;
pub mod io;
pub mod metrics;
pub mod tddmd;
pub mod tdtf;

pub use data::{sample_bursts, BurstDataset, Normalizer, State, Trajectory};
pub use error::{Error, Result};
