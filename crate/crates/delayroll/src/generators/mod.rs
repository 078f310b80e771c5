//! Synthetic data sources: a sinusoid signal, Lorenz '63 ensembles, and a
//! reaction-diffusion solver with POD projection.

mod lorenz;
mod pod;
mod reaction_diffusion;

pub use lorenz::{gen_lorenz, lorenz_orbit, lorenz_rhs, LorenzConfig};
pub use pod::{compute_pod, PodBasis};
pub use reaction_diffusion::{
    solve_reaction_diffusion, BoundaryKind, InitialField, ReactionDiffusionConfig, SnapshotSeries,
};

use crate::data::Trajectory;
use crate::error::{Error, Result};

/// Scalar trajectory `w_k = sin(k * dt)` for `k = 0..=k_max`.
pub fn gen_sinusoid(k_max: usize, dt: f64) -> Result<Trajectory> {
    if k_max == 0 {
        return Err(Error::invalid("sinusoid length k_max must be >= 1"));
    }
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::invalid("sinusoid dt must be positive"));
    }
    let values: Vec<f64> = (0..=k_max).map(|k| (k as f64 * dt).sin()).collect();
    Ok(Trajectory::from_scalar_series(&values, dt, 0.0)?.with_label("sinusoid"))
}

/// Keeps a single component of a multivariate trajectory.
pub fn project_component(traj: &Trajectory, idx: usize) -> Result<Trajectory> {
    let values = traj.component(idx)?;
    let mut out = Trajectory::from_scalar_series(&values, traj.dt(), traj.t0())?;
    if let Some(label) = traj.label() {
        out = out.with_label(label);
    }
    Ok(out)
}
