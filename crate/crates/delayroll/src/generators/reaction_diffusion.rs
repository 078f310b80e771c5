//! One-dimensional two-species reaction-diffusion solver on x in [0, 1]:
//! second-order central finite differences in space, explicit Euler in time.
//!
//! The fast activator u couples to the slow recovery variable v through
//!   du/dt = D u_xx + (v - u^2 - u^3) / epsilon
//!   dv/dt = D v_xx - u + alpha
//! with Dirichlet values pinned at both endpoints every step.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary treatment. `ZeroFlux` (mirrored ghost nodes) exists for the
/// solver self-test mode; experiments use Dirichlet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Dirichlet,
    ZeroFlux,
}

/// Initial field selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialField {
    /// Boundary-compatible smooth perturbation entering the oscillatory
    /// regime: u = -2 + 4 sin(pi x) cos(2 pi x), v = -4 + 2 sin(pi x).
    Perturbed,
    /// Spatially uniform interior values (boundaries still pinned when
    /// Dirichlet is active).
    Uniform { u: f64, v: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReactionDiffusionConfig {
    /// Diffusion coefficient D (>= 0; zero disables diffusion).
    pub diffusion: f64,
    /// Timescale separation epsilon of the activator.
    pub epsilon: f64,
    /// Constant forcing alpha in the recovery equation.
    pub alpha: f64,
    /// Number of spatial grid points including both boundaries.
    pub nx: usize,
    pub dt: f64,
    pub t_final: f64,
    /// Snapshots with t < t_discard are dropped as transient.
    pub t_discard: f64,
    pub bc_u: f64,
    pub bc_v: f64,
    /// Every `snapshot_stride`-th step is recorded.
    pub snapshot_stride: usize,
    pub boundary: BoundaryKind,
    /// Disabling the reaction terms turns the system into pure diffusion
    /// (used by the conservation self-test).
    pub reaction: bool,
    pub initial: InitialField,
}

impl Default for ReactionDiffusionConfig {
    fn default() -> Self {
        Self {
            diffusion: 0.0322307,
            epsilon: 0.01,
            alpha: 0.01,
            nx: 256,
            dt: 1.25e-4,
            t_final: 100.0,
            t_discard: 15.0,
            bc_u: -2.0,
            bc_v: -4.0,
            snapshot_stride: 20,
            boundary: BoundaryKind::Dirichlet,
            reaction: true,
            initial: InitialField::Perturbed,
        }
    }
}

impl ReactionDiffusionConfig {
    pub fn dx(&self) -> f64 {
        1.0 / (self.nx - 1) as f64
    }

    /// Largest admissible explicit timestep: 0.4 dx^2 / D for diffusion and
    /// 0.4 epsilon for the stiff reaction.
    pub fn stability_bound(&self) -> f64 {
        let diffusive = if self.diffusion > 0.0 {
            0.4 * self.dx() * self.dx() / self.diffusion
        } else {
            f64::INFINITY
        };
        let reactive = if self.reaction { 0.4 * self.epsilon } else { f64::INFINITY };
        diffusive.min(reactive)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 3 {
            return Err(Error::invalid("nx must be >= 3"));
        }
        if self.diffusion < 0.0 || !self.diffusion.is_finite() {
            return Err(Error::invalid("diffusion coefficient must be >= 0"));
        }
        if self.reaction && (self.epsilon <= 0.0 || !self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(Error::invalid("dt must be positive"));
        }
        if self.t_final <= self.dt {
            return Err(Error::invalid("t_final must exceed dt"));
        }
        if self.t_discard < 0.0 || self.t_discard >= self.t_final {
            return Err(Error::invalid("t_discard must lie in [0, t_final)"));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::invalid("snapshot_stride must be >= 1"));
        }
        let bound = self.stability_bound();
        if self.dt > bound {
            return Err(Error::invalid(format!(
                "dt = {} violates the explicit stability bound {bound:.6e} \
                 (min of 0.4*dx^2/D and 0.4*epsilon)",
                self.dt
            )));
        }
        Ok(())
    }
}

/// Retained u-field snapshots, one column per recorded time.
#[derive(Debug, Clone)]
pub struct SnapshotSeries {
    pub snapshots: DMatrix<f64>,
    pub times: Vec<f64>,
    pub dx: f64,
    /// Time between recorded columns (dt * snapshot_stride).
    pub snapshot_dt: f64,
}

fn initial_fields(cfg: &ReactionDiffusionConfig) -> (Vec<f64>, Vec<f64>) {
    let nx = cfg.nx;
    let dx = cfg.dx();
    match cfg.initial {
        InitialField::Perturbed => {
            let mut u = vec![0.0; nx];
            let mut v = vec![0.0; nx];
            for i in 0..nx {
                let x = i as f64 * dx;
                let s = (std::f64::consts::PI * x).sin();
                u[i] = -2.0 + 4.0 * s * (2.0 * std::f64::consts::PI * x).cos();
                v[i] = -4.0 + 2.0 * s;
            }
            (u, v)
        }
        InitialField::Uniform { u, v } => (vec![u; nx], vec![v; nx]),
    }
}

/// Solves the system by the method of lines and returns the u-field
/// snapshots recorded every `snapshot_stride` steps with t >= t_discard.
pub fn solve_reaction_diffusion(cfg: &ReactionDiffusionConfig) -> Result<SnapshotSeries> {
    cfg.validate()?;
    let nx = cfg.nx;
    let dx = cfg.dx();
    let dx2 = dx * dx;
    let steps = (cfg.t_final / cfg.dt).round() as usize;

    let (mut u, mut v) = initial_fields(cfg);
    if cfg.boundary == BoundaryKind::Dirichlet {
        u[0] = cfg.bc_u;
        u[nx - 1] = cfg.bc_u;
        v[0] = cfg.bc_v;
        v[nx - 1] = cfg.bc_v;
    }
    let mut un = vec![0.0; nx];
    let mut vn = vec![0.0; nx];

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    let half_dt = 0.5 * cfg.dt;
    let record = |step: usize, u: &[f64], times: &mut Vec<f64>, columns: &mut Vec<Vec<f64>>| {
        let t = step as f64 * cfg.dt;
        if step % cfg.snapshot_stride == 0 && t >= cfg.t_discard - half_dt {
            columns.push(u.to_vec());
            times.push(t);
        }
    };
    record(0, &u, &mut times, &mut columns);

    for step in 1..=steps {
        // Laplacian with either mirrored ghosts (zero flux) or pinned ends.
        let lap = |f: &[f64], i: usize| -> f64 {
            let left = if i == 0 { f[1] } else { f[i - 1] };
            let right = if i == nx - 1 { f[nx - 2] } else { f[i + 1] };
            (left - 2.0 * f[i] + right) / dx2
        };
        let interior_only = cfg.boundary == BoundaryKind::Dirichlet;
        let range = if interior_only { 1..nx - 1 } else { 0..nx };
        for i in range {
            let mut du = cfg.diffusion * lap(&u, i);
            let mut dv = cfg.diffusion * lap(&v, i);
            if cfg.reaction {
                du += (v[i] - u[i] * u[i] - u[i] * u[i] * u[i]) / cfg.epsilon;
                dv += -u[i] + cfg.alpha;
            }
            un[i] = u[i] + cfg.dt * du;
            vn[i] = v[i] + cfg.dt * dv;
        }
        if interior_only {
            un[0] = cfg.bc_u;
            un[nx - 1] = cfg.bc_u;
            vn[0] = cfg.bc_v;
            vn[nx - 1] = cfg.bc_v;
        }
        std::mem::swap(&mut u, &mut un);
        std::mem::swap(&mut v, &mut vn);

        if step % 64 == 0 || step == steps {
            if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
                return Err(Error::Diverged {
                    context: "reaction-diffusion integration".into(),
                    step,
                });
            }
        }
        record(step, &u, &mut times, &mut columns);
    }

    if columns.is_empty() {
        return Err(Error::invalid(
            "no snapshots retained; lower t_discard or extend t_final",
        ));
    }
    let m = columns.len();
    let snapshots = DMatrix::from_fn(nx, m, |i, j| columns[j][i]);
    Ok(SnapshotSeries {
        snapshots,
        times,
        dx,
        snapshot_dt: cfg.dt * cfg.snapshot_stride as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ReactionDiffusionConfig {
        ReactionDiffusionConfig {
            nx: 64,
            dt: 1e-4,
            t_final: 1.0,
            t_discard: 0.0,
            snapshot_stride: 100,
            ..ReactionDiffusionConfig::default()
        }
    }

    #[test]
    fn dirichlet_values_pinned_on_every_snapshot() {
        let cfg = small_cfg();
        let series = solve_reaction_diffusion(&cfg).unwrap();
        for j in 0..series.snapshots.ncols() {
            assert_eq!(series.snapshots[(0, j)], -2.0);
            assert_eq!(series.snapshots[(cfg.nx - 1, j)], -2.0);
        }
    }

    #[test]
    fn stability_bound_violation_names_the_bound() {
        let cfg = ReactionDiffusionConfig {
            dt: 1.0,
            ..ReactionDiffusionConfig::default()
        };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("stability bound"), "{err}");
    }

    #[test]
    fn pure_reaction_equilibrium_is_stationary() {
        // With D = 0 the reaction equilibrium solves v - u^2 - u^3 = 0 and
        // -u + alpha = 0, i.e. u* = alpha, v* = alpha^2 + alpha^3.
        let alpha = 0.01f64;
        let u_star = alpha;
        let v_star = alpha * alpha + alpha * alpha * alpha;
        let cfg = ReactionDiffusionConfig {
            diffusion: 0.0,
            nx: 16,
            dt: 1e-4,
            t_final: 100.0 * 1e-4,
            t_discard: 0.0,
            snapshot_stride: 1,
            boundary: BoundaryKind::ZeroFlux,
            initial: InitialField::Uniform { u: u_star, v: v_star },
            ..ReactionDiffusionConfig::default()
        };
        let series = solve_reaction_diffusion(&cfg).unwrap();
        let last = series.snapshots.column(series.snapshots.ncols() - 1);
        for i in 0..cfg.nx {
            assert!((last[i] - u_star).abs() < 1e-10, "interior moved: {}", last[i]);
        }
    }

    #[test]
    fn halving_dt_converges_first_order() {
        let run = |dt: f64| {
            let cfg = ReactionDiffusionConfig {
                nx: 48,
                dt,
                t_final: 0.5,
                t_discard: 0.0,
                snapshot_stride: (0.5 / dt).round() as usize,
                ..ReactionDiffusionConfig::default()
            };
            let s = solve_reaction_diffusion(&cfg).unwrap();
            s.snapshots.column(s.snapshots.ncols() - 1).clone_owned()
        };
        let base = 5e-5;
        let diff_coarse = (run(base) - run(base / 2.0)).amax();
        let diff_fine = (run(base / 2.0) - run(base / 4.0)).amax();
        let ratio = diff_coarse / diff_fine;
        assert!(
            (1.5..=3.0).contains(&ratio),
            "expected ~2x shrink per dt halving, got {ratio} ({diff_coarse} / {diff_fine})"
        );
    }

    #[test]
    fn zero_reaction_zero_flux_conserves_mass() {
        let cfg = ReactionDiffusionConfig {
            nx: 64,
            dt: 1e-4,
            t_final: 1.0,
            t_discard: 0.0,
            snapshot_stride: 1000,
            boundary: BoundaryKind::ZeroFlux,
            reaction: false,
            ..ReactionDiffusionConfig::default()
        };
        let series = solve_reaction_diffusion(&cfg).unwrap();
        // Trapezoidal quadrature: with mirrored ghost nodes the discrete
        // diffusion flux telescopes to zero under half-weighted endpoints.
        let mass = |j: usize| -> f64 {
            let col = series.snapshots.column(j);
            let interior: f64 = (1..cfg.nx - 1).map(|i| col[i]).sum();
            (interior + 0.5 * (col[0] + col[cfg.nx - 1])) * series.dx
        };
        let m0 = mass(0);
        let duration = series.times.last().unwrap() - series.times[0];
        for j in 1..series.snapshots.ncols() {
            assert!(
                (mass(j) - m0).abs() <= 1e-8 * duration.max(1.0),
                "mass drifted: {} vs {m0}",
                mass(j)
            );
        }
    }

    #[test]
    fn snapshot_cadence_and_discard() {
        let cfg = ReactionDiffusionConfig {
            nx: 32,
            dt: 1e-4,
            t_final: 0.02,
            t_discard: 0.01,
            snapshot_stride: 10,
            ..ReactionDiffusionConfig::default()
        };
        let series = solve_reaction_diffusion(&cfg).unwrap();
        assert!(series.times.iter().all(|&t| t >= 0.01 - 5e-5));
        assert_eq!(series.snapshot_dt, 1e-3);
        let diffs: Vec<f64> = series.times.windows(2).map(|w| w[1] - w[0]).collect();
        for d in diffs {
            assert!((d - 1e-3).abs() < 1e-12);
        }
    }
}
