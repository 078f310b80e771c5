//! Trajectory containers, subsampling, burst sampling, and the affine
//! normalization shared by every model in this crate.
//!
//! All types are immutable after construction and safe to share across
//! threads. Randomized operations take an explicit RNG so callers control
//! determinism.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observable state, a real vector of dimension `d`.
pub type State = DVector<f64>;

/// A uniformly sampled sequence of `d`-dimensional observable states.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<State>,
    dt: f64,
    t0: f64,
    label: Option<String>,
}

impl Trajectory {
    /// Builds a trajectory, checking dimensional consistency and finiteness.
    pub fn new(states: Vec<State>, dt: f64, t0: f64, label: Option<String>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::invalid("trajectory must contain at least one state"));
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::invalid(format!(
                "trajectory dt must be positive and finite, got {dt}"
            )));
        }
        if !t0.is_finite() {
            return Err(Error::invalid("trajectory t0 must be finite"));
        }
        let dim = states[0].len();
        if dim == 0 {
            return Err(Error::invalid("trajectory states must have dimension >= 1"));
        }
        for (k, s) in states.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::invalid(format!(
                    "state {k} has dimension {} but state 0 has dimension {dim}",
                    s.len()
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("state {k} contains a non-finite value")));
            }
        }
        Ok(Self { states, dt, t0, label })
    }

    /// Convenience constructor for scalar (d = 1) series.
    pub fn from_scalar_series(values: &[f64], dt: f64, t0: f64) -> Result<Self> {
        let states = values.iter().map(|&v| DVector::from_element(1, v)).collect();
        Self::new(states, dt, t0, None)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Observable dimension `d`.
    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, k: usize) -> &State {
        &self.states[k]
    }

    /// Time stamp of sample `k`.
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Elapsed time covered by the samples.
    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }

    /// The first `n` states, used to seed autoregressive rollouts.
    pub fn head(&self, n: usize) -> Result<Trajectory> {
        if n == 0 || n > self.len() {
            return Err(Error::invalid(format!(
                "cannot take a {n}-state window from a trajectory of length {}",
                self.len()
            )));
        }
        Trajectory::new(self.states[..n].to_vec(), self.dt, self.t0, self.label.clone())
    }

    /// Scalar series of one component.
    pub fn component(&self, idx: usize) -> Result<Vec<f64>> {
        if idx >= self.dim() {
            return Err(Error::invalid(format!(
                "component {idx} out of range for dimension {}",
                self.dim()
            )));
        }
        Ok(self.states.iter().map(|s| s[idx]).collect())
    }

    /// Keeps every `tau`-th state (source indices 0, tau, 2·tau, ...) and
    /// stretches the timestep accordingly.
    pub fn subsample(&self, tau: usize) -> Result<Trajectory> {
        if tau == 0 {
            return Err(Error::invalid("subsample stride tau must be >= 1"));
        }
        let states: Vec<State> = self.states.iter().step_by(tau).cloned().collect();
        Trajectory::new(states, self.dt * tau as f64, self.t0, self.label.clone())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NormalizerRepr {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// Per-component affine map of training data onto the hypercube [-1, 1]^d.
///
/// Components whose training range is degenerate (`hi == lo`) map to 0 and
/// invert to `lo`; a constant channel carries no information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NormalizerRepr", into = "NormalizerRepr")]
pub struct Normalizer {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TryFrom<NormalizerRepr> for Normalizer {
    type Error = Error;

    fn try_from(repr: NormalizerRepr) -> Result<Self> {
        Normalizer::from_bounds(repr.lo, repr.hi)
    }
}

impl From<Normalizer> for NormalizerRepr {
    fn from(n: Normalizer) -> Self {
        NormalizerRepr { lo: n.lo, hi: n.hi }
    }
}

impl Normalizer {
    /// Componentwise extrema over all states of all input trajectories.
    pub fn fit(trajs: &[Trajectory]) -> Result<Self> {
        let first = trajs
            .first()
            .ok_or_else(|| Error::invalid("cannot fit a normalizer on an empty trajectory list"))?;
        let dim = first.dim();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for traj in trajs {
            if traj.dim() != dim {
                return Err(Error::invalid(format!(
                    "trajectories disagree on dimension: {} vs {dim}",
                    traj.dim()
                )));
            }
            for s in traj.states() {
                for i in 0..dim {
                    lo[i] = lo[i].min(s[i]);
                    hi[i] = hi[i].max(s[i]);
                }
            }
        }
        Self::from_bounds(lo, hi)
    }

    pub fn from_bounds(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::invalid("normalizer bounds must be non-empty and equal length"));
        }
        for i in 0..lo.len() {
            if !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(Error::invalid("normalizer bounds must be finite"));
            }
            if hi[i] < lo[i] {
                return Err(Error::invalid(format!(
                    "normalizer component {i} has hi < lo ({} < {})",
                    hi[i], lo[i]
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    fn check_dim(&self, x: &State) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "state dimension {} does not match normalizer dimension {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Affine map into [-1, 1] on the training range; out-of-range inputs are
    /// extrapolated by the same rule without clamping.
    pub fn normalize(&self, x: &State) -> Result<State> {
        self.check_dim(x)?;
        Ok(DVector::from_fn(self.dim(), |i, _| {
            if self.hi[i] > self.lo[i] {
                2.0 * (x[i] - self.lo[i]) / (self.hi[i] - self.lo[i]) - 1.0
            } else {
                0.0
            }
        }))
    }

    /// Exact affine inverse of [`Normalizer::normalize`] on non-degenerate
    /// components; degenerate components return `lo`.
    pub fn denormalize(&self, y: &State) -> Result<State> {
        self.check_dim(y)?;
        Ok(DVector::from_fn(self.dim(), |i, _| {
            if self.hi[i] > self.lo[i] {
                self.lo[i] + (y[i] + 1.0) * (self.hi[i] - self.lo[i]) / 2.0
            } else {
                self.lo[i]
            }
        }))
    }

    pub fn normalize_trajectory(&self, traj: &Trajectory) -> Result<Trajectory> {
        let states = traj
            .states()
            .iter()
            .map(|s| self.normalize(s))
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(states, traj.dt(), traj.t0(), traj.label().map(String::from))
    }

    pub fn denormalize_trajectory(&self, traj: &Trajectory) -> Result<Trajectory> {
        let states = traj
            .states()
            .iter()
            .map(|s| self.denormalize(s))
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(states, traj.dt(), traj.t0(), traj.label().map(String::from))
    }
}

/// `J` bursts of exactly `n + 1` consecutive states, the basic fitting unit.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstDataset {
    bursts: Vec<Vec<State>>,
    n: usize,
    d: usize,
}

impl BurstDataset {
    pub fn new(bursts: Vec<Vec<State>>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("delay length n must be >= 1"));
        }
        if bursts.is_empty() {
            return Err(Error::invalid("burst dataset must contain at least one burst"));
        }
        let d = bursts[0][0].len();
        if d == 0 {
            return Err(Error::invalid("burst states must have dimension >= 1"));
        }
        for (j, burst) in bursts.iter().enumerate() {
            if burst.len() != n + 1 {
                return Err(Error::invalid(format!(
                    "burst {j} has {} states, expected n + 1 = {}",
                    burst.len(),
                    n + 1
                )));
            }
            for (k, s) in burst.iter().enumerate() {
                if s.len() != d {
                    return Err(Error::invalid(format!(
                        "burst {j} state {k} has dimension {}, expected {d}",
                        s.len()
                    )));
                }
                if s.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!(
                        "burst {j} state {k} contains a non-finite value"
                    )));
                }
            }
        }
        Ok(Self { bursts, n, d })
    }

    pub fn bursts(&self) -> &[Vec<State>] {
        &self.bursts
    }

    /// Delay length `n`; every burst holds `n + 1` states.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of bursts `J`.
    pub fn len(&self) -> usize {
        self.bursts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bursts.is_empty()
    }
}

/// Draws `j` bursts of `n + 1` consecutive states, sampling with replacement:
/// a usable trajectory (length >= n + 1) is picked uniformly, then a start
/// index uniformly among its valid starts.
pub fn sample_bursts<R: Rng>(
    trajs: &[Trajectory],
    n: usize,
    j: usize,
    rng: &mut R,
) -> Result<BurstDataset> {
    if n == 0 {
        return Err(Error::invalid("delay length n must be >= 1"));
    }
    if j == 0 {
        return Err(Error::invalid("burst count J must be >= 1"));
    }
    let usable: Vec<&Trajectory> = trajs.iter().filter(|t| t.len() >= n + 1).collect();
    if usable.is_empty() {
        return Err(Error::invalid(format!(
            "no trajectory has the n + 1 = {} states required for burst sampling",
            n + 1
        )));
    }
    let dim = usable[0].dim();
    if usable.iter().any(|t| t.dim() != dim) {
        return Err(Error::invalid("trajectories disagree on dimension"));
    }
    let mut bursts = Vec::with_capacity(j);
    for _ in 0..j {
        let traj = usable[rng.gen_range(0..usable.len())];
        let start = rng.gen_range(0..traj.len() - n);
        bursts.push(traj.states()[start..start + n + 1].to_vec());
    }
    BurstDataset::new(bursts, n)
}
