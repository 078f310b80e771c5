//! Time-delayed dynamic mode decomposition: the closed-form linear delay
//! model.
//!
//! A delay window of `n` stacked states evolves under a block-companion
//! operator whose upper rows merely shift the window. Only the last block
//! row carries fitted content, so the model stores just that `d x (n*d)`
//! row and fits it by pseudoinverse least squares of each burst's final
//! state against its stacked history.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{BurstDataset, Normalizer, State, Trajectory};
use crate::error::{Error, Result};
use crate::io;

/// Default relative singular-value cutoff for the pseudoinverse.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Moore-Penrose pseudoinverse via SVD. Singular values below
/// `rel_tol * sigma_max` are treated as zero.
pub fn pseudoinverse(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    if m.is_empty() {
        return Err(Error::invalid("cannot invert an empty matrix"));
    }
    if rel_tol < 0.0 || !rel_tol.is_finite() {
        return Err(Error::invalid("rel_tol must be finite and >= 0"));
    }
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let sigma_max = svd.singular_values.max();
    let cutoff = rel_tol * sigma_max;

    // pinv = V . diag(1/sigma) . U^T, zeroing truncated directions.
    let mut ut = u.transpose();
    for (i, mut row) in ut.row_iter_mut().enumerate() {
        let s = svd.singular_values[i];
        let inv = if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
        for v in row.iter_mut() {
            *v *= inv;
        }
    }
    Ok(v_t.transpose() * ut)
}

/// The fitted block row `[A_0 ... A_{n-1}]` of the augmented delay operator.
#[derive(Debug, Clone, PartialEq)]
pub struct TddmdModel {
    a_hat: DMatrix<f64>,
    n: usize,
    d: usize,
}

impl TddmdModel {
    pub fn new(a_hat: DMatrix<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invalid("model dimensions must be >= 1"));
        }
        if a_hat.nrows() != d || a_hat.ncols() != n * d {
            return Err(Error::invalid(format!(
                "a_hat must be {d} x {}, got {} x {}",
                n * d,
                a_hat.nrows(),
                a_hat.ncols()
            )));
        }
        if a_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("a_hat contains non-finite entries"));
        }
        Ok(Self { a_hat, n, d })
    }

    pub fn a_hat(&self) -> &DMatrix<f64> {
        &self.a_hat
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// The `d x d` block `A_k` acting on the window state with delay offset
    /// `k` (k = n-1 is the most recent state).
    pub fn block(&self, k: usize) -> Result<DMatrix<f64>> {
        if k >= self.n {
            return Err(Error::invalid(format!("block index {k} out of range for n = {}", self.n)));
        }
        Ok(self.a_hat.view((0, k * self.d), (self.d, self.d)).into_owned())
    }

    fn stack_window(&self, window: &[State]) -> Result<DVector<f64>> {
        if window.len() != self.n {
            return Err(Error::invalid(format!(
                "window has {} states, model expects n = {}",
                window.len(),
                self.n
            )));
        }
        let mut stacked = DVector::zeros(self.n * self.d);
        for (k, s) in window.iter().enumerate() {
            if s.len() != self.d {
                return Err(Error::invalid(format!(
                    "window state {k} has dimension {}, model expects d = {}",
                    s.len(),
                    self.d
                )));
            }
            stacked.rows_mut(k * self.d, self.d).copy_from(s);
        }
        Ok(stacked)
    }

    /// Applies the fitted row to a stacked window `[w_0; ...; w_{n-1}]`.
    pub fn predict_next(&self, window: &[State]) -> Result<State> {
        let stacked = self.stack_window(window)?;
        Ok(&self.a_hat * stacked)
    }

    /// Autoregressive continuation: returns the initial window followed by
    /// `steps` predicted states.
    pub fn rollout(&self, initial_window: &Trajectory, steps: usize) -> Result<Trajectory> {
        if initial_window.len() != self.n {
            return Err(Error::invalid(format!(
                "initial window must contain exactly n = {} states, got {}",
                self.n,
                initial_window.len()
            )));
        }
        let mut states: Vec<State> = initial_window.states().to_vec();
        for step in 0..steps {
            let next = self.predict_next(&states[states.len() - self.n..])?;
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    context: "tddmd rollout".into(),
                    step,
                });
            }
            states.push(next);
        }
        Trajectory::new(
            states,
            initial_window.dt(),
            initial_window.t0(),
            initial_window.label().map(String::from),
        )
    }
}

/// Least-squares fit of the last block row: stacks each burst's first `n`
/// states as a column of `X`, its final state as a column of `Y`, and
/// computes `Y . pinv(X)`.
pub fn fit_tddmd(data: &BurstDataset, rel_tol: f64) -> Result<TddmdModel> {
    let (n, d, j) = (data.n(), data.d(), data.len());
    let x = DMatrix::from_fn(n * d, j, |row, col| {
        let (k, i) = (row / d, row % d);
        data.bursts()[col][k][i]
    });
    let y = DMatrix::from_fn(d, j, |i, col| data.bursts()[col][n][i]);
    let a_hat = y * pseudoinverse(&x, rel_tol)?;
    TddmdModel::new(a_hat, n, d)
}

#[derive(Serialize, Deserialize)]
struct TddmdFile {
    n: usize,
    d: usize,
    /// Row-major `d x (n*d)` fitted block row.
    a_hat: Vec<f64>,
    normalizer: Normalizer,
    rel_tol: f64,
}

pub fn save_tddmd(path: &Path, model: &TddmdModel, normalizer: &Normalizer, rel_tol: f64) -> Result<()> {
    let mut a_hat = Vec::with_capacity(model.a_hat.len());
    for i in 0..model.a_hat.nrows() {
        for j in 0..model.a_hat.ncols() {
            a_hat.push(model.a_hat[(i, j)]);
        }
    }
    io::write_json(
        path,
        &TddmdFile {
            n: model.n,
            d: model.d,
            a_hat,
            normalizer: normalizer.clone(),
            rel_tol,
        },
    )
}

pub fn load_tddmd(path: &Path) -> Result<(TddmdModel, Normalizer, f64)> {
    let file: TddmdFile = io::read_json(path)?;
    if file.a_hat.len() != file.d * file.n * file.d {
        return Err(Error::invalid("tddmd file has inconsistent a_hat length"));
    }
    let a_hat = DMatrix::from_row_slice(file.d, file.n * file.d, &file.a_hat);
    Ok((TddmdModel::new(a_hat, file.n, file.d)?, file.normalizer, file.rel_tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sample_bursts;
    use crate::generators::gen_sinusoid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn training_residual(model: &TddmdModel, a: &DMatrix<f64>, data: &BurstDataset) -> f64 {
        let n = model.n();
        data.bursts()
            .iter()
            .map(|burst| {
                let stacked = model.stack_window(&burst[..n]).unwrap();
                (a * stacked - &burst[n]).norm_squared()
            })
            .sum()
    }

    #[test]
    fn pinv_of_identity() {
        let id = DMatrix::<f64>::identity(3, 3);
        let p = pseudoinverse(&id, DEFAULT_REL_TOL).unwrap();
        assert!((p - id).amax() < 1e-12);
    }

    #[test]
    fn pinv_of_rank_deficient_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]));
        let p = pseudoinverse(&m, DEFAULT_REL_TOL).unwrap();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-12);
        assert_eq!(p[(1, 1)], 0.0);
        assert_eq!(p[(0, 1)], 0.0);
        assert_eq!(p[(1, 0)], 0.0);
    }

    #[test]
    fn pinv_is_left_inverse_on_full_column_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = DMatrix::from_fn(5, 3, |_, _| rng.gen_range(-1.0..1.0));
        let p = pseudoinverse(&m, DEFAULT_REL_TOL).unwrap();
        let eye = &p * &m;
        assert!((eye - DMatrix::identity(3, 3)).amax() < 1e-8);
    }

    #[test]
    fn pinv_satisfies_moore_penrose_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = DMatrix::from_fn(4, 6, |_, _| rng.gen_range(-1.0..1.0));
        let p = pseudoinverse(&m, DEFAULT_REL_TOL).unwrap();
        assert!((&m * &p * &m - &m).amax() < 1e-8);
        assert!((&p * &m * &p - &p).amax() < 1e-8);
        assert!(((&m * &p).transpose() - &m * &p).amax() < 1e-8);
        assert!(((&p * &m).transpose() - &p * &m).amax() < 1e-8);
    }

    #[test]
    fn sinusoid_fit_recovers_trig_recurrence() {
        let dt = 4.0 * std::f64::consts::PI / 100.0;
        let traj = gen_sinusoid(200, dt).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let data = sample_bursts(std::slice::from_ref(&traj), 2, 10, &mut rng).unwrap();
        let model = fit_tddmd(&data, DEFAULT_REL_TOL).unwrap();
        let a1 = model.block(1).unwrap()[(0, 0)];
        let a0 = model.block(0).unwrap()[(0, 0)];
        assert!((a1 - 2.0 * dt.cos()).abs() < 1e-8, "A1 = {a1}");
        assert!((a0 + 1.0).abs() < 1e-8, "A0 = {a0}");
    }

    #[test]
    fn constant_signal_yields_identity_dynamics() {
        let traj = Trajectory::from_scalar_series(&[3.5; 12], 1.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = sample_bursts(&[traj], 1, 6, &mut rng).unwrap();
        let model = fit_tddmd(&data, DEFAULT_REL_TOL).unwrap();
        assert!((model.a_hat()[(0, 0)] - 1.0).abs() < 1e-10);
    }

    /// Generate-then-recover oracle: data synthesized from a known random
    /// operator must be fit back exactly.
    #[test]
    fn recovers_random_operator_from_synthetic_data() {
        for (d, n, seed) in [(1usize, 2usize, 3u64), (2, 4, 4), (3, 2, 5)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a_true = DMatrix::from_fn(d, n * d, |_, _| rng.gen_range(-0.5..0.5));
            let j = n * d + 5;
            let bursts: Vec<Vec<State>> = (0..j)
                .map(|_| {
                    let mut burst: Vec<State> =
                        (0..n).map(|_| DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0))).collect();
                    let mut stacked = DVector::zeros(n * d);
                    for (k, s) in burst.iter().enumerate() {
                        stacked.rows_mut(k * d, d).copy_from(s);
                    }
                    burst.push(&a_true * stacked);
                    burst
                })
                .collect();
            let data = BurstDataset::new(bursts, n).unwrap();
            let model = fit_tddmd(&data, DEFAULT_REL_TOL).unwrap();
            assert!(
                (model.a_hat() - &a_true).amax() < 1e-8,
                "recovery failed for d={d}, n={n}"
            );
        }
    }

    #[test]
    fn fitted_row_matches_full_companion_fit() {
        // Oracle route: fit the whole nd x nd operator Y X^+ and compare its
        // last d rows with the directly fitted block row.
        let dt = 0.3;
        let traj = gen_sinusoid(60, dt).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = sample_bursts(&[traj], 3, 25, &mut rng).unwrap();
        let (n, d, j) = (data.n(), data.d(), data.len());
        let x = DMatrix::from_fn(n * d, j, |row, col| data.bursts()[col][row / d][row % d]);
        let y = DMatrix::from_fn(n * d, j, |row, col| data.bursts()[col][row / d + 1][row % d]);
        let a_td = &y * pseudoinverse(&x, DEFAULT_REL_TOL).unwrap();
        let last_rows = a_td.view(((n - 1) * d, 0), (d, n * d)).into_owned();

        let model = fit_tddmd(&data, DEFAULT_REL_TOL).unwrap();
        assert!((model.a_hat() - last_rows).amax() < 1e-8);
    }

    #[test]
    fn companion_shift_rows_reproduce_window() {
        // Reconstruct the full operator from the fitted row; its upper rows
        // must shift the augmented state exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (n, d) = (4usize, 2usize);
        let a_hat = DMatrix::from_fn(d, n * d, |_, _| rng.gen_range(-1.0..1.0));
        let model = TddmdModel::new(a_hat.clone(), n, d).unwrap();

        let mut a_td = DMatrix::zeros(n * d, n * d);
        for k in 0..n - 1 {
            for i in 0..d {
                a_td[(k * d + i, (k + 1) * d + i)] = 1.0;
            }
        }
        a_td.view_mut(((n - 1) * d, 0), (d, n * d)).copy_from(&a_hat);

        let window: Vec<State> =
            (0..n).map(|_| DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0))).collect();
        let stacked = model.stack_window(&window).unwrap();
        let advanced = &a_td * &stacked;
        for k in 0..n - 1 {
            for i in 0..d {
                assert_eq!(advanced[k * d + i], stacked[(k + 1) * d + i]);
            }
        }
        let predicted = model.predict_next(&window).unwrap();
        for i in 0..d {
            assert!((advanced[(n - 1) * d + i] - predicted[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn n_equal_one_reduces_to_plain_dmd() {
        let traj = gen_sinusoid(50, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let data = sample_bursts(&[traj], 1, 30, &mut rng).unwrap();
        // Plain DMD oracle: A = Y X^+ over the individual transitions.
        let j = data.len();
        let x = DMatrix::from_fn(1, j, |_, col| data.bursts()[col][0][0]);
        let y = DMatrix::from_fn(1, j, |_, col| data.bursts()[col][1][0]);
        let plain = &y * pseudoinverse(&x, DEFAULT_REL_TOL).unwrap();
        let model = fit_tddmd(&data, DEFAULT_REL_TOL).unwrap();
        assert!((model.a_hat()[(0, 0)] - plain[(0, 0)]).abs() < 1e-10);
    }

    #[test]
    fn predict_pure_shift_returns_last_state() {
        let (n, d) = (3usize, 2usize);
        let mut a_hat = DMatrix::zeros(d, n * d);
        a_hat.view_mut((0, (n - 1) * d), (d, d)).copy_from(&DMatrix::identity(d, d));
        let model = TddmdModel::new(a_hat, n, d).unwrap();
        let window: Vec<State> = (0..n)
            .map(|k| DVector::from_vec(vec![k as f64, -(k as f64)]))
            .collect();
        let out = model.predict_next(&window).unwrap();
        assert_eq!(out, window[n - 1]);
    }

    #[test]
    fn predict_zero_operator_returns_zero() {
        let model = TddmdModel::new(DMatrix::zeros(1, 2), 2, 1).unwrap();
        let window = vec![DVector::from_element(1, 3.0), DVector::from_element(1, -4.0)];
        assert_eq!(model.predict_next(&window).unwrap()[0], 0.0);
    }

    #[test]
    fn predict_sinusoid_window_advances_phase() {
        let dt = 4.0 * std::f64::consts::PI / 100.0;
        let traj = gen_sinusoid(200, dt).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let data = sample_bursts(std::slice::from_ref(&traj), 2, 10, &mut rng).unwrap();
        let model = fit_tddmd(&data, DEFAULT_REL_TOL).unwrap();
        let window = vec![DVector::from_element(1, 0.0), DVector::from_element(1, dt.sin())];
        let out = model.predict_next(&window).unwrap();
        assert!((out[0] - (2.0 * dt).sin()).abs() < 1e-8);
    }

    #[test]
    fn rollout_zero_steps_returns_window() {
        let model = TddmdModel::new(DMatrix::zeros(1, 2), 2, 1).unwrap();
        let window = Trajectory::from_scalar_series(&[1.0, 2.0], 0.5, 0.0).unwrap();
        let out = model.rollout(&window, 0).unwrap();
        assert_eq!(out, window);
    }

    #[test]
    fn rollout_shift_model_holds_last_state() {
        let mut a_hat = DMatrix::zeros(1, 2);
        a_hat[(0, 1)] = 1.0;
        let model = TddmdModel::new(a_hat, 2, 1).unwrap();
        let window = Trajectory::from_scalar_series(&[1.0, 2.0], 0.5, 0.0).unwrap();
        let out = model.rollout(&window, 5).unwrap();
        assert_eq!(out.len(), 7);
        for k in 2..7 {
            assert_eq!(out.state(k)[0], 2.0);
        }
    }

    #[test]
    fn rollout_sinusoid_reaches_machine_precision() {
        let dt = 4.0 * std::f64::consts::PI / 100.0;
        let traj = gen_sinusoid(200, dt).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let data = sample_bursts(std::slice::from_ref(&traj), 2, 10, &mut rng).unwrap();
        let model = fit_tddmd(&data, DEFAULT_REL_TOL).unwrap();
        let rollout = model.rollout(&traj.head(2).unwrap(), traj.len() - 2).unwrap();
        let rmse = crate::metrics::rmse(&rollout, &traj).unwrap();
        assert!(rmse < 1e-10, "rmse = {rmse}");
    }

    #[test]
    fn fit_is_a_residual_minimum() {
        let dt = 0.25;
        let traj = gen_sinusoid(80, dt).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data = sample_bursts(&[traj], 3, 30, &mut rng).unwrap();
        let model = fit_tddmd(&data, DEFAULT_REL_TOL).unwrap();
        let base = training_residual(&model, model.a_hat(), &data);
        for trial in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + trial);
            let mut e = DMatrix::from_fn(1, 3, |_, _| rng.gen_range(-1.0..1.0));
            e *= 1e-3 / e.norm();
            let perturbed = model.a_hat() + e;
            let res = training_residual(&model, &perturbed, &data);
            assert!(res >= base - 1e-12, "perturbation improved the fit: {res} < {base}");
        }
    }

    #[test]
    fn rollout_is_linear_in_the_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a_hat = DMatrix::from_fn(1, 3, |_, _| rng.gen_range(-0.6..0.6));
        let model = TddmdModel::new(a_hat, 3, 1).unwrap();
        let wa = Trajectory::from_scalar_series(&[0.3, -0.2, 0.9], 1.0, 0.0).unwrap();
        let wb = Trajectory::from_scalar_series(&[-0.5, 0.4, 0.1], 1.0, 0.0).unwrap();
        let wsum = Trajectory::from_scalar_series(&[-0.2, 0.2, 1.0], 1.0, 0.0).unwrap();
        let (ra, rb, rs) = (
            model.rollout(&wa, 40).unwrap(),
            model.rollout(&wb, 40).unwrap(),
            model.rollout(&wsum, 40).unwrap(),
        );
        for k in 0..rs.len() {
            assert!((ra.state(k)[0] + rb.state(k)[0] - rs.state(k)[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn predict_rejects_bad_window_shapes() {
        let model = TddmdModel::new(DMatrix::zeros(1, 2), 2, 1).unwrap();
        assert!(model.predict_next(&[DVector::from_element(1, 0.0)]).is_err());
        let bad_dim = vec![DVector::from_vec(vec![0.0, 1.0]); 2];
        assert!(model.predict_next(&bad_dim).is_err());
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let a_hat = DMatrix::from_fn(2, 6, |_, _| rng.gen_range(-1.0..1.0));
        let model = TddmdModel::new(a_hat, 3, 2).unwrap();
        let norm = Normalizer::from_bounds(vec![-1.0, 0.0], vec![2.0, 0.5]).unwrap();
        save_tddmd(&path, &model, &norm, 1e-9).unwrap();
        let (m2, n2, tol) = load_tddmd(&path).unwrap();
        assert_eq!(m2, model);
        assert_eq!(n2, norm);
        assert_eq!(tol, 1e-9);
    }
}
