//! Proper orthogonal decomposition of snapshot matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Trajectory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PodBasisRepr {
    nx: usize,
    r: usize,
    /// Row-major mode matrix.
    modes: Vec<f64>,
    singular_values: Vec<f64>,
    total_energy: f64,
}

/// The `r` leading left singular vectors of a snapshot matrix, with a fixed
/// sign convention (largest-magnitude entry of each mode is positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PodBasisRepr", into = "PodBasisRepr")]
pub struct PodBasis {
    modes: DMatrix<f64>,
    singular_values: Vec<f64>,
    total_energy: f64,
}

impl TryFrom<PodBasisRepr> for PodBasis {
    type Error = Error;

    fn try_from(repr: PodBasisRepr) -> Result<Self> {
        if repr.modes.len() != repr.nx * repr.r {
            return Err(Error::invalid("POD basis shape mismatch"));
        }
        Ok(PodBasis {
            modes: DMatrix::from_row_slice(repr.nx, repr.r, &repr.modes),
            singular_values: repr.singular_values,
            total_energy: repr.total_energy,
        })
    }
}

impl From<PodBasis> for PodBasisRepr {
    fn from(b: PodBasis) -> Self {
        let mut modes = Vec::with_capacity(b.modes.len());
        for i in 0..b.modes.nrows() {
            for j in 0..b.modes.ncols() {
                modes.push(b.modes[(i, j)]);
            }
        }
        PodBasisRepr {
            nx: b.modes.nrows(),
            r: b.modes.ncols(),
            modes,
            singular_values: b.singular_values,
            total_energy: b.total_energy,
        }
    }
}

impl PodBasis {
    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    pub fn r(&self) -> usize {
        self.modes.ncols()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Fraction of the snapshot energy (squared Frobenius norm) captured by
    /// the retained modes.
    pub fn energy_fraction(&self) -> f64 {
        if self.total_energy <= 0.0 {
            return 1.0;
        }
        self.singular_values.iter().map(|s| s * s).sum::<f64>() / self.total_energy
    }

    pub fn project(&self, field: &DVector<f64>) -> DVector<f64> {
        self.modes.tr_mul(field)
    }

    pub fn reconstruct(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        &self.modes * coeffs
    }

    /// Reconstructs a full field matrix from columnwise coefficients.
    pub fn reconstruct_matrix(&self, coeffs: &DMatrix<f64>) -> DMatrix<f64> {
        &self.modes * coeffs
    }
}

fn sorted_modes_direct(snapshots: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let svd = snapshots
        .clone()
        .try_svd(true, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD of snapshot matrix did not converge".into()))?;
    let u = svd.u.expect("u requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let modes = DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let sigmas = order.iter().map(|&i| svd.singular_values[i]).collect();
    Ok((modes, sigmas))
}

/// Method-of-snapshots route for very wide matrices: eigen-decompose the
/// nx-by-nx Gram matrix S S^T instead of running a full SVD.
fn sorted_modes_gram(snapshots: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let gram = snapshots * snapshots.transpose();
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let modes = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |i, j| {
        eig.eigenvectors[(i, order[j])]
    });
    let sigmas = order
        .iter()
        .map(|&i| eig.eigenvalues[i].max(0.0).sqrt())
        .collect();
    Ok((modes, sigmas))
}

fn fix_signs(modes: &mut DMatrix<f64>) {
    for j in 0..modes.ncols() {
        let mut arg = 0;
        let mut best = 0.0;
        for i in 0..modes.nrows() {
            let a = modes[(i, j)].abs();
            if a > best {
                best = a;
                arg = i;
            }
        }
        if modes[(arg, j)] < 0.0 {
            for i in 0..modes.nrows() {
                modes[(i, j)] = -modes[(i, j)];
            }
        }
    }
}

/// SVD of the raw (not mean-subtracted) snapshot matrix: returns the `r`
/// leading modes and the trajectory of projection coefficients
/// `modes^T . snapshot_k` sampled at `(t0, dt)`.
pub fn compute_pod(
    snapshots: &DMatrix<f64>,
    r: usize,
    dt: f64,
    t0: f64,
) -> Result<(PodBasis, Trajectory)> {
    let (nx, m) = snapshots.shape();
    if m < 2 {
        return Err(Error::invalid("POD needs at least 2 snapshots"));
    }
    if r == 0 || r > nx.min(m) {
        return Err(Error::invalid(format!(
            "POD rank r = {r} must lie in 1..=min(nx, m) = {}",
            nx.min(m)
        )));
    }
    let total_energy: f64 = snapshots.iter().map(|v| v * v).sum();

    // For m >> nx a full SVD is wasteful; the Gram route yields the same
    // leading modes from an nx-by-nx symmetric eigenproblem.
    let (all_modes, all_sigmas) = if m > 4 * nx {
        sorted_modes_gram(snapshots)?
    } else {
        sorted_modes_direct(snapshots)?
    };

    let mut modes = DMatrix::from_fn(nx, r, |i, j| all_modes[(i, j)]);
    fix_signs(&mut modes);
    let singular_values = all_sigmas[..r].to_vec();

    let coeffs = modes.tr_mul(snapshots); // r x m
    let states: Vec<DVector<f64>> = (0..m).map(|j| coeffs.column(j).clone_owned()).collect();
    let traj = Trajectory::new(states, dt, t0, Some("pod-coefficients".into()))?;

    Ok((
        PodBasis {
            modes,
            singular_values,
            total_energy,
        },
        traj,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(nr: usize, nc: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(nr, nc, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn rank_one_matrix_is_reconstructed_exactly() {
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let w = DVector::from_vec(vec![0.2, -0.7, 1.1, 0.0, 2.5]);
        let snaps = &u * w.transpose();
        let (basis, coeffs) = compute_pod(&snaps, 1, 1.0, 0.0).unwrap();
        for (j, state) in coeffs.states().iter().enumerate() {
            let rec = basis.reconstruct(state);
            for i in 0..4 {
                assert!((rec[i] - snaps[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn full_rank_basis_reconstructs_input() {
        let snaps = random_matrix(6, 4, 3);
        let (basis, coeffs) = compute_pod(&snaps, 4, 1.0, 0.0).unwrap();
        for (j, state) in coeffs.states().iter().enumerate() {
            let rec = basis.reconstruct(state);
            for i in 0..6 {
                assert!((rec[i] - snaps[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn gram_and_direct_routes_agree() {
        let snaps = random_matrix(8, 40, 11); // m > 4 nx triggers the Gram route
        let (direct_modes, direct_sigmas) = sorted_modes_direct(&snaps).unwrap();
        let (gram_modes, gram_sigmas) = sorted_modes_gram(&snaps).unwrap();
        for k in 0..3 {
            assert!((direct_sigmas[k] - gram_sigmas[k]).abs() < 1e-9 * direct_sigmas[0]);
            // Columns agree up to sign.
            let d = direct_modes.column(k);
            let g = gram_modes.column(k);
            let dot = d.dot(&g).abs();
            assert!((dot - 1.0).abs() < 1e-8, "mode {k} mismatch, |dot| = {dot}");
        }
    }

    #[test]
    fn sign_convention_largest_entry_positive() {
        let snaps = random_matrix(10, 50, 21);
        let (basis, _) = compute_pod(&snaps, 3, 1.0, 0.0).unwrap();
        for j in 0..3 {
            let col = basis.modes().column(j);
            let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(max >= -min, "largest-magnitude entry should be positive");
        }
    }

    #[test]
    fn singular_values_nonincreasing_and_energy_sensible() {
        let snaps = random_matrix(12, 30, 5);
        let (basis, _) = compute_pod(&snaps, 6, 1.0, 0.0).unwrap();
        for w in basis.singular_values().windows(2) {
            assert!(w[0] >= w[1]);
        }
        let f = basis.energy_fraction();
        assert!(f > 0.0 && f <= 1.0 + 1e-12);
        let (full, _) = compute_pod(&snaps, 12, 1.0, 0.0).unwrap();
        assert!((full.energy_fraction() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_oversized_rank() {
        let snaps = random_matrix(4, 3, 1);
        assert!(compute_pod(&snaps, 5, 1.0, 0.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn modes_are_orthonormal(seed in 0u64..1000, nr in 3usize..10, nc in 3usize..12) {
            let snaps = random_matrix(nr, nc, seed);
            let r = nr.min(nc).min(3);
            let (basis, _) = compute_pod(&snaps, r, 1.0, 0.0).unwrap();
            let gram = basis.modes().tr_mul(basis.modes());
            for i in 0..r {
                for j in 0..r {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((gram[(i, j)] - expect).abs() < 1e-10);
                }
            }
        }
    }
}
