use nalgebra::{DMatrix, DVector, SymmetricEigen, QR, SVD};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

/// Thin factorization `A ≈ U diag(S) Vᵀ` with singular values descending.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.s) * self.v.transpose()
    }
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::seeded(seed);
    let mut m = DMatrix::zeros(rows, cols);
    // fill column by column so the draw order is independent of storage details
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = StandardNormal.sample(&mut r);
        }
    }
    m
}

fn orthonormal(m: DMatrix<f64>) -> DMatrix<f64> {
    QR::new(m).q()
}

/// Orthonormal basis for the dominant range of `A`, `k` columns, after
/// `power_iters` rounds of subspace iteration.
fn range_finder(a: &DMatrix<f64>, k: usize, power_iters: usize, seed: u64) -> DMatrix<f64> {
    let omega = gaussian(a.ncols(), k, seed);
    let mut q = orthonormal(a * omega);
    for _ in 0..power_iters {
        let z = orthonormal(a.tr_mul(&q));
        q = orthonormal(a * z);
    }
    q
}

/// Randomized rank-`d` SVD (Gaussian sketch with `oversample` extra columns
/// and `power_iters` power iterations).
pub fn randomized_svd(
    a: &DMatrix<f64>,
    d: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> Result<Svd> {
    let (m, n) = a.shape();
    let min_dim = m.min(n);
    if d == 0 || d > min_dim {
        return Err(Error::InvalidConfig(format!("rank {d} for a {m}x{n} matrix")));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix to factorize".into()));
    }
    let k = (d + oversample).min(min_dim);
    let q = range_finder(a, k, power_iters, seed);
    let b = q.tr_mul(a);
    let svd = SVD::new(b, true, true);
    let (Some(ub), Some(vt)) = (svd.u, svd.v_t) else {
        return Err(Error::NotConverged("SVD of the projected matrix".into()));
    };
    let u = (q * ub).columns(0, d).into_owned();
    let v = vt.rows(0, d).transpose();
    let s = svd.singular_values.rows(0, d).into_owned();
    Ok(Svd { u, s, v })
}

/// Eigenpairs of a symmetric matrix sorted by eigenvalue, largest first,
/// truncated to `d`.
pub fn top_eigen(a: &DMatrix<f64>, d: usize) -> (DVector<f64>, DMatrix<f64>) {
    sorted_top(SymmetricEigen::new(a.clone()), d)
}

/// Randomized top-`d` eigenpairs of a symmetric matrix: project onto a
/// sketched range and diagonalize the small compressed matrix.
pub fn randomized_top_eigen(
    a: &DMatrix<f64>,
    d: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> (DVector<f64>, DMatrix<f64>) {
    let k = (d + oversample).min(a.nrows());
    let q = range_finder(a, k, power_iters, seed);
    let small = q.tr_mul(&(a * &q));
    let small = (&small + small.transpose()) * 0.5;
    let (vals, vecs) = sorted_top(SymmetricEigen::new(small), d);
    (vals, q * vecs)
}

fn sorted_top(eig: SymmetricEigen<f64, nalgebra::Dyn>, d: usize) -> (DVector<f64>, DMatrix<f64>) {
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    idx.truncate(d);
    let vals = DVector::from_iterator(idx.len(), idx.iter().map(|&k| eig.eigenvalues[k]));
    let vecs = eig.eigenvectors.select_columns(&idx);
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_spectrum(n: usize, s: &[f64], seed: u64) -> DMatrix<f64> {
        let u = orthonormal(gaussian(n, s.len(), seed));
        let v = orthonormal(gaussian(n, s.len(), seed + 1));
        &u * DMatrix::from_diagonal(&DVector::from_row_slice(s)) * v.transpose()
    }

    #[test]
    fn exact_rank_reconstructs() {
        let a = with_spectrum(40, &[5.0, 3.0, 1.0], 3);
        let svd = randomized_svd(&a, 3, 5, 0, 7).unwrap();
        assert!((svd.reconstruct() - &a).norm() <= 1e-9 * a.norm());
    }

    #[test]
    fn identity_full_rank() {
        let svd = randomized_svd(&DMatrix::identity(12, 12), 12, 10, 2, 0).unwrap();
        assert!(svd.s.iter().all(|s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn gap_gives_near_optimal_error() {
        let mut s: Vec<f64> = vec![10.0, 8.0, 6.0, 5.0];
        s.extend((0..60).map(|k| 0.5 * 0.9f64.powi(k)));
        let a = with_spectrum(120, &s, 11);
        let svd = randomized_svd(&a, 4, 10, 2, 1).unwrap();
        let resid = (&a - svd.reconstruct()).svd(false, false).singular_values[0];
        assert!((resid - s[4]).abs() <= 1e-6 * s[0], "{resid}");
    }

    #[test]
    fn deterministic_under_seed() {
        let a = gaussian(30, 20, 4);
        assert_eq!(randomized_svd(&a, 3, 4, 1, 9).unwrap(), randomized_svd(&a, 3, 4, 1, 9).unwrap());
    }

    #[test]
    fn rejects_rank_above_dims() {
        assert!(randomized_svd(&DMatrix::zeros(3, 5), 4, 0, 0, 0).is_err());
    }

    #[test]
    fn randomized_eigen_matches_dense() {
        let x = gaussian(80, 4, 2);
        let a = &x * x.transpose();
        let (dv, _) = top_eigen(&a, 4);
        let (rv, rvec) = randomized_top_eigen(&a, 4, 6, 1, 3);
        for k in 0..4 {
            assert!((dv[k] - rv[k]).abs() < 1e-9 * dv[0]);
        }
        let back = &rvec * DMatrix::from_diagonal(&rv) * rvec.transpose();
        assert!((back - a).norm() < 1e-9 * dv[0]);
    }
}
