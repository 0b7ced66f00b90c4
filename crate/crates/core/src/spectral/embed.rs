use nalgebra::{DMatrix, DVector, SVD};

use super::pmi::PmiMatrix;
use super::svd::{randomized_svd, randomized_top_eigen, top_eigen};
use crate::error::{Error, Result};
use crate::optimizer::EmbeddingModel;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralOptions {
    /// Largest `n` solved with a dense decomposition.
    pub dense_limit: usize,
    pub oversample: usize,
    pub power_iters: usize,
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            dense_limit: 2000,
            oversample: 10,
            power_iters: 4,
            seed: 0,
        }
    }
}

fn is_symmetric(a: &DMatrix<f64>) -> bool {
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let n = a.nrows();
    (0..n).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= 1e-12 * scale))
}

/// Columns `v_k * sqrt(max(λ_k, 0) * factor)`, zero-padded to `d` columns.
/// Eigenvalues below the rank tolerance give zero columns.
fn scaled_columns(vals: &DVector<f64>, vecs: &DMatrix<f64>, d: usize, factor: f64) -> (DMatrix<f64>, usize) {
    let n = vecs.nrows();
    let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * top.max(f64::MIN_POSITIVE);
    let mut out = DMatrix::zeros(n, d);
    let mut rank = 0;
    for k in 0..vals.len().min(d) {
        if vals[k] > tol {
            rank += 1;
            let w = (vals[k] * factor).sqrt();
            out.set_column(k, &(vecs.column(k) * w));
        }
    }
    (out, rank)
}

fn warn_rank(what: &str, rank: usize, d: usize) {
    if rank < d {
        log::warn!("{what}: numerical rank {rank} below requested dimension {d}; padding with zeros");
    }
}

/// Symmetric factorization `2 X̂ X̂ᵀ ≈ (M + τ)₊` from the top-`d` spectrum.
pub fn svd_embed(pmi: &PmiMatrix, d: usize, tau: f64) -> Result<EmbeddingModel> {
    svd_embed_with(pmi, d, tau, &SpectralOptions::default())
}

pub fn svd_embed_with(
    pmi: &PmiMatrix,
    d: usize,
    tau: f64,
    opts: &SpectralOptions,
) -> Result<EmbeddingModel> {
    let n = pmi.len();
    if d == 0 || d > n {
        return Err(Error::InvalidConfig(format!("dimension {d} for {n} words")));
    }
    if !tau.is_finite() {
        return Err(Error::InvalidConfig("shift must be finite".into()));
    }
    let a = pmi.shifted_truncated(tau);
    let dense = n <= opts.dense_limit;
    if is_symmetric(&a) {
        let (vals, vecs) = if dense {
            top_eigen(&a, d)
        } else {
            randomized_top_eigen(&a, d, opts.oversample, opts.power_iters, opts.seed)
        };
        let (x, rank) = scaled_columns(&vals, &vecs, d, 0.5);
        warn_rank("svd_embed", rank, d);
        return EmbeddingModel::from_vectors(&x);
    }
    let (u, s, v) = if dense {
        let svd = SVD::new(a, true, true);
        let (Some(u), Some(vt)) = (svd.u, svd.v_t) else {
            return Err(Error::NotConverged("dense SVD".into()));
        };
        (
            u.columns(0, d).into_owned(),
            svd.singular_values.rows(0, d).into_owned(),
            vt.rows(0, d).transpose(),
        )
    } else {
        let svd = randomized_svd(&a, d, opts.oversample, opts.power_iters, opts.seed)?;
        (svd.u, svd.s, svd.v)
    };
    let (word, rank) = scaled_columns(&s, &u, d, 0.5);
    let (ctx, _) = scaled_columns(&s, &v, d, 0.5);
    warn_rank("svd_embed", rank, d);
    EmbeddingModel::from_parts(&word, &ctx, vec![0.0; n], vec![0.0; n], f64::INFINITY)
}

/// `V L V / 2` with `V = I - 11ᵀ/n`, after symmetrizing `L`.
pub fn double_center(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut m = (l + l.transpose()) * 0.5;
    let row_means: Vec<f64> = (0..n).map(|i| m.row(i).mean()).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = 0.5 * (m[(i, j)] - row_means[i] - row_means[j] + grand);
        }
    }
    m
}

/// Classical MDS: `X̂` with `X̂ X̂ᵀ ≈ V L V / 2`, negative eigenvalues dropped.
pub fn mds_embed(l: &DMatrix<f64>, d: usize) -> Result<EmbeddingModel> {
    mds_embed_with(l, d, &SpectralOptions::default())
}

pub fn mds_embed_with(l: &DMatrix<f64>, d: usize, opts: &SpectralOptions) -> Result<EmbeddingModel> {
    let n = l.nrows();
    if n == 0 || l.ncols() != n {
        return Err(Error::Shape(format!("{n}x{} MDS input", l.ncols())));
    }
    if d == 0 {
        return Err(Error::InvalidConfig("dimension must be at least 1".into()));
    }
    if l.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("MDS input".into()));
    }
    let m = double_center(l);
    let k = d.min(n);
    let (vals, vecs) = if n <= opts.dense_limit {
        top_eigen(&m, k)
    } else {
        randomized_top_eigen(&m, k, opts.oversample, opts.power_iters, opts.seed)
    };
    let (x, rank) = scaled_columns(&vals, &vecs, d, 1.0);
    if n > 1 {
        warn_rank("mds_embed", rank, d);
    }
    EmbeddingModel::from_vectors(&x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::procrustes_align;

    #[test]
    fn equilateral_triangle_spectrum() {
        let l = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, -1.0, -1.0, 0.0, -1.0, -1.0, -1.0, 0.0]);
        let (vals, _) = top_eigen(&double_center(&l), 3);
        assert!((vals[0] - 0.5).abs() < 1e-14 && (vals[1] - 0.5).abs() < 1e-14);
        assert!(vals[2].abs() < 1e-14);
    }

    #[test]
    fn single_point_is_zero() {
        let m = mds_embed(&DMatrix::from_element(1, 1, 4.0), 2).unwrap();
        assert!(m.output_vectors().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rank_one_svd() {
        let x = DVector::from_row_slice(&[1.0, 2.0, 0.5, 3.0]);
        let pmi = PmiMatrix::from_dense(&x * x.transpose() * 2.0).unwrap();
        let m = svd_embed(&pmi, 1, 0.0).unwrap();
        let v = m.output_vectors();
        let back = &v * v.transpose() * 2.0;
        assert!((back - &pmi.values).norm() < 1e-10);
    }

    #[test]
    fn all_negative_truncates_to_zero() {
        let pmi = PmiMatrix::from_dense(DMatrix::from_element(3, 3, -2.0)).unwrap();
        let m = svd_embed(&pmi, 2, 1.0).unwrap();
        assert!(m.output_vectors().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn planted_gram_recovered() {
        let x = DMatrix::from_fn(30, 3, |i, k| 1.0 + ((i * 7 + k * 3) % 11) as f64 / 5.0);
        let pmi = PmiMatrix::from_dense(&x * x.transpose() * 2.0).unwrap();
        let m = svd_embed(&pmi, 3, 0.0).unwrap();
        let fit = procrustes_align(&m.output_vectors(), &x, false, false).unwrap();
        assert!(fit.residual < 1e-8, "{}", fit.residual);
    }

    #[test]
    fn asymmetric_input_uses_both_sides() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 2.0, 3.0, 1.0, 0.0, 0.5, 2.0]);
        let m = svd_embed(&PmiMatrix::from_dense(a.clone()).unwrap(), 3, 0.0).unwrap();
        let back = m.word_matrix() * m.ctx_matrix().transpose() * 2.0;
        assert!((back - a).norm() < 1e-10);
    }

    #[test]
    fn randomized_path_matches_dense() {
        let x = DMatrix::from_fn(60, 2, |i, k| ((i + 1) as f64 * (k + 2) as f64).sin() + 2.0);
        let pmi = PmiMatrix::from_dense(&x * x.transpose() * 2.0).unwrap();
        let opts = SpectralOptions { dense_limit: 10, ..Default::default() };
        let m = svd_embed_with(&pmi, 2, 0.0, &opts).unwrap();
        let fit = procrustes_align(&m.output_vectors(), &x, false, false).unwrap();
        assert!(fit.residual < 1e-8);
    }
}
