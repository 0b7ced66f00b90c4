//! The Gaussian latent walk: a Markov chain over a fixed point cloud whose
//! transition probability decays with squared distance.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use super::points::PointCloud;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianWalkConfig {
    pub sigma: f64,
    /// Total chain length `m`.
    pub steps: usize,
    pub sentence_length: usize,
    /// Draw a fresh stationary start for every sentence instead of carrying
    /// the chain state across sentence boundaries.
    pub restart_per_sentence: bool,
}

impl GaussianWalkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be at least 1".into()));
        }
        if self.sentence_length == 0 {
            return Err(Error::InvalidConfig("sentence_length must be at least 1".into()));
        }
        Ok(())
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log Z_i = log Σ_k exp(-‖x_i - x_k‖² / σ²)`, the row normalizers of the chain.
pub fn log_normalizers(points: &PointCloud, sigma: f64) -> DVector<f64> {
    let n = points.len();
    let s2 = sigma * sigma;
    let mut row = vec![0.0; n];
    DVector::from_fn(n, |i, _| {
        for (k, r) in row.iter_mut().enumerate() {
            *r = -points.sq_dist(i, k) / s2;
        }
        log_sum_exp(&row)
    })
}

/// `P_ij = exp(-‖x_i - x_j‖²/σ²) / Z_i`, self-transitions included.
pub fn exact_transition_matrix(points: &PointCloud, sigma: f64) -> Result<DMatrix<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
    }
    let n = points.len();
    let s2 = sigma * sigma;
    let log_z = log_normalizers(points, sigma);
    if log_z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("transition normalizers".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        (-points.sq_dist(i, j) / s2 - log_z[i]).exp()
    }))
}

/// Whether the directed support graph of `p` is strongly connected.
pub(crate) fn is_irreducible(p: &DMatrix<f64>) -> bool {
    let n = p.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let w = if forward { p[(u, v)] } else { p[(v, u)] };
                if w > 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    n > 0 && reach(true) && reach(false)
}

/// Stationary distribution `πP = π` of an irreducible row-stochastic matrix.
///
/// Uses power iteration on the lazy chain `(I + P)/2`, which shares the
/// stationary distribution and is aperiodic. Stops when `‖πP - π‖₁ ≤ 1e-12`.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    if n == 0 || p.ncols() != n {
        return Err(Error::Shape(format!("{}x{} is not a square matrix", n, p.ncols())));
    }
    for i in 0..n {
        let row = p.row(i);
        if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::NotStochastic(format!("row {i} has a negative or non-finite entry")));
        }
        let s = row.sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::NotStochastic(format!("row {i} sums to {s}")));
        }
    }
    if n > 1 && !is_irreducible(p) {
        return Err(Error::Reducible);
    }
    let pt = p.transpose();
    let mut pi = DVector::from_element(n, 1.0 / n as f64);
    let max_iter = 1_000_000 / n.max(1) + 10_000;
    for _ in 0..max_iter {
        let next = &pt * &pi;
        let resid = (&next - &pi).abs().sum();
        if resid <= 1e-12 {
            let s = next.sum();
            return Ok(next / s);
        }
        pi = (next + &pi) * 0.5;
        let s = pi.sum();
        pi /= s;
    }
    Err(Error::NotConverged(format!(
        "power iteration for stationary distribution after {max_iter} iterations"
    )))
}

/// Samples the chain for `config.steps` steps and cuts it into sentences.
/// The start state (and every restart) is drawn from the exact stationary
/// distribution `π_i ∝ Z_i`.
pub fn gaussian_walk(
    points: &PointCloud,
    config: &GaussianWalkConfig,
    seed: u64,
) -> Result<Vec<Vec<u32>>> {
    config.validate()?;
    let n = points.len();
    let mut r = rng::seeded(seed);
    if n == 1 {
        return Ok(split_sentences(vec![0; config.steps], config.sentence_length));
    }
    let p = exact_transition_matrix(points, config.sigma)?;
    let rows: Vec<WeightedIndex<f64>> = (0..n)
        .map(|i| WeightedIndex::new(p.row(i).iter().copied()))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::NonFinite(format!("transition row: {e}")))?;
    let log_z = log_normalizers(points, config.sigma);
    let zmax = log_z.max();
    let start = WeightedIndex::new(log_z.iter().map(|l| (l - zmax).exp()))
        .map_err(|e| Error::NonFinite(format!("stationary weights: {e}")))?;

    let mut tokens = Vec::with_capacity(config.steps);
    let mut state = start.sample(&mut r);
    for t in 0..config.steps {
        if t > 0 {
            state = if config.restart_per_sentence && t % config.sentence_length == 0 {
                start.sample(&mut r)
            } else {
                rows[state].sample(&mut r)
            };
        }
        tokens.push(state as u32);
    }
    Ok(split_sentences(tokens, config.sentence_length))
}

fn split_sentences(tokens: Vec<u32>, len: usize) -> Vec<Vec<u32>> {
    tokens.chunks(len).map(<[u32]>::to_vec).collect()
}
