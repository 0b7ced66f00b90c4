//! Per-pair objectives and their full-batch gradients.
//!
//! The negative-binomial functions report a log-likelihood and its gradient
//! (ascent direction); GloVe and softmax report a loss and its gradient
//! (descent direction).

use rand::Rng as _;
use statrs::function::gamma::ln_gamma;

use super::model::{EmbeddingModel, Gradients};
use crate::cooccur::CooccurrenceCounts;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Upper bound on the log rate before exponentiation.
pub const LOG_RATE_CAP: f64 = 30.0;

/// Default vocabulary cap for the exact softmax.
pub const SOFTMAX_CAP: usize = 5000;

/// One directed cell `(row, col)` with its count; zero-count pairs are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub row: u32,
    pub col: u32,
    pub count: f64,
}

/// All stored nonzero cells in directed form.
pub fn pairs_from_counts(counts: &CooccurrenceCounts) -> Vec<Pair> {
    counts
        .cells()
        .filter(|&(_, _, c)| c > 0.0)
        .map(|(row, col, count)| Pair { row, col, count })
        .collect()
}

/// Up to `k` distinct cells with no stored count, drawn uniformly.
/// When the matrix has at most `k` empty cells all of them are returned.
pub fn sample_zero_pairs(counts: &CooccurrenceCounts, k: usize, rng: &mut Rng) -> Vec<Pair> {
    let n = counts.vocab_size();
    let stored: std::collections::HashSet<(u32, u32)> = counts
        .cells()
        .filter(|&(_, _, c)| c > 0.0)
        .map(|(i, j, _)| (i, j))
        .collect();
    let empty = n * n - stored.len();
    let zero = |row, col| Pair { row, col, count: 0.0 };
    if empty <= k {
        let mut all = Vec::with_capacity(empty);
        for i in 0..n as u32 {
            for j in 0..n as u32 {
                if !stored.contains(&(i, j)) {
                    all.push(zero(i, j));
                }
            }
        }
        return all;
    }
    let mut picked = std::collections::HashSet::with_capacity(k);
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let i = rng.random_range(0..n as u32);
        let j = rng.random_range(0..n as u32);
        if !stored.contains(&(i, j)) && picked.insert((i, j)) {
            out.push(zero(i, j));
        }
    }
    out
}

/// Log rate `-‖x̂_i - ĉ_j‖²/2 + a_i + b_j`, capped; the flag reports a clamp.
#[inline]
pub fn log_rate(model: &EmbeddingModel, i: usize, j: usize) -> (f64, bool) {
    let s = -0.5 * model.sq_dist(i, j) + model.row_bias[i] + model.col_bias[j];
    if s > LOG_RATE_CAP {
        (LOG_RATE_CAP, true)
    } else {
        (s, false)
    }
}

/// Negative-binomial log-probability of count `c` at log rate `s`.
pub fn nb_pair_loglik(c: f64, s: f64, theta: f64) -> f64 {
    let lambda = s.exp();
    let log_sum = theta.ln() + (lambda / theta).ln_1p();
    let mut v = theta * theta.ln() - theta * log_sum;
    if c > 0.0 {
        v += c * (s - log_sum) + ln_gamma(c + theta) - ln_gamma(theta) - ln_gamma(c + 1.0);
    }
    v
}

/// `δ = (C - λ)θ / (λ + θ)`, the derivative of the log-likelihood in `log λ`.
#[inline]
pub fn nb_error(c: f64, s: f64, theta: f64) -> f64 {
    let lambda = s.exp();
    (c - lambda) * theta / (lambda + theta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbLoglik {
    pub value: f64,
    /// Pairs whose log rate hit [`LOG_RATE_CAP`].
    pub clamped: usize,
}

pub fn nb_loglik(pairs: &[Pair], model: &EmbeddingModel) -> NbLoglik {
    let mut value = 0.0;
    let mut clamped = 0;
    for p in pairs {
        let (s, hit) = log_rate(model, p.row as usize, p.col as usize);
        clamped += usize::from(hit);
        value += nb_pair_loglik(p.count, s, model.theta);
    }
    if clamped > 0 {
        log::warn!("log rate clamped at {LOG_RATE_CAP} for {clamped} pairs");
    }
    NbLoglik { value, clamped }
}

/// Gradient of [`nb_loglik`] over `pairs`.
pub fn nb_gradients(pairs: &[Pair], model: &EmbeddingModel) -> Gradients {
    let d = model.dim();
    let mut g = Gradients::zeros(model.len(), d);
    for p in pairs {
        let (i, j) = (p.row as usize, p.col as usize);
        let (s, _) = log_rate(model, i, j);
        let delta = nb_error(p.count, s, model.theta);
        let (x, c) = (model.word(i), model.ctx(j));
        for k in 0..d {
            let diff = c[k] - x[k];
            g.word[i * d + k] += diff * delta;
            g.ctx[j * d + k] -= diff * delta;
        }
        g.row_bias[i] += delta;
        g.col_bias[j] += delta;
    }
    g
}

/// `min(c, x_max)^exponent`.
pub fn glove_weight(c: f64, x_max: f64, exponent: f64) -> f64 {
    c.min(x_max).powf(exponent)
}

/// Residual `-log C - ‖x̂_i - ĉ_j‖² + a_i + b_j`.
#[inline]
pub fn glove_residual(model: &EmbeddingModel, p: &Pair) -> f64 {
    let (i, j) = (p.row as usize, p.col as usize);
    -p.count.ln() - model.sq_dist(i, j) + model.row_bias[i] + model.col_bias[j]
}

/// Weighted least-squares loss in distance form and its gradient.
pub fn glove_loss_grad(
    pairs: &[Pair],
    model: &EmbeddingModel,
    x_max: f64,
    exponent: f64,
) -> Result<(f64, Gradients)> {
    let d = model.dim();
    let mut g = Gradients::zeros(model.len(), d);
    let mut loss = 0.0;
    for p in pairs {
        if !(p.count > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "glove loss needs positive counts, got {} at ({}, {})",
                p.count, p.row, p.col
            )));
        }
        let (i, j) = (p.row as usize, p.col as usize);
        let f = glove_weight(p.count, x_max, exponent);
        let r = glove_residual(model, p);
        loss += f * r * r;
        let (x, c) = (model.word(i), model.ctx(j));
        for k in 0..d {
            let diff = x[k] - c[k];
            g.word[i * d + k] -= 4.0 * f * r * diff;
            g.ctx[j * d + k] += 4.0 * f * r * diff;
        }
        g.row_bias[i] += 2.0 * f * r;
        g.col_bias[j] += 2.0 * f * r;
    }
    Ok((loss, g))
}

/// Cells grouped by row, as consumed by the softmax objective.
#[derive(Debug, Clone, PartialEq)]
pub struct CountRows {
    pub rows: Vec<Vec<(u32, f64)>>,
}

impl CountRows {
    pub fn new(n: usize, pairs: &[Pair]) -> Self {
        let mut rows = vec![Vec::new(); n];
        for p in pairs.iter().filter(|p| p.count > 0.0) {
            rows[p.row as usize].push((p.col, p.count));
        }
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `-Σ_ij C_ij log(C_ij / R_i)`, the minimum of the softmax loss.
    pub fn entropy_bound(&self) -> f64 {
        self.rows
            .iter()
            .map(|row| {
                let r: f64 = row.iter().map(|e| e.1).sum();
                -row.iter().map(|&(_, c)| c * (c / r).ln()).sum::<f64>()
            })
            .sum()
    }
}

/// Scores `s_ij = -‖x̂_i - ĉ_j‖² + b_j` for every context `j`, replaced by
/// the conditional probabilities in place; returns the log normalizer.
pub(crate) fn softmax_row(model: &EmbeddingModel, i: usize, probs: &mut [f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for (j, p) in probs.iter_mut().enumerate() {
        *p = -model.sq_dist(i, j) + model.col_bias[j];
        max = max.max(*p);
    }
    let mut z = 0.0;
    for p in probs.iter_mut() {
        *p = (*p - max).exp();
        z += *p;
    }
    for p in probs.iter_mut() {
        *p /= z;
    }
    max + z.ln()
}

/// Loss of one row, accumulating its gradient into `g` when given.
pub(crate) fn softmax_row_loss_grad(
    model: &EmbeddingModel,
    i: usize,
    row: &[(u32, f64)],
    probs: &mut [f64],
    g: Option<&mut Gradients>,
) -> f64 {
    if row.is_empty() {
        return 0.0;
    }
    let log_z = softmax_row(model, i, probs);
    let total: f64 = row.iter().map(|e| e.1).sum();
    let mut loss = 0.0;
    for &(j, c) in row {
        let j = j as usize;
        loss -= c * (-model.sq_dist(i, j) + model.col_bias[j] - log_z);
    }
    let Some(g) = g else { return loss };
    // error e_ij = R_i p_ij - C_ij, stored back into probs
    for p in probs.iter_mut() {
        *p *= total;
    }
    for &(j, c) in row {
        probs[j as usize] -= c;
    }
    let d = model.dim();
    let x = model.word(i);
    for (j, &e) in probs.iter().enumerate() {
        let c = model.ctx(j);
        for k in 0..d {
            let diff = x[k] - c[k];
            g.word[i * d + k] -= 2.0 * e * diff;
            g.ctx[j * d + k] += 2.0 * e * diff;
        }
        g.col_bias[j] += e;
    }
    loss
}

/// Negative log-likelihood of the distance softmax
/// `p_ij ∝ exp(-‖x̂_i - ĉ_j‖² + b_j)` and its gradient.
pub fn softmax_loss_grad(
    rows: &CountRows,
    model: &EmbeddingModel,
    cap: usize,
) -> Result<(f64, Gradients)> {
    let n = model.len();
    if n > cap {
        return Err(Error::SoftmaxTooLarge { n, cap });
    }
    if rows.len() != n {
        return Err(Error::Shape(format!("{} count rows for {n} words", rows.len())));
    }
    let mut g = Gradients::zeros(n, model.dim());
    let mut probs = vec![0.0; n];
    let mut loss = 0.0;
    for (i, row) in rows.rows.iter().enumerate() {
        loss += softmax_row_loss_grad(model, i, row, &mut probs, Some(&mut g));
    }
    Ok((loss, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use nalgebra::DMatrix;

    fn small_model(seed: u64, n: usize, d: usize) -> EmbeddingModel {
        let mut r = rng::seeded(seed);
        let mut m = EmbeddingModel::random_init(n, d, 3.0, &mut r).unwrap();
        let p: Vec<f64> = m.params().iter().map(|_| r.random_range(-1.0..1.0)).collect();
        m.set_params(&p);
        m
    }

    fn random_pairs(seed: u64, n: usize, zeros: bool) -> Vec<Pair> {
        let mut r = rng::seeded(seed);
        let mut out = Vec::new();
        for i in 0..n as u32 {
            for j in 0..n as u32 {
                let c: f64 = if zeros && r.random_bool(0.3) { 0.0 } else { r.random_range(0.5..20.0) };
                out.push(Pair { row: i, col: j, count: c.round() });
            }
        }
        out
    }

    /// Central differences of `f` at every parameter, step `h`.
    fn numeric_grad(m: &EmbeddingModel, h: f64, f: impl Fn(&EmbeddingModel) -> f64) -> Vec<f64> {
        let p0 = m.params();
        let mut probe = m.clone();
        (0..p0.len())
            .map(|k| {
                let mut p = p0.clone();
                p[k] = p0[k] + h;
                probe.set_params(&p);
                let up = f(&probe);
                p[k] = p0[k] - h;
                probe.set_params(&p);
                (up - f(&probe)) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
        num / den
    }

    #[test]
    fn nb_single_pair_value() {
        let v = nb_pair_loglik(1.0, 0.0, 1.0);
        assert!((v + 2.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(nb_error(2.0, 0.0, 1.0), 0.5);
    }

    #[test]
    fn nb_zero_counts_vanish_as_rate_vanishes() {
        assert!(nb_pair_loglik(0.0, -60.0, 50.0).abs() < 1e-20);
    }

    #[test]
    fn nb_gradient_matches_finite_differences() {
        for seed in 0..3 {
            let m = small_model(seed, 4, 3);
            let pairs = random_pairs(seed + 100, 4, true);
            let g = nb_gradients(&pairs, &m).flatten();
            let num = numeric_grad(&m, 1e-5, |m| nb_loglik(&pairs, m).value);
            assert!(rel_err(&g, &num) < 1e-5, "seed {seed}: {}", rel_err(&g, &num));
        }
    }

    #[test]
    fn nb_gradient_zero_at_exact_rates() {
        let m = small_model(5, 3, 2);
        let pairs: Vec<Pair> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| Pair {
                row: i,
                col: j,
                count: log_rate(&m, i as usize, j as usize).0.exp(),
            })
            .collect();
        assert!(nb_gradients(&pairs, &m).max_abs() < 1e-12);
    }

    #[test]
    fn log_rate_is_clamped_and_counted() {
        let mut m = EmbeddingModel::zeros(1, 1, 1.0).unwrap();
        m.row_bias[0] = 40.0;
        let ll = nb_loglik(&[Pair { row: 0, col: 0, count: 3.0 }], &m);
        assert_eq!(ll.clamped, 1);
        assert!(ll.value.is_finite());
    }

    #[test]
    fn glove_weight_values() {
        assert!((glove_weight(5.0, 10.0, 0.75) - 5f64.powf(0.75)).abs() < 1e-15);
        assert!((glove_weight(50.0, 10.0, 0.75) - 10f64.powf(0.75)).abs() < 1e-15);
    }

    #[test]
    fn glove_gradient_matches_finite_differences() {
        for seed in 0..3 {
            let m = small_model(seed, 4, 3);
            let pairs = random_pairs(seed + 7, 4, false);
            let (_, g) = glove_loss_grad(&pairs, &m, 10.0, 0.75).unwrap();
            let num = numeric_grad(&m, 1e-5, |m| glove_loss_grad(&pairs, m, 10.0, 0.75).unwrap().0);
            assert!(rel_err(&g.flatten(), &num) < 1e-5);
        }
    }

    #[test]
    fn glove_zero_residual_zero_gradient() {
        let m = small_model(2, 2, 2);
        let pairs: Vec<Pair> = [(0, 1), (1, 0), (1, 1)]
            .iter()
            .map(|&(i, j)| {
                let s = -m.sq_dist(i, j) + m.row_bias[i] + m.col_bias[j];
                Pair { row: i as u32, col: j as u32, count: s.exp() }
            })
            .collect();
        let (loss, g) = glove_loss_grad(&pairs, &m, 10.0, 0.75).unwrap();
        assert!(loss < 1e-25 && g.max_abs() < 1e-12);
        let bad = [Pair { row: 0, col: 0, count: 0.0 }];
        assert!(glove_loss_grad(&bad, &m, 10.0, 0.75).is_err());
    }

    #[test]
    fn softmax_gradient_matches_finite_differences() {
        for seed in 0..3 {
            let m = small_model(seed, 5, 2);
            let rows = CountRows::new(5, &random_pairs(seed + 3, 5, true));
            let (_, g) = softmax_loss_grad(&rows, &m, SOFTMAX_CAP).unwrap();
            let num = numeric_grad(&m, 1e-5, |m| softmax_loss_grad(&rows, m, SOFTMAX_CAP).unwrap().0);
            assert!(rel_err(&g.flatten(), &num) < 1e-5);
        }
    }

    #[test]
    fn softmax_symmetric_pair_is_uniform() {
        let word = DMatrix::from_row_slice(2, 1, &[0.0, 0.0]);
        let ctx = DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]);
        let m = EmbeddingModel::from_parts(&word, &ctx, vec![0.0; 2], vec![0.0; 2], 1.0).unwrap();
        let mut probs = vec![0.0; 2];
        softmax_row(&m, 0, &mut probs);
        assert!((probs[0] - 0.5).abs() < 1e-15 && (probs[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn softmax_loss_above_entropy_bound_and_capped() {
        let m = small_model(9, 6, 2);
        let rows = CountRows::new(6, &random_pairs(1, 6, true));
        let (loss, _) = softmax_loss_grad(&rows, &m, SOFTMAX_CAP).unwrap();
        assert!(loss >= rows.entropy_bound() - 1e-9);
        assert!(matches!(
            softmax_loss_grad(&rows, &m, 5),
            Err(Error::SoftmaxTooLarge { n: 6, cap: 5 })
        ));
    }

    #[test]
    fn zero_pair_sampling() {
        let c = CooccurrenceCounts::from_entries(
            3,
            1,
            crate::cooccur::Weighting::RawTransition,
            10,
            vec![(0, 1, 2.0), (1, 2, 1.0)],
        )
        .unwrap();
        let mut r = rng::seeded(0);
        assert_eq!(sample_zero_pairs(&c, 100, &mut r).len(), 7);
        let z = sample_zero_pairs(&c, 4, &mut r);
        assert_eq!(z.len(), 4);
        assert!(z.iter().all(|p| c.get(p.row, p.col) == 0.0));
    }
}
