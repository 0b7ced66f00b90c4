use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::Serialize;

use super::loss::{
    glove_residual, glove_weight, log_rate, nb_error, nb_loglik, pairs_from_counts,
    sample_zero_pairs, softmax_row, softmax_row_loss_grad, CountRows, Pair, SOFTMAX_CAP,
};
use super::model::EmbeddingModel;
use crate::cooccur::CooccurrenceCounts;
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_THETA: f64 = 50.0;

/// Retries allowed when an epoch raises the objective.
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    NegBinomial { theta: f64 },
    Glove { x_max: f64, exponent: f64 },
    Softmax,
}

impl Default for Loss {
    fn default() -> Self {
        Loss::NegBinomial { theta: DEFAULT_THETA }
    }
}

impl Loss {
    pub fn glove() -> Self {
        Loss::Glove { x_max: 10.0, exponent: 0.75 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Loss::NegBinomial { .. } => "neg_binomial",
            Loss::Glove { .. } => "glove",
            Loss::Softmax => "softmax",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Fixed `η₀`; `None` line-searches it.
    pub initial_step: Option<f64>,
    /// Largest step tried by the line search.
    pub line_search_start: f64,
    /// Work units (pairs, or rows for softmax) in the line-search mini-epoch.
    pub line_search_units: usize,
    /// Stored pairs with count below this are skipped w.p. `1 - C/threshold`;
    /// `0` disables skipping.
    pub skip_threshold: f64,
    /// Sampled zero pairs per stored pair (negative binomial only).
    pub zero_ratio: f64,
    pub softmax_cap: usize,
    pub seed: u64,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            initial_step: None,
            line_search_start: 10.0,
            line_search_units: 10_000,
            skip_threshold: 10.0,
            zero_ratio: 1.0,
            softmax_cap: SOFTMAX_CAP,
            seed: 0,
            loss: Loss::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if let Some(s) = self.initial_step {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("initial step must be positive, got {s}"));
            }
        }
        if !(self.line_search_start > 0.0 && self.line_search_start.is_finite()) {
            return bad("line search start must be positive".into());
        }
        if self.line_search_units == 0 {
            return bad("line search needs at least one unit".into());
        }
        if !(self.skip_threshold >= 0.0) || !(self.zero_ratio >= 0.0) {
            return bad("skip threshold and zero ratio must be non-negative".into());
        }
        match self.loss {
            Loss::NegBinomial { theta } if !(theta > 0.0 && theta.is_finite()) => {
                bad(format!("theta must be positive, got {theta}"))
            }
            Loss::Glove { x_max, exponent } if !(x_max > 0.0) || !(exponent >= 0.0) => {
                bad("glove weighting needs x_max > 0 and exponent >= 0".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub initial_step: f64,
    /// Objective before training followed by the value after each epoch.
    /// Minimized: negative log-likelihood, or the GloVe / softmax loss.
    pub objective: Vec<f64>,
    /// Final multiplier on the step schedule after objective-increase retries.
    pub step_scale: f64,
    pub pairs: usize,
    pub zero_pairs: usize,
    /// Log-rate clamps seen by the final evaluation.
    pub clamped: usize,
}

/// Training data in the unit the chosen loss iterates over.
enum Units {
    Pairs { pairs: Vec<Pair>, stored: usize },
    Rows(CountRows),
}

impl Units {
    fn len(&self) -> usize {
        match self {
            Units::Pairs { pairs, .. } => pairs.len(),
            Units::Rows(r) => r.len(),
        }
    }
}

struct Trainer {
    loss: Loss,
    units: Units,
    skip_threshold: f64,
}

impl Trainer {
    /// Minimized objective over the listed units.
    fn objective(&self, model: &EmbeddingModel, idx: &[usize]) -> f64 {
        match (&self.units, self.loss) {
            (Units::Pairs { pairs, .. }, Loss::NegBinomial { .. }) => {
                let sel: Vec<Pair> = idx.iter().map(|&u| pairs[u]).collect();
                -nb_loglik(&sel, model).value
            }
            (Units::Pairs { pairs, .. }, Loss::Glove { x_max, exponent }) => idx
                .iter()
                .map(|&u| {
                    let p = &pairs[u];
                    let r = glove_residual(model, p);
                    glove_weight(p.count, x_max, exponent) * r * r
                })
                .sum(),
            (Units::Rows(rows), _) => {
                let mut probs = vec![0.0; model.len()];
                idx.iter()
                    .map(|&i| softmax_row_loss_grad(model, i, &rows.rows[i], &mut probs, None))
                    .sum()
            }
            _ => unreachable!("units always match the loss"),
        }
    }

    fn skip(&self, u: usize, r: &mut rng::Rng) -> bool {
        let Units::Pairs { pairs, stored } = &self.units else { return false };
        let c = pairs[u].count;
        u < *stored && c < self.skip_threshold && r.random::<f64>() >= c / self.skip_threshold
    }

    /// One SGD update; returns `false` when the error signal is not finite.
    fn step(&self, model: &mut EmbeddingModel, u: usize, eta: f64, probs: &mut [f64]) -> bool {
        let d = model.dim();
        match (&self.units, self.loss) {
            (Units::Pairs { pairs, .. }, Loss::NegBinomial { theta }) => {
                let p = pairs[u];
                let (i, j) = (p.row as usize, p.col as usize);
                let (s, _) = log_rate(model, i, j);
                let g = eta * nb_error(p.count, s, theta);
                if !g.is_finite() {
                    return false;
                }
                for k in 0..d {
                    let diff = model.ctx[j * d + k] - model.word[i * d + k];
                    model.word[i * d + k] += g * diff;
                    model.ctx[j * d + k] -= g * diff;
                }
                model.row_bias[i] += g;
                model.col_bias[j] += g;
            }
            (Units::Pairs { pairs, .. }, Loss::Glove { x_max, exponent }) => {
                let p = &pairs[u];
                let (i, j) = (p.row as usize, p.col as usize);
                let g = eta * 2.0 * glove_weight(p.count, x_max, exponent) * glove_residual(model, p);
                if !g.is_finite() {
                    return false;
                }
                for k in 0..d {
                    let diff = model.word[i * d + k] - model.ctx[j * d + k];
                    model.word[i * d + k] += 2.0 * g * diff;
                    model.ctx[j * d + k] -= 2.0 * g * diff;
                }
                model.row_bias[i] -= g;
                model.col_bias[j] -= g;
            }
            (Units::Rows(rows), _) => {
                let row = &rows.rows[u];
                if row.is_empty() {
                    return true;
                }
                softmax_row(model, u, probs);
                let total: f64 = row.iter().map(|e| e.1).sum();
                for p in probs.iter_mut() {
                    *p *= total;
                }
                for &(j, c) in row {
                    probs[j as usize] -= c;
                }
                if probs.iter().any(|e| !e.is_finite()) {
                    return false;
                }
                let x: Vec<f64> = model.word(u).to_vec();
                let mut dx = vec![0.0; d];
                for (j, &e) in probs.iter().enumerate() {
                    let g = eta * e;
                    for k in 0..d {
                        let diff = x[k] - model.ctx[j * d + k];
                        dx[k] += 2.0 * g * diff;
                        model.ctx[j * d + k] -= 2.0 * g * diff;
                    }
                    model.col_bias[j] -= g;
                }
                for (w, step) in model.word[u * d..(u + 1) * d].iter_mut().zip(&dx) {
                    *w += step;
                }
            }
            _ => unreachable!("units always match the loss"),
        }
        true
    }

    /// Runs the units in `order`; on failure returns the offending position.
    fn pass(
        &self,
        model: &mut EmbeddingModel,
        order: &[usize],
        eta: f64,
        r: &mut rng::Rng,
    ) -> std::result::Result<(), usize> {
        let mut probs = match self.units {
            Units::Rows(_) => vec![0.0; model.len()],
            Units::Pairs { .. } => Vec::new(),
        };
        for (pos, &u) in order.iter().enumerate() {
            if self.skip(u, r) {
                continue;
            }
            if !self.step(model, u, eta, &mut probs) {
                return Err(pos);
            }
        }
        Ok(())
    }

    /// Objective after one mini-epoch pass at step `eta`, `+∞` on divergence.
    fn probe(&self, model: &EmbeddingModel, order: &[usize], eta: f64, seed: u64) -> f64 {
        let mut m = model.clone();
        let mut r = rng::seeded(seed);
        if self.pass(&mut m, order, eta, &mut r).is_err() {
            return f64::INFINITY;
        }
        let v = self.objective(&m, order);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }

    /// Decade scan down from `start` to bracket the best step, then
    /// golden-section refinement in `log η`.
    fn line_search(&self, model: &EmbeddingModel, order: &[usize], start: f64, seed: u64) -> Result<f64> {
        let f = |log_eta: f64| self.probe(model, order, log_eta.exp(), seed);
        let ln10 = std::f64::consts::LN_10;
        let top = start.ln();
        let mut best = (top, f(top));
        for k in 1..=16 {
            let u = top - k as f64 * ln10;
            let v = f(u);
            if v < best.1 {
                best = (u, v);
            } else if best.1.is_finite() {
                break;
            }
        }
        if !best.1.is_finite() {
            return Err(Error::Diverged { epoch: 0, step: 0 });
        }
        let (mut lo, mut hi) = (best.0 - ln10, (best.0 + ln10).min(top));
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut a = hi - phi * (hi - lo);
        let mut b = lo + phi * (hi - lo);
        let (mut fa, mut fb) = (f(a), f(b));
        for _ in 0..12 {
            if fa <= fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - phi * (hi - lo);
                fa = f(a);
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + phi * (hi - lo);
                fb = f(b);
            }
        }
        for cand in [(a, fa), (b, fb)] {
            if cand.1 < best.1 {
                best = cand;
            }
        }
        Ok(best.0.exp())
    }
}

/// Fits an embedding of dimension `dim` to `counts` by SGD.
pub fn fit(counts: &CooccurrenceCounts, dim: usize, config: &TrainConfig) -> Result<EmbeddingModel> {
    fit_with_report(counts, dim, config).map(|(m, _)| m)
}

pub fn fit_with_report(
    counts: &CooccurrenceCounts,
    dim: usize,
    config: &TrainConfig,
) -> Result<(EmbeddingModel, FitReport)> {
    config.validate()?;
    let n = counts.vocab_size();
    if counts.is_empty() {
        return Err(Error::InvalidConfig("cannot fit an empty count table".into()));
    }
    if matches!(config.loss, Loss::Softmax) && n > config.softmax_cap {
        return Err(Error::SoftmaxTooLarge { n, cap: config.softmax_cap });
    }
    let seed = config.seed;
    let theta = match config.loss {
        Loss::NegBinomial { theta } => theta,
        _ => DEFAULT_THETA,
    };
    let mut model = EmbeddingModel::random_init(n, dim, theta, &mut rng::stream(seed, "init"))?;

    let mut pairs = pairs_from_counts(counts);
    let stored = pairs.len();
    let (units, zero_pairs) = match config.loss {
        Loss::NegBinomial { .. } => {
            let k = (config.zero_ratio * stored as f64).round() as usize;
            let zeros = sample_zero_pairs(counts, k, &mut rng::stream(seed, "zeros"));
            let z = zeros.len();
            pairs.extend(zeros);
            (Units::Pairs { pairs, stored }, z)
        }
        Loss::Glove { .. } => (Units::Pairs { pairs, stored }, 0),
        Loss::Softmax => (Units::Rows(CountRows::new(n, &pairs)), 0),
    };
    let trainer = Trainer {
        loss: config.loss,
        units,
        skip_threshold: config.skip_threshold,
    };
    let all: Vec<usize> = (0..trainer.units.len()).collect();
    let mut objective = vec![trainer.objective(&model, &all)];

    let mut order = all.clone();
    let mut shuffle_rng = rng::stream(seed, "shuffle");
    let mut skip_rng = rng::stream(seed, "skip");
    order.shuffle(&mut shuffle_rng);
    let eta0 = match config.initial_step {
        Some(s) => s,
        None => {
            let mini = &order[..config.line_search_units.min(order.len())];
            trainer.line_search(&model, mini, config.line_search_start, rng::derive_seed(seed, "line-search"))?
        }
    };
    log::info!("{} fit: {} units, initial step {eta0:.4e}", config.loss.name(), order.len());

    let mut step_scale = 1.0;
    let mut halvings = 0;
    for epoch in 0..config.epochs {
        if epoch > 0 {
            order.shuffle(&mut shuffle_rng);
        }
        let previous = objective[objective.len() - 1];
        loop {
            let eta = step_scale * eta0 * (1.0 - epoch as f64 / config.epochs as f64);
            let snapshot = model.clone();
            trainer
                .pass(&mut model, &order, eta, &mut skip_rng)
                .map_err(|step| Error::Diverged { epoch, step })?;
            let obj = trainer.objective(&model, &all);
            if !obj.is_finite() || !model.is_finite() {
                return Err(Error::Diverged { epoch, step: order.len() });
            }
            if obj <= previous || halvings >= MAX_HALVINGS {
                log::debug!("epoch {epoch}: step {eta:.4e}, objective {obj:.6e}");
                objective.push(obj);
                break;
            }
            model = snapshot;
            step_scale *= 0.5;
            halvings += 1;
            log::debug!("epoch {epoch}: objective rose to {obj:.6e}, halving the step");
        }
    }
    let clamped = match &trainer.units {
        Units::Pairs { pairs, .. } if matches!(config.loss, Loss::NegBinomial { .. }) => {
            nb_loglik(pairs, &model).clamped
        }
        _ => 0,
    };
    Ok((
        model,
        FitReport {
            initial_step: eta0,
            objective,
            step_scale,
            pairs: stored,
            zero_pairs,
            clamped,
        },
    ))
}
