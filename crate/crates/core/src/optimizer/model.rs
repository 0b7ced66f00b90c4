use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Word vectors `x̂`, context vectors `ĉ`, row/column biases and dispersion θ.
///
/// Vectors are stored row-major so a single word's coordinates are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    n: usize,
    dim: usize,
    pub(crate) word: Vec<f64>,
    pub(crate) ctx: Vec<f64>,
    pub(crate) row_bias: Vec<f64>,
    pub(crate) col_bias: Vec<f64>,
    pub theta: f64,
}

/// Gradient with the same layout as [`EmbeddingModel`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub word: Vec<f64>,
    pub ctx: Vec<f64>,
    pub row_bias: Vec<f64>,
    pub col_bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros(n: usize, dim: usize) -> Self {
        Self {
            word: vec![0.0; n * dim],
            ctx: vec![0.0; n * dim],
            row_bias: vec![0.0; n],
            col_bias: vec![0.0; n],
        }
    }

    /// Concatenation `[word, ctx, row_bias, col_bias]`, matching
    /// [`EmbeddingModel::params`].
    pub fn flatten(&self) -> Vec<f64> {
        [&self.word[..], &self.ctx, &self.row_bias, &self.col_bias].concat()
    }

    pub fn max_abs(&self) -> f64 {
        self.flatten().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl EmbeddingModel {
    pub fn zeros(n: usize, dim: usize, theta: f64) -> Result<Self> {
        if dim == 0 || n == 0 {
            return Err(Error::InvalidConfig("embedding needs n >= 1 and dim >= 1".into()));
        }
        Ok(Self {
            n,
            dim,
            word: vec![0.0; n * dim],
            ctx: vec![0.0; n * dim],
            row_bias: vec![0.0; n],
            col_bias: vec![0.0; n],
            theta,
        })
    }

    /// GloVe-style initialization: every parameter i.i.d. uniform in
    /// `[-0.5/dim, 0.5/dim]`.
    pub fn random_init(n: usize, dim: usize, theta: f64, rng: &mut Rng) -> Result<Self> {
        let mut m = Self::zeros(n, dim, theta)?;
        let half = 0.5 / dim as f64;
        for v in m
            .word
            .iter_mut()
            .chain(m.ctx.iter_mut())
            .chain(m.row_bias.iter_mut())
            .chain(m.col_bias.iter_mut())
        {
            *v = rng.random_range(-half..=half);
        }
        Ok(m)
    }

    /// A vectors-only model: context vectors equal word vectors, biases zero.
    pub fn from_vectors(vectors: &DMatrix<f64>) -> Result<Self> {
        let (n, dim) = vectors.shape();
        let mut m = Self::zeros(n, dim, f64::INFINITY)?;
        for i in 0..n {
            for k in 0..dim {
                m.word[i * dim + k] = vectors[(i, k)];
            }
        }
        m.ctx = m.word.clone();
        Ok(m)
    }

    /// Builds a model from explicit parts; vectors are `n × dim` matrices.
    pub fn from_parts(
        word: &DMatrix<f64>,
        ctx: &DMatrix<f64>,
        row_bias: Vec<f64>,
        col_bias: Vec<f64>,
        theta: f64,
    ) -> Result<Self> {
        let (n, dim) = word.shape();
        if ctx.shape() != (n, dim) || row_bias.len() != n || col_bias.len() != n {
            return Err(Error::Shape("embedding parts disagree in shape".into()));
        }
        let mut m = Self::from_vectors(word)?;
        for i in 0..n {
            for k in 0..dim {
                m.ctx[i * dim + k] = ctx[(i, k)];
            }
        }
        m.row_bias = row_bias;
        m.col_bias = col_bias;
        m.theta = theta;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn word(&self, i: usize) -> &[f64] {
        &self.word[i * self.dim..(i + 1) * self.dim]
    }

    pub fn ctx(&self, j: usize) -> &[f64] {
        &self.ctx[j * self.dim..(j + 1) * self.dim]
    }

    pub fn row_bias(&self) -> &[f64] {
        &self.row_bias
    }

    pub fn col_bias(&self) -> &[f64] {
        &self.col_bias
    }

    pub fn word_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.dim, &self.word)
    }

    pub fn ctx_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.dim, &self.ctx)
    }

    /// Final output vectors `(x̂_i + ĉ_i) / 2`.
    pub fn output_vectors(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.dim, |i, k| {
            0.5 * (self.word[i * self.dim + k] + self.ctx[i * self.dim + k])
        })
    }

    /// All parameters as `[word, ctx, row_bias, col_bias]`.
    pub fn params(&self) -> Vec<f64> {
        [&self.word[..], &self.ctx, &self.row_bias, &self.col_bias].concat()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let nd = self.n * self.dim;
        assert_eq!(p.len(), 2 * nd + 2 * self.n, "parameter vector length");
        self.word.copy_from_slice(&p[..nd]);
        self.ctx.copy_from_slice(&p[nd..2 * nd]);
        self.row_bias.copy_from_slice(&p[2 * nd..2 * nd + self.n]);
        self.col_bias.copy_from_slice(&p[2 * nd + self.n..]);
    }

    pub fn is_finite(&self) -> bool {
        self.word
            .iter()
            .chain(&self.ctx)
            .chain(&self.row_bias)
            .chain(&self.col_bias)
            .all(|v| v.is_finite())
    }

    /// `‖x̂_i - ĉ_j‖²`.
    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        crate::generators::sq_dist(self.word(i), self.ctx(j))
    }
}

/// Writes vectors in the word2vec text format: `n d`, then `token v1 .. vd`.
pub fn write_word2vec(path: &Path, words: &[String], vectors: &DMatrix<f64>) -> Result<()> {
    if words.len() != vectors.nrows() {
        return Err(Error::Shape(format!(
            "{} words for {} vectors",
            words.len(),
            vectors.nrows()
        )));
    }
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "{} {}", vectors.nrows(), vectors.ncols()).map_err(io)?;
    for (i, word) in words.iter().enumerate() {
        write!(w, "{word}").map_err(io)?;
        for v in vectors.row(i).iter() {
            write!(w, " {v:.9e}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes `token a_i b_i` per line.
pub fn write_biases(path: &Path, words: &[String], model: &EmbeddingModel) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for (i, word) in words.iter().enumerate() {
        writeln!(w, "{word} {:.9e} {:.9e}", model.row_bias[i], model.col_bias[i]).map_err(io)?;
    }
    w.flush().map_err(io)
}
