use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;

use super::items::{EvalItem, ItemKind};
use crate::error::{Error, Result};

/// Word vectors in vocabulary order (most frequent first).
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    words: Vec<String>,
    data: Vec<f64>,
    dim: usize,
    index: HashMap<String, usize>,
}

impl WordVectors {
    pub fn new(words: Vec<String>, vectors: &DMatrix<f64>) -> Result<Self> {
        if words.len() != vectors.nrows() || vectors.ncols() == 0 {
            return Err(Error::Shape(format!(
                "{} words for a {}x{} matrix",
                words.len(),
                vectors.nrows(),
                vectors.ncols()
            )));
        }
        let dim = vectors.ncols();
        let mut data = Vec::with_capacity(words.len() * dim);
        for i in 0..words.len() {
            data.extend(vectors.row(i).iter());
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate word {w:?} in embedding")));
            }
        }
        Ok(Self { words, data, dim, index })
    }

    /// Reads the word2vec text format: `n d`, then `token v1 .. vd` per line.
    pub fn read_word2vec(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(f).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing header"))?
            .map_err(|e| Error::io(path, e))?;
        let h: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, 1, "header must be \"n d\""))?;
        let [n, d] = h[..] else {
            return Err(Error::parse(path, 1, "header must be \"n d\""));
        };
        let mut words = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * d);
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut f = line.split_whitespace();
            let Some(w) = f.next() else { continue };
            let before = data.len();
            for v in f {
                data.push(v.parse::<f64>().map_err(|_| Error::parse(path, k + 2, format!("bad float {v:?}")))?);
            }
            if data.len() - before != d {
                return Err(Error::parse(path, k + 2, format!("expected {d} values")));
            }
            words.push(w.to_string());
        }
        if words.len() != n {
            return Err(Error::Format(format!("{}: header says {n} words, found {}", path.display(), words.len())));
        }
        Self::new(words, &DMatrix::from_row_slice(n, d, &data))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn vector(&self, id: usize) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    /// Copy with every nonzero vector scaled to unit length.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.dim) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Unit-normalize word vectors, then rank by cosine similarity.
    Cosine,
    /// Rank raw-vector ideal points by Euclidean distance.
    L2,
    /// Rank raw-vector ideal points by cosine; for SAT this compares the
    /// normalized pair differences.
    DiffCosine,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cosine => "cosine",
            Metric::L2 => "l2",
            Metric::DiffCosine => "diff_cosine",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "l2" => Ok(Metric::L2),
            "diff_cosine" | "diff-cosine" => Ok(Metric::DiffCosine),
            _ => Err(Error::InvalidConfig(format!("unknown metric {s:?}"))),
        }
    }
}

fn add_scaled(acc: &mut [f64], v: &[f64], w: f64) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += w * x;
    }
}

fn lookup<'a>(wv: &'a WordVectors, word: &str) -> Option<&'a [f64]> {
    wv.id(word).map(|i| wv.vector(i))
}

/// The ideal point of an item: `b - a + c` for analogies, `b - a` for SAT,
/// `w_n + (w_n - w_1)/n` for sequences and the centroid for classification.
/// `None` when a query word is out of vocabulary.
pub fn ideal_point(item: &EvalItem, wv: &WordVectors) -> Option<Vec<f64>> {
    let d = wv.dim();
    let mut out = vec![0.0; d];
    match &item.kind {
        ItemKind::Analogy { a, b, c, .. } => {
            add_scaled(&mut out, lookup(wv, b)?, 1.0);
            add_scaled(&mut out, lookup(wv, a)?, -1.0);
            add_scaled(&mut out, lookup(wv, c)?, 1.0);
        }
        ItemKind::Sat { exemplar, .. } => {
            add_scaled(&mut out, lookup(wv, &exemplar.1)?, 1.0);
            add_scaled(&mut out, lookup(wv, &exemplar.0)?, -1.0);
        }
        ItemKind::Sequence { words, .. } => {
            let n = words.len() as f64;
            let first = lookup(wv, &words[0])?;
            let last = lookup(wv, &words[words.len() - 1])?;
            add_scaled(&mut out, last, 1.0 + 1.0 / n);
            add_scaled(&mut out, first, -1.0 / n);
        }
        ItemKind::Classification { words, .. } => {
            let w = 1.0 / words.len() as f64;
            for word in words {
                add_scaled(&mut out, lookup(wv, word)?, w);
            }
        }
    }
    Some(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Candidate scores, higher is better; `None` for a zero vector under cosine.
fn score(ideal: &[f64], ideal_norm: f64, v: &[f64], metric: Metric) -> Option<f64> {
    match metric {
        Metric::L2 => Some(-crate::generators::sq_dist(ideal, v)),
        Metric::Cosine | Metric::DiffCosine => {
            let n = dot(v, v).sqrt();
            if n == 0.0 {
                return None;
            }
            Some(if ideal_norm > 0.0 { dot(ideal, v) / (ideal_norm * n) } else { 0.0 })
        }
    }
}

fn better(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

fn scored<'a>(
    ideal: &[f64],
    candidates: impl IntoIterator<Item = (usize, &'a [f64])>,
    metric: Metric,
    exclude: &[usize],
) -> Vec<(f64, usize)> {
    let ideal_norm = dot(ideal, ideal).sqrt();
    let mut skipped = 0;
    let mut out = Vec::new();
    for (id, v) in candidates {
        if exclude.contains(&id) {
            continue;
        }
        match score(ideal, ideal_norm, v, metric) {
            Some(s) => out.push((s, id)),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} zero-norm candidates under cosine ranking");
    }
    out
}

/// Candidate ids ordered best first; ties go to the smaller id.
pub fn rank_candidates<'a>(
    ideal: &[f64],
    candidates: impl IntoIterator<Item = (usize, &'a [f64])>,
    metric: Metric,
    exclude: &[usize],
) -> Vec<usize> {
    let mut s = scored(ideal, candidates, metric, exclude);
    s.sort_by(better);
    s.into_iter().map(|(_, id)| id).collect()
}

/// The best `k` ids, in order.
fn top_ids(mut s: Vec<(f64, usize)>, k: usize) -> Vec<usize> {
    if s.len() > k && k > 0 {
        s.select_nth_unstable_by(k - 1, better);
        s.truncate(k);
    }
    s.sort_by(better);
    s.into_iter().map(|(_, id)| id).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub metric: Metric,
    /// Open-vocabulary answers come from the first this many words.
    pub answer_vocab_limit: usize,
    pub top_k: Option<usize>,
    /// Drop the query words from open-vocabulary candidate sets.
    pub exclude_query_words: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            metric: Metric::Cosine,
            answer_vocab_limit: 30_000,
            top_k: None,
            exclude_query_words: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SectionReport {
    pub total: usize,
    pub covered: usize,
    pub correct: usize,
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k_correct: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub metric: Metric,
    pub k: Option<usize>,
    pub total: usize,
    pub covered: usize,
    pub correct: usize,
    /// Over covered items; `0` when nothing is covered.
    pub accuracy: f64,
    pub accuracy_defined: bool,
    pub top_k_accuracy: Option<f64>,
    pub sections: BTreeMap<String, SectionReport>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Rank of the answer (0 = best) among at most `depth` top candidates, or
/// `None` if it is not among them or the item is not covered.
fn answer_rank(item: &EvalItem, wv: &WordVectors, opts: &EvalOptions, depth: usize) -> Option<Option<usize>> {
    if item.words().iter().any(|w| wv.id(w).is_none()) {
        return None;
    }
    let ideal = ideal_point(item, wv)?;
    let id = |w: &str| wv.id(w).expect("coverage checked");
    let (scores, answer) = match &item.kind {
        ItemKind::Sat { choices, answer, .. } => {
            let diffs: Vec<Vec<f64>> = choices
                .iter()
                .map(|(c, d)| {
                    let mut v = wv.vector(id(d)).to_vec();
                    add_scaled(&mut v, wv.vector(id(c)), -1.0);
                    v
                })
                .collect();
            let cands = diffs.iter().enumerate().map(|(k, v)| (k, v.as_slice()));
            (scored(&ideal, cands, opts.metric, &[]), *answer)
        }
        ItemKind::Sequence { choices: Some(choices), answer, .. }
        | ItemKind::Classification { choices: Some(choices), answer, .. } => {
            let mut ids: Vec<usize> = choices.iter().map(|w| id(w)).collect();
            ids.sort_unstable();
            ids.dedup();
            let cands = ids.iter().map(|&i| (i, wv.vector(i)));
            (scored(&ideal, cands, opts.metric, &[]), id(answer))
        }
        ItemKind::Analogy { answer, .. }
        | ItemKind::Sequence { answer, .. }
        | ItemKind::Classification { answer, .. } => {
            let exclude: Vec<usize> = if opts.exclude_query_words {
                item.query_words().iter().map(|w| id(w)).collect()
            } else {
                Vec::new()
            };
            let limit = opts.answer_vocab_limit.min(wv.len());
            let cands = (0..limit).map(|i| (i, wv.vector(i)));
            (scored(&ideal, cands, opts.metric, &exclude), id(answer))
        }
    };
    Some(top_ids(scores, depth).iter().position(|&c| c == answer))
}

pub fn evaluate_task(items: &[EvalItem], embedding: &WordVectors, opts: &EvalOptions) -> EvalReport {
    let normalized;
    let wv = if opts.metric == Metric::Cosine {
        normalized = embedding.normalized();
        &normalized
    } else {
        embedding
    };
    let depth = opts.top_k.unwrap_or(1).max(1);
    let mut sections: BTreeMap<String, SectionReport> = BTreeMap::new();
    let (mut covered, mut correct, mut top_correct) = (0, 0, 0);
    for item in items {
        let sec = sections.entry(item.section.clone()).or_default();
        sec.total += 1;
        let Some(rank) = answer_rank(item, wv, opts, depth) else { continue };
        covered += 1;
        sec.covered += 1;
        if rank == Some(0) {
            correct += 1;
            sec.correct += 1;
        }
        if opts.top_k.is_some() {
            let hit = usize::from(rank.is_some());
            top_correct += hit;
            *sec.top_k_correct.get_or_insert(0) += hit;
        }
    }
    for sec in sections.values_mut() {
        sec.accuracy = ratio(sec.correct, sec.covered);
        if opts.top_k.is_some() && sec.top_k_correct.is_none() {
            sec.top_k_correct = Some(0);
        }
    }
    EvalReport {
        metric: opts.metric,
        k: opts.top_k,
        total: items.len(),
        covered,
        correct,
        accuracy: ratio(correct, covered),
        accuracy_defined: covered > 0,
        top_k_accuracy: opts.top_k.map(|_| ratio(top_correct, covered)),
        sections,
    }
}
