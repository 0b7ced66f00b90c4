use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use super::vocab::Vocabulary;
use crate::error::{Error, Result};

/// How a pair at distance `t` inside the window is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Weighting {
    /// `w(t) = (1/t) / H_W`, with `H_W` the W-th harmonic number.
    Harmonic,
    /// `w(t) = 1 / W`.
    Uniform,
    /// Directed one-step transitions with weight 1; the window is ignored.
    RawTransition,
}

impl Weighting {
    pub fn is_symmetric(self) -> bool {
        !matches!(self, Weighting::RawTransition)
    }

    /// `w(1..=window)`, index 0 unused.
    pub fn weights(self, window: usize) -> Vec<f64> {
        let mut w = vec![0.0; window + 1];
        match self {
            Weighting::Harmonic => {
                let h: f64 = (1..=window).map(|s| 1.0 / s as f64).sum();
                for (t, wt) in w.iter_mut().enumerate().skip(1) {
                    *wt = (1.0 / t as f64) / h;
                }
            }
            Weighting::Uniform => {
                for wt in w.iter_mut().skip(1) {
                    *wt = 1.0 / window as f64;
                }
            }
            Weighting::RawTransition => {
                if window >= 1 {
                    w[1] = 1.0;
                }
            }
        }
        w
    }

    pub fn name(self) -> &'static str {
        match self {
            Weighting::Harmonic => "harmonic",
            Weighting::Uniform => "uniform",
            Weighting::RawTransition => "raw",
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "harmonic" => Ok(Weighting::Harmonic),
            "uniform" => Ok(Weighting::Uniform),
            "raw" | "raw-transition" => Ok(Weighting::RawTransition),
            other => Err(Error::InvalidConfig(format!("unknown weighting {other:?}"))),
        }
    }
}

/// Sparse co-occurrence counts.
///
/// Symmetric modes store each unordered pair once with `i <= j`; the value is
/// `Ĉ_ij = Ĉ_ji`. Raw-transition mode stores directed one-step counts.
/// Entries are sorted by `(i, j)` and strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceCounts {
    vocab_size: usize,
    window: usize,
    weighting: Weighting,
    total_tokens: u64,
    entries: Vec<(u32, u32, f64)>,
}

impl CooccurrenceCounts {
    /// An empty count table.
    pub fn empty(vocab_size: usize, window: usize, weighting: Weighting) -> Self {
        Self {
            vocab_size,
            window,
            weighting,
            total_tokens: 0,
            entries: Vec::new(),
        }
    }

    /// Assembles counts from explicit entries. Symmetric modes fold `(j, i)`
    /// onto `(i, j)`; duplicate keys are summed and non-positive values dropped.
    pub fn from_entries(
        vocab_size: usize,
        window: usize,
        weighting: Weighting,
        total_tokens: u64,
        entries: impl IntoIterator<Item = (u32, u32, f64)>,
    ) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidConfig("window must be at least 1".into()));
        }
        let mut map: HashMap<(u32, u32), f64> = HashMap::new();
        for (i, j, v) in entries {
            if i as usize >= vocab_size || j as usize >= vocab_size {
                return Err(Error::Format(format!(
                    "entry ({i}, {j}) out of range for vocabulary of {vocab_size}"
                )));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Format(format!("invalid count {v} at ({i}, {j})")));
            }
            let key = if weighting.is_symmetric() && i > j { (j, i) } else { (i, j) };
            *map.entry(key).or_insert(0.0) += v;
        }
        Ok(Self::from_map(vocab_size, window, weighting, total_tokens, map))
    }

    fn from_map(
        vocab_size: usize,
        window: usize,
        weighting: Weighting,
        total_tokens: u64,
        map: HashMap<(u32, u32), f64>,
    ) -> Self {
        let mut entries: Vec<(u32, u32, f64)> = map
            .into_iter()
            .filter(|&(_, v)| v > 0.0)
            .map(|((i, j), v)| (i, j, v))
            .collect();
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        Self {
            vocab_size,
            window,
            weighting,
            total_tokens,
            entries,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn is_symmetric(&self) -> bool {
        self.weighting.is_symmetric()
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stored entries in `(i, j)` order.
    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    /// `C_ij`, zero when absent.
    pub fn get(&self, i: u32, j: u32) -> f64 {
        let key = if self.is_symmetric() && i > j { (j, i) } else { (i, j) };
        self.entries
            .binary_search_by_key(&key, |&(a, b, _)| (a, b))
            .map(|k| self.entries[k].2)
            .unwrap_or(0.0)
    }

    /// Every nonzero cell of the full `n × n` matrix, mirroring symmetric storage.
    pub fn cells(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        let sym = self.is_symmetric();
        self.entries.iter().flat_map(move |&(i, j, v)| {
            let mirror = (sym && i != j).then_some((j, i, v));
            std::iter::once((i, j, v)).chain(mirror)
        })
    }

    /// Sum of all cells of the full matrix.
    pub fn total_mass(&self) -> f64 {
        self.cells().map(|(_, _, v)| v).sum()
    }

    pub fn row_sums(&self) -> DVector<f64> {
        let mut r = DVector::zeros(self.vocab_size);
        for (i, _, v) in self.cells() {
            r[i as usize] += v;
        }
        r
    }

    pub fn col_sums(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.vocab_size);
        for (_, j, v) in self.cells() {
            c[j as usize] += v;
        }
        c
    }

    /// The full dense matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.vocab_size, self.vocab_size);
        for (i, j, v) in self.cells() {
            m[(i as usize, j as usize)] = v;
        }
        m
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.vocab_size != other.vocab_size
            || self.window != other.window
            || self.weighting != other.weighting
        {
            return Err(Error::MetadataMismatch(format!(
                "(n={}, W={}, {}) vs (n={}, W={}, {})",
                self.vocab_size,
                self.window,
                self.weighting,
                other.vocab_size,
                other.window,
                other.weighting
            )));
        }
        Ok(())
    }
}

/// Entrywise sum of two count tables with identical metadata.
pub fn merge_counts(a: &CooccurrenceCounts, b: &CooccurrenceCounts) -> Result<CooccurrenceCounts> {
    a.check_compatible(b)?;
    let mut out = Vec::with_capacity(a.entries.len().max(b.entries.len()));
    let (mut p, mut q) = (0, 0);
    while p < a.entries.len() || q < b.entries.len() {
        let ka = a.entries.get(p).map(|&(i, j, _)| (i, j));
        let kb = b.entries.get(q).map(|&(i, j, _)| (i, j));
        match (ka, kb) {
            (Some(x), Some(y)) if x == y => {
                out.push((x.0, x.1, a.entries[p].2 + b.entries[q].2));
                p += 1;
                q += 1;
            }
            (Some(x), Some(y)) if x < y => {
                out.push(a.entries[p]);
                p += 1;
            }
            (Some(_), None) => {
                out.push(a.entries[p]);
                p += 1;
            }
            _ => {
                out.push(b.entries[q]);
                q += 1;
            }
        }
    }
    Ok(CooccurrenceCounts {
        vocab_size: a.vocab_size,
        window: a.window,
        weighting: a.weighting,
        total_tokens: a.total_tokens + b.total_tokens,
        entries: out,
    })
}

/// Incremental counter over sentences of token ids.
///
/// Hits are tallied as integers per pair and window offset and weighted only
/// in [`CountAccumulator::finish`], so the result does not depend on the
/// order in which sentences arrive.
#[derive(Debug, Clone)]
pub struct CountAccumulator {
    vocab_size: usize,
    window: usize,
    weighting: Weighting,
    weights: Vec<f64>,
    tokens: u64,
    slots: HashMap<(u32, u32), usize>,
    /// `offsets()` hit counters per slot, offset 1 first.
    hits: Vec<u64>,
}

impl CountAccumulator {
    pub fn new(vocab_size: usize, window: usize, weighting: Weighting) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidConfig("window must be at least 1".into()));
        }
        Ok(Self {
            vocab_size,
            window,
            weighting,
            weights: weighting.weights(window),
            tokens: 0,
            slots: HashMap::new(),
            hits: Vec::new(),
        })
    }

    fn offsets(&self) -> usize {
        if self.weighting == Weighting::RawTransition {
            1
        } else {
            self.window
        }
    }

    fn hit(&mut self, key: (u32, u32), offset: usize, times: u64) {
        let width = self.offsets();
        let next = self.slots.len();
        let slot = *self.slots.entry(key).or_insert(next);
        if slot == next {
            self.hits.resize(self.hits.len() + width, 0);
        }
        self.hits[slot * width + offset - 1] += times;
    }

    /// Adds one sentence. Windows never extend past its ends.
    pub fn add_sentence(&mut self, sentence: &[u32]) {
        debug_assert!(sentence.iter().all(|&t| (t as usize) < self.vocab_size));
        self.tokens += sentence.len() as u64;
        if self.weighting == Weighting::RawTransition {
            for pair in sentence.windows(2) {
                self.hit((pair[0], pair[1]), 1, 1);
            }
            return;
        }
        for (p, &i) in sentence.iter().enumerate() {
            let reach = self.window.min(sentence.len() - 1 - p);
            for t in 1..=reach {
                let j = sentence[p + t];
                // Ĉ_ij and Ĉ_ji both gain w(t); on the diagonal they coincide.
                if i == j {
                    self.hit((i, i), t, 2);
                } else {
                    self.hit((i.min(j), i.max(j)), t, 1);
                }
            }
        }
    }

    pub fn finish(self) -> CooccurrenceCounts {
        let width = self.offsets();
        let map = self
            .slots
            .iter()
            .map(|(&key, &slot)| {
                let row = &self.hits[slot * width..(slot + 1) * width];
                let v: f64 = row.iter().zip(&self.weights[1..]).map(|(&h, w)| h as f64 * w).sum();
                (key, v)
            })
            .collect();
        CooccurrenceCounts::from_map(self.vocab_size, self.window, self.weighting, self.tokens, map)
    }
}

/// Counts co-occurrences over sentences already mapped to ids in `0..vocab_size`.
pub fn count_ids<S: AsRef<[u32]>>(
    sentences: &[S],
    vocab_size: usize,
    window: usize,
    weighting: Weighting,
) -> Result<CooccurrenceCounts> {
    let mut acc = CountAccumulator::new(vocab_size, window, weighting)?;
    for s in sentences {
        acc.add_sentence(s.as_ref());
    }
    Ok(acc.finish())
}

/// Splits the sentences into `workers` contiguous shards, counts them on
/// separate threads and merges the shards in order.
pub fn count_ids_sharded<S: AsRef<[u32]> + Sync>(
    sentences: &[S],
    vocab_size: usize,
    window: usize,
    weighting: Weighting,
    workers: usize,
) -> Result<CooccurrenceCounts> {
    let workers = workers.max(1);
    if workers == 1 || sentences.len() < 2 {
        return count_ids(sentences, vocab_size, window, weighting);
    }
    let chunk = sentences.len().div_ceil(workers);
    let shards: Vec<Result<CooccurrenceCounts>> = std::thread::scope(|scope| {
        let handles: Vec<_> = sentences
            .chunks(chunk)
            .map(|part| scope.spawn(move || count_ids(part, vocab_size, window, weighting)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("counting thread panicked"))
            .collect()
    });
    let mut total = CooccurrenceCounts::empty(vocab_size, window, weighting);
    for shard in shards {
        total = merge_counts(&total, &shard?)?;
    }
    Ok(total)
}

/// Maps token sentences through `vocab` (dropping out-of-vocabulary tokens
/// and closing the gaps) and counts them.
pub fn count_cooccurrences<I, S, T>(
    sentences: I,
    vocab: &Vocabulary,
    window: usize,
    weighting: Weighting,
) -> Result<CooccurrenceCounts>
where
    I: IntoIterator<Item = S>,
    S: IntoIterator<Item = T>,
    T: AsRef<str>,
{
    let mut acc = CountAccumulator::new(vocab.len(), window, weighting)?;
    let mut ids = Vec::new();
    for sentence in sentences {
        ids.clear();
        ids.extend(sentence.into_iter().filter_map(|t| vocab.id(t.as_ref())));
        acc.add_sentence(&ids);
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooccur::build_vocabulary;

    fn abc_vocab() -> Vocabulary {
        build_vocabulary(["a", "b", "c"], 10, 0).unwrap()
    }

    fn sent(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn harmonic_window_two() {
        let v = abc_vocab();
        let c = count_cooccurrences([sent("a b c")], &v, 2, Weighting::Harmonic).unwrap();
        // w(1) = 1/(1.5) = 2/3, w(2) = (1/2)/1.5 = 1/3
        let (a, b, cc) = (0, 1, 2);
        assert!((c.get(a, b) - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.get(b, cc) - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.get(a, cc) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.get(b, a), c.get(a, b));
        assert_eq!(c.get(a, a), 0.0);
        assert_eq!(c.nnz(), 3);
        assert_eq!(c.total_tokens(), 3);
    }

    #[test]
    fn raw_transitions_are_directed() {
        let v = abc_vocab();
        let c = count_cooccurrences([sent("a b c")], &v, 1, Weighting::RawTransition).unwrap();
        assert_eq!(c.get(0, 1), 1.0);
        assert_eq!(c.get(1, 2), 1.0);
        assert_eq!(c.get(1, 0), 0.0);
        assert_eq!(c.get(2, 1), 0.0);
        assert_eq!(c.total_mass(), 2.0);
    }

    #[test]
    fn repeated_token_only_touches_diagonal() {
        let v = abc_vocab();
        for mode in [Weighting::Harmonic, Weighting::Uniform, Weighting::RawTransition] {
            let c = count_cooccurrences([sent("a a")], &v, 3, mode).unwrap();
            assert!(c.get(0, 0) > 0.0);
            assert_eq!(c.nnz(), 1, "{mode}");
        }
    }

    #[test]
    fn oov_tokens_close_up() {
        let v = abc_vocab();
        let c = count_cooccurrences([sent("a zz b")], &v, 1, Weighting::Uniform).unwrap();
        assert_eq!(c.get(0, 1), 1.0);
        assert_eq!(c.total_tokens(), 2);
    }

    #[test]
    fn windows_do_not_cross_sentences() {
        let v = abc_vocab();
        let c = count_cooccurrences([sent("a"), sent("b")], &v, 5, Weighting::Uniform).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn merge_identity_and_doubling() {
        let s: Vec<Vec<u32>> = vec![vec![0, 1, 2, 0], vec![2, 2, 1]];
        let x = count_ids(&s, 3, 2, Weighting::Harmonic).unwrap();
        let empty = CooccurrenceCounts::empty(3, 2, Weighting::Harmonic);
        assert_eq!(merge_counts(&x, &empty).unwrap(), x);
        let xx = merge_counts(&x, &x).unwrap();
        assert_eq!(xx.nnz(), x.nnz());
        for (&(i, j, v), &(i2, j2, v2)) in x.entries().iter().zip(xx.entries()) {
            assert_eq!((i, j), (i2, j2));
            assert_eq!(v2, 2.0 * v);
        }
        assert_eq!(xx.total_tokens(), 2 * x.total_tokens());
    }

    #[test]
    fn merge_rejects_mismatch() {
        let a = CooccurrenceCounts::empty(3, 2, Weighting::Harmonic);
        let b = CooccurrenceCounts::empty(3, 3, Weighting::Harmonic);
        let c = CooccurrenceCounts::empty(4, 2, Weighting::Harmonic);
        let d = CooccurrenceCounts::empty(3, 2, Weighting::Uniform);
        for other in [b, c, d] {
            assert!(matches!(merge_counts(&a, &other), Err(Error::MetadataMismatch(_))));
        }
    }

    #[test]
    fn zero_window_rejected() {
        assert!(CountAccumulator::new(3, 0, Weighting::Harmonic).is_err());
    }

    #[test]
    fn weights_normalized() {
        for w in 1..8 {
            for mode in [Weighting::Harmonic, Weighting::Uniform] {
                let s: f64 = mode.weights(w).iter().sum();
                assert!((s - 1.0).abs() < 1e-14);
            }
        }
    }
}
