//! Text formats: corpus (one sentence per line), vocabulary (`word<TAB>count`)
//! and counts (`n W mode m` header followed by `i j value` lines).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::counts::{CooccurrenceCounts, Weighting};
use super::tokenize::Tokenizer;
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Reads a corpus, one sentence per line. Lines that tokenize to nothing are skipped.
pub fn read_corpus(path: &Path, tokenizer: &Tokenizer) -> Result<Vec<Vec<String>>> {
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let toks: Vec<String> = tokenizer.tokenize(&line).collect();
        if !toks.is_empty() {
            out.push(toks);
        }
    }
    Ok(out)
}

pub fn write_vocabulary(path: &Path, vocab: &Vocabulary) -> Result<()> {
    let mut w = create(path)?;
    for (word, count) in vocab.iter() {
        writeln!(w, "{word}\t{count}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_vocabulary(path: &Path) -> Result<Vocabulary> {
    let mut entries = Vec::new();
    for (k, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let (word, count) = line
            .rsplit_once('\t')
            .ok_or_else(|| Error::parse(path, k + 1, "expected word<TAB>count"))?;
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, k + 1, format!("bad count {count:?}")))?;
        entries.push((word.to_owned(), count));
    }
    Vocabulary::from_entries(entries)
}

/// Writes counts with 17 significant digits so values round-trip exactly.
pub fn write_counts(path: &Path, counts: &CooccurrenceCounts) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(
        w,
        "{} {} {} {}",
        counts.vocab_size(),
        counts.window(),
        counts.weighting(),
        counts.total_tokens()
    )
    .map_err(io)?;
    for &(i, j, v) in counts.entries() {
        writeln!(w, "{i} {j} {v:.16e}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_counts(path: &Path) -> Result<CooccurrenceCounts> {
    let mut lines = open(path)?.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing header"))?
        .map_err(|e| Error::io(path, e))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 {
        return Err(Error::parse(path, 1, "header must be \"n W mode m\""));
    }
    let bad = |what: &str| Error::parse(path, 1, format!("bad {what} in header"));
    let n: usize = h[0].parse().map_err(|_| bad("n"))?;
    let window: usize = h[1].parse().map_err(|_| bad("W"))?;
    let weighting: Weighting = h[2].parse().map_err(|_| bad("mode"))?;
    let m: u64 = h[3].parse().map_err(|_| bad("m"))?;

    let mut entries = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::parse(path, lineno, "expected \"i j value\""));
        }
        let i: u32 = f[0].parse().map_err(|_| Error::parse(path, lineno, "bad i"))?;
        let j: u32 = f[1].parse().map_err(|_| Error::parse(path, lineno, "bad j"))?;
        let v: f64 = f[2].parse().map_err(|_| Error::parse(path, lineno, "bad value"))?;
        if weighting.is_symmetric() && i > j {
            return Err(Error::parse(path, lineno, "symmetric counts require i <= j"));
        }
        entries.push((i, j, v));
    }
    CooccurrenceCounts::from_entries(n, window, weighting, m, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooccur::{build_vocabulary, count_ids};

    #[test]
    fn counts_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.txt");
        let s = vec![vec![0u32, 1, 2, 1], vec![2, 0, 0]];
        let c = count_ids(&s, 3, 3, Weighting::Harmonic).unwrap();
        write_counts(&p, &c).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("3 3 harmonic 7\n"));
        assert_eq!(read_counts(&p).unwrap(), c);
    }

    #[test]
    fn counts_file_rejects_lower_triangle() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.txt");
        std::fs::write(&p, "2 1 uniform 2\n1 0 1.0\n").unwrap();
        assert!(matches!(read_counts(&p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn vocabulary_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        let v = build_vocabulary("b a b c".split(' '), 10, 0).unwrap();
        write_vocabulary(&p, &v).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "b\t2\na\t1\nc\t1\n");
        assert_eq!(read_vocabulary(&p).unwrap(), v);
    }
}
