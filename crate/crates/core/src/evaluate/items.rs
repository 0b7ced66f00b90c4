//! Evaluation items and the three question-file formats.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ItemKind {
    /// `a : b :: c : answer`.
    Analogy { a: String, b: String, c: String, answer: String },
    /// Exemplar pair, candidate pairs and the 0-based index of the answer.
    Sat {
        exemplar: (String, String),
        choices: Vec<(String, String)>,
        answer: usize,
    },
    /// Next word after `words`; open vocabulary when `choices` is `None`.
    Sequence {
        words: Vec<String>,
        choices: Option<Vec<String>>,
        answer: String,
    },
    /// The word that belongs with `words`; open vocabulary when `choices` is `None`.
    Classification {
        words: Vec<String>,
        choices: Option<Vec<String>>,
        answer: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalItem {
    pub section: String,
    pub kind: ItemKind,
}

impl EvalItem {
    /// Every word the item mentions: query words, choices and the answer.
    pub fn words(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        match &self.kind {
            ItemKind::Analogy { a, b, c, answer } => out.extend([a, b, c, answer].map(String::as_str)),
            ItemKind::Sat { exemplar, choices, .. } => {
                out.extend([exemplar.0.as_str(), exemplar.1.as_str()]);
                for (c, d) in choices {
                    out.extend([c.as_str(), d.as_str()]);
                }
            }
            ItemKind::Sequence { words, choices, answer }
            | ItemKind::Classification { words, choices, answer } => {
                out.extend(words.iter().map(String::as_str));
                out.extend(choices.iter().flatten().map(String::as_str));
                out.push(answer);
            }
        }
        out
    }

    /// Words that define the ideal point, excluded from open-vocabulary answers.
    pub fn query_words(&self) -> Vec<&str> {
        match &self.kind {
            ItemKind::Analogy { a, b, c, .. } => vec![a, b, c],
            ItemKind::Sat { exemplar, .. } => vec![&exemplar.0, &exemplar.1],
            ItemKind::Sequence { words, .. } | ItemKind::Classification { words, .. } => {
                words.iter().map(String::as_str).collect()
            }
        }
    }

    pub fn is_open_vocabulary(&self) -> bool {
        match &self.kind {
            ItemKind::Analogy { .. } => true,
            ItemKind::Sat { .. } => false,
            ItemKind::Sequence { choices, .. } | ItemKind::Classification { choices, .. } => {
                choices.is_none()
            }
        }
    }
}

fn normalize(word: &str, lowercase: bool) -> String {
    if lowercase {
        word.to_lowercase()
    } else {
        word.to_string()
    }
}

/// Google analogy format: `: section` headers, then `A B C D` lines.
pub fn parse_google(text: &str, origin: &Path, lowercase: bool) -> Result<Vec<EvalItem>> {
    let mut section = String::from("default");
    let mut items = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix(':') {
            section = name.trim().to_string();
            continue;
        }
        let w: Vec<String> = line.split_whitespace().map(|t| normalize(t, lowercase)).collect();
        let [a, b, c, answer] = <[String; 4]>::try_from(w)
            .map_err(|_| Error::parse(origin, k + 1, "analogy lines need exactly four words"))?;
        items.push(EvalItem {
            section: section.clone(),
            kind: ItemKind::Analogy { a, b, c, answer },
        });
    }
    Ok(items)
}

fn word_pair(line: &str, origin: &Path, lineno: usize, lowercase: bool) -> Result<(String, String)> {
    let w: Vec<&str> = line.split_whitespace().collect();
    match w[..] {
        [a, b] => Ok((normalize(a, lowercase), normalize(b, lowercase))),
        _ => Err(Error::parse(origin, lineno, "expected a word pair")),
    }
}

/// SAT format: blocks of an exemplar pair, candidate pairs and `ans <1-based>`,
/// separated by blank lines.
pub fn parse_sat(text: &str, origin: &Path, lowercase: bool) -> Result<Vec<EvalItem>> {
    let mut items = Vec::new();
    let mut block: Vec<(usize, &str)> = Vec::new();
    let lines = text.lines().enumerate().chain(std::iter::once((usize::MAX, "")));
    for (k, line) in lines {
        let line = line.trim();
        if !line.is_empty() {
            block.push((k + 1, line));
            continue;
        }
        if block.is_empty() {
            continue;
        }
        let (last_no, last) = block[block.len() - 1];
        let ans = last
            .strip_prefix("ans")
            .and_then(|v| v.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::parse(origin, last_no, "block must end with \"ans <index>\""))?;
        if block.len() < 3 {
            return Err(Error::parse(origin, block[0].0, "block needs an exemplar and candidates"));
        }
        let exemplar = word_pair(block[0].1, origin, block[0].0, lowercase)?;
        let choices = block[1..block.len() - 1]
            .iter()
            .map(|&(no, l)| word_pair(l, origin, no, lowercase))
            .collect::<Result<Vec<_>>>()?;
        if ans == 0 || ans > choices.len() {
            return Err(Error::parse(origin, last_no, format!("answer {ans} outside 1..={}", choices.len())));
        }
        items.push(EvalItem {
            section: "sat".into(),
            kind: ItemKind::Sat { exemplar, choices, answer: ans - 1 },
        });
        block.clear();
    }
    Ok(items)
}

/// Tab-separated sequence/classification items:
/// `seq|cls <TAB> w1,..,wn [<TAB> choices c1|..|cm] <TAB> answer`.
/// The answer is a word, or a 1-based index into the choices.
pub fn parse_tsv(text: &str, origin: &Path, lowercase: bool) -> Result<Vec<EvalItem>> {
    let mut items = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        let (tag, words, choices, answer) = match f[..] {
            [tag, words, answer] => (tag, words, None, answer),
            [tag, words, choices, answer] => (tag, words, Some(choices), answer),
            _ => return Err(Error::parse(origin, lineno, "expected 3 or 4 tab-separated fields")),
        };
        let words: Vec<String> = words
            .split(',')
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .map(|w| normalize(w, lowercase))
            .collect();
        if words.is_empty() {
            return Err(Error::parse(origin, lineno, "no query words"));
        }
        let choices: Option<Vec<String>> = choices.map(|c| {
            let c = c.strip_prefix("choices").unwrap_or(c);
            c.split('|')
                .map(str::trim)
                .filter(|w| !w.is_empty())
                .map(|w| normalize(w, lowercase))
                .collect()
        });
        if choices.as_ref().is_some_and(Vec::is_empty) {
            return Err(Error::parse(origin, lineno, "empty choice list"));
        }
        let answer = match (&choices, answer.parse::<usize>()) {
            (Some(c), Ok(i)) if (1..=c.len()).contains(&i) && !c.iter().any(|w| w == answer) => {
                c[i - 1].clone()
            }
            _ => normalize(answer, lowercase),
        };
        if let Some(c) = &choices {
            if !c.contains(&answer) {
                return Err(Error::parse(origin, lineno, format!("answer {answer:?} is not a choice")));
            }
        }
        let kind = match tag {
            "seq" => ItemKind::Sequence { words, choices, answer },
            "cls" => ItemKind::Classification { words, choices, answer },
            other => return Err(Error::parse(origin, lineno, format!("unknown item tag {other:?}"))),
        };
        let section = if tag == "seq" { "sequence" } else { "classification" };
        items.push(EvalItem { section: section.into(), kind });
    }
    Ok(items)
}

/// Picks a parser from the file extension (`.sat`, `.tsv`, otherwise Google).
pub fn read_items(path: &Path, lowercase: bool) -> Result<Vec<EvalItem>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("sat") => parse_sat(&text, path, lowercase),
        Some("tsv") => parse_tsv(&text, path, lowercase),
        _ => parse_google(&text, path, lowercase),
    }
}
