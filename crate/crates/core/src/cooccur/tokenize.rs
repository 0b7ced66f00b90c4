/// Whitespace tokenizer with optional normalization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tokenizer {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub strip_numbers: bool,
}

impl Tokenizer {
    /// Splits on whitespace, applies the configured filters and drops tokens
    /// that become empty.
    pub fn tokenize<'a>(&'a self, line: &'a str) -> impl Iterator<Item = String> + 'a {
        line.split_whitespace().filter_map(move |raw| {
            let tok: String = raw
                .chars()
                .filter(|c| !(self.strip_punctuation && is_punct(*c)))
                .filter(|c| !(self.strip_numbers && c.is_numeric()))
                .collect();
            let tok = if self.lowercase { tok.to_lowercase() } else { tok };
            (!tok.is_empty()).then_some(tok)
        })
    }
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace())
}
