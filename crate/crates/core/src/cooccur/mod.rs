//! Vocabularies and weighted, windowed co-occurrence counting.

mod counts;
mod io;
mod tokenize;
mod vocab;

pub use counts::{
    count_cooccurrences, count_ids, count_ids_sharded, merge_counts, CooccurrenceCounts,
    CountAccumulator, Weighting,
};
pub use io::{read_corpus, read_counts, read_vocabulary, write_counts, write_vocabulary};
pub use tokenize::Tokenizer;
pub use vocab::{build_vocabulary, Vocabulary};
