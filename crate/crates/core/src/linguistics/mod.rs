//! Tokenization, syllables, readability formulas and word-difficulty lexicons.

mod lexicon;
mod readability;
mod tokenize;

pub use lexicon::{
    aoa_stats, lexicon_stats, zipf_avg, Lexicon, LexiconKind, LexiconStats, Lexicons, AOA_FILE,
    FREQUENCY_FILE,
};
pub use readability::{
    ari, ari_sentences, count_syllables, fkgl, fkgl_sentences, text_counts, TextCounts,
};
pub use tokenize::{
    detokenize, is_stopword, named_entity_count, split_sentences, stopword_count, tokenize,
    tokenize_with, Token,
};
