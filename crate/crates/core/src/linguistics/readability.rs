use crate::error::{Error, Result};

use super::tokenize::Token;

const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u', 'y'];

fn is_vowel(c: char) -> bool {
    VOWELS.contains(&c)
}

fn is_consonant(c: char) -> bool {
    c.is_alphabetic() && !is_vowel(c)
}

/// Vowel-group syllable estimate.
///
/// Counts maximal runs of `a e i o u y` in the lowercased word, then drops one
/// for a terminal silent "e" (an "e" after a consonant, except a "le" ending
/// after a consonant as in "table"). Never returns less than one.
pub fn count_syllables(word: &str) -> Result<usize> {
    let lower: Vec<char> = word.to_lowercase().chars().collect();
    if !lower.iter().any(|c| c.is_alphabetic()) {
        return Err(Error::NoLetters(word.to_string()));
    }
    let mut groups = 0usize;
    let mut in_group = false;
    for &c in &lower {
        let v = is_vowel(c);
        if v && !in_group {
            groups += 1;
        }
        in_group = v;
    }

    let end = lower.iter().rposition(|c| c.is_alphabetic()).map_or(0, |i| i + 1);
    let letters = &lower[..end];
    if let [.., before, 'e'] = letters {
        if is_consonant(*before) {
            let consonant_le = *before == 'l'
                && letters.len() >= 3
                && is_consonant(letters[letters.len() - 3]);
            if !consonant_le {
                groups = groups.saturating_sub(1);
            }
        }
    }
    Ok(groups.max(1))
}

/// Word, syllable and character totals over the word tokens of a text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TextCounts {
    pub words: usize,
    pub syllables: usize,
    /// Letters and digits.
    pub chars: usize,
}

pub fn text_counts(tokens: &[Token]) -> TextCounts {
    tokens
        .iter()
        .filter(|t| t.is_word)
        .fold(TextCounts::default(), |mut acc, t| {
            acc.words += 1;
            acc.syllables += count_syllables(&t.surface).unwrap_or(1);
            acc.chars += t.surface.chars().filter(|c| c.is_alphanumeric()).count();
            acc
        })
}

fn require_words(tokens: &[Token]) -> Result<TextCounts> {
    let counts = text_counts(tokens);
    if counts.words == 0 {
        let text = super::tokenize::detokenize(tokens);
        return Err(Error::NoWords(text));
    }
    Ok(counts)
}

/// Flesch-Kincaid grade level of one sentence.
pub fn fkgl(tokens: &[Token]) -> Result<f64> {
    fkgl_sentences(tokens, 1)
}

/// Flesch-Kincaid grade level of a text of `sentences` sentences.
pub fn fkgl_sentences(tokens: &[Token], sentences: usize) -> Result<f64> {
    let c = require_words(tokens)?;
    let words = c.words as f64;
    Ok(0.39 * (words / sentences.max(1) as f64) + 11.8 * (c.syllables as f64 / words) - 15.59)
}

/// Automated readability index of one sentence.
pub fn ari(tokens: &[Token]) -> Result<f64> {
    ari_sentences(tokens, 1)
}

pub fn ari_sentences(tokens: &[Token], sentences: usize) -> Result<f64> {
    let c = require_words(tokens)?;
    let words = c.words as f64;
    Ok(4.71 * (c.chars as f64 / words) + 0.5 * (words / sentences.max(1) as f64) - 21.43)
}
