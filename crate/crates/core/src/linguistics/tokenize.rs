use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::lexicon::Lexicon;

static STOPWORD_LIST: &str = include_str!("../../data/stopwords.txt");

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORD_LIST
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    })
}

pub fn is_stopword(normalized: &str) -> bool {
    stopwords().contains(normalized)
}

pub fn stopword_count() -> usize {
    stopwords().len()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    /// Lowercased with surrounding punctuation removed; empty for punctuation.
    pub normalized: String,
    pub is_word: bool,
    pub is_stopword: bool,
    pub is_content: bool,
    pub is_named_entity: bool,
    /// Whitespace preceded this token in the source text.
    pub space_before: bool,
}

impl Token {
    fn new(surface: &str, space_before: bool) -> Self {
        let normalized: String = surface
            .trim_matches(|c: char| !c.is_alphanumeric())
            .to_lowercase();
        let is_word = surface.chars().any(char::is_alphabetic);
        let is_stopword = is_word && is_stopword(&normalized);
        Token {
            surface: surface.to_string(),
            normalized,
            is_word,
            is_stopword,
            is_content: is_word && !is_stopword,
            is_named_entity: false,
            space_before,
        }
    }

    fn is_capitalized(&self) -> bool {
        self.surface.chars().next().is_some_and(char::is_uppercase)
    }
}

/// Whitespace tokenization with leading/trailing punctuation split off.
/// Named entities are flagged without a frequency lexicon.
pub fn tokenize(sentence: &str) -> Vec<Token> {
    tokenize_with(sentence, None)
}

/// Like [`tokenize`], consulting `frequency` for the sentence-initial
/// named-entity rule.
pub fn tokenize_with(sentence: &str, frequency: Option<&Lexicon>) -> Vec<Token> {
    let mut tokens = Vec::new();
    for chunk in sentence.split_whitespace() {
        let Some(first) = chunk.find(char::is_alphanumeric) else {
            tokens.push(Token::new(chunk, true));
            continue;
        };
        let last = chunk
            .char_indices()
            .filter(|(_, c)| c.is_alphanumeric())
            .map(|(i, c)| i + c.len_utf8())
            .last()
            .unwrap_or(chunk.len());
        let (lead, core, trail) = (&chunk[..first], &chunk[first..last], &chunk[last..]);
        if !lead.is_empty() {
            tokens.push(Token::new(lead, true));
        }
        tokens.push(Token::new(core, lead.is_empty()));
        if !trail.is_empty() {
            tokens.push(Token::new(trail, false));
        }
    }
    flag_named_entities(&mut tokens, frequency);
    tokens
}

/// Capitalization heuristic: a capitalized word is an entity unless it opens
/// the sentence; an opening capitalized word counts only when it is neither a
/// stopword nor a known frequency-lexicon word, or when it directly precedes
/// another entity word.
fn flag_named_entities(tokens: &mut [Token], frequency: Option<&Lexicon>) {
    let Some(first) = tokens.iter().position(|t| t.is_word) else {
        return;
    };
    for (i, t) in tokens.iter_mut().enumerate() {
        if !t.is_word || !t.is_capitalized() {
            continue;
        }
        t.is_named_entity = if i == first {
            !t.is_stopword && !frequency.is_some_and(|lex| lex.contains(&t.normalized))
        } else {
            true
        };
    }
    let opener = &tokens[first];
    if opener.is_capitalized() && !opener.is_named_entity {
        if tokens.get(first + 1).is_some_and(|n| n.is_word && n.is_named_entity) {
            tokens[first].is_named_entity = true;
        }
    }
}

/// Number of named entities, merging adjacent flagged words into one.
pub fn named_entity_count(tokens: &[Token]) -> usize {
    let mut count = 0;
    let mut in_entity = false;
    for t in tokens {
        let flagged = t.is_word && t.is_named_entity;
        if flagged && !in_entity {
            count += 1;
        }
        in_entity = flagged;
    }
    count
}

/// Inverse of tokenization up to whitespace normalization.
pub fn detokenize(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 && t.space_before {
            out.push(' ');
        }
        out.push_str(&t.surface);
    }
    out
}

/// Splits running text into sentences after `.`, `!` or `?` when the next
/// word starts with an uppercase letter.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chunks: Vec<&str> = text.split_whitespace().collect();
    let mut sentences = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for (i, chunk) in chunks.iter().enumerate() {
        current.push(chunk);
        let ends = chunk
            .trim_end_matches(['"', '\'', ')', ']'])
            .ends_with(['.', '!', '?']);
        let next_upper = chunks
            .get(i + 1)
            .and_then(|n| n.trim_start_matches(['"', '\'', '(', '[']).chars().next())
            .is_some_and(char::is_uppercase);
        if ends && next_upper {
            sentences.push(current.join(" "));
            current.clear();
        }
    }
    if !current.is_empty() {
        sentences.push(current.join(" "));
    }
    sentences
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    #[test]
    fn the_cat_sat() {
        let tokens = tokenize("The cat sat.");
        assert_eq!(surfaces(&tokens), ["The", "cat", "sat", "."]);
        assert_eq!(tokens.iter().filter(|t| t.is_word).count(), 3);
        assert_eq!(tokens.iter().filter(|t| t.is_stopword).count(), 1);
        assert_eq!(tokens.iter().filter(|t| t.is_content).count(), 2);
        assert!(!tokens[3].is_word);
        assert_eq!(named_entity_count(&tokens), 0);
    }

    #[test]
    fn empty_sentence() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn el_nino_is_one_entity() {
        let tokens = tokenize("El Niño is forming.");
        let flagged: Vec<_> = tokens.iter().filter(|t| t.is_named_entity).map(|t| t.surface.as_str()).collect();
        assert_eq!(flagged, ["El", "Niño"]);
        assert_eq!(named_entity_count(&tokens), 1);
    }

    #[test]
    fn opener_in_frequency_lexicon_joins_following_entity() {
        let lex = Lexicon::from_pairs(
            super::super::lexicon::LexiconKind::ZipfFrequency,
            [("el", 3.0), ("scientists", 4.0)],
        )
        .unwrap();
        let tokens = tokenize_with("El Niño is forming.", Some(&lex));
        assert!(tokens[0].is_named_entity && tokens[1].is_named_entity);
        let tokens = tokenize_with("Scientists met Maria in Paris.", Some(&lex));
        assert!(!tokens[0].is_named_entity);
        assert_eq!(named_entity_count(&tokens), 2);
        // Without the lexicon the capitalized opener is taken as a name.
        let tokens = tokenize("Scientists met Maria in Paris.");
        assert_eq!(named_entity_count(&tokens), 3);
    }

    #[test]
    fn punctuation_handling() {
        let tokens = tokenize("\"Wait,\" she said (quietly)... warmer-than-normal don't 1,400");
        assert_eq!(
            surfaces(&tokens),
            ["\"", "Wait", ",\"", "she", "said", "(", "quietly", ")...", "warmer-than-normal", "don't", "1,400"]
        );
        assert_eq!(tokens[8].normalized, "warmer-than-normal");
        assert!(tokens[9].is_stopword);
        assert!(!tokens[10].is_word);
        assert_eq!(detokenize(&tokens), "\"Wait,\" she said (quietly)... warmer-than-normal don't 1,400");
    }

    #[test]
    fn stopword_list_is_embedded() {
        assert_eq!(stopword_count(), 179);
        assert!(is_stopword("the"));
        assert!(!is_stopword("however"));
    }

    #[test]
    fn sentence_splitting() {
        assert_eq!(
            split_sentences("An El Niño is happening. It is characterized by warm water."),
            ["An El Niño is happening.", "It is characterized by warm water."]
        );
        assert_eq!(split_sentences("Mr. Smith e.g. went."), ["Mr.", "Smith e.g. went."]);
        assert_eq!(split_sentences("No end"), ["No end"]);
    }
}
