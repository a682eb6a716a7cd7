//! Rendered text geometry and fixation-to-word resolution.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::Fixation;

pub const DEFAULT_SNAP_RADIUS: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordBox {
    pub text: String,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub sentence_index: usize,
}

impl WordBox {
    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x && px <= self.right() && py >= self.y && py <= self.bottom()
    }

    /// Euclidean distance from a point to the closed box (0 inside).
    pub fn distance_to(&self, px: f64, py: f64) -> f64 {
        let dx = (self.x - px).max(0.0).max(px - self.right());
        let dy = (self.y - py).max(0.0).max(py - self.bottom());
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub index: usize,
    pub text: String,
    pub first_word: usize,
    pub last_word: usize,
    pub pixel_length: f64,
}

impl SentenceSpan {
    pub fn word_count(&self) -> usize {
        self.last_word - self.first_word + 1
    }

    pub fn word_range(&self) -> std::ops::RangeInclusive<usize> {
        self.first_word..=self.last_word
    }
}

/// Sentences and word boxes of one rendered text. Immutable once validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutDocument {
    pub doc_id: String,
    pub sentences: Vec<SentenceSpan>,
    pub words: Vec<WordBox>,
}

fn invalid(location: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidLayout {
        location: location.into(),
        reason: reason.into(),
    }
}

impl LayoutDocument {
    /// Builds a document from per-sentence texts and word boxes, computing
    /// sentence word ranges and pixel lengths from the geometry.
    pub fn from_words(
        doc_id: impl Into<String>,
        sentence_texts: Vec<String>,
        words: Vec<WordBox>,
    ) -> Result<Self> {
        let mut sentences = Vec::with_capacity(sentence_texts.len());
        for (index, text) in sentence_texts.into_iter().enumerate() {
            let members: Vec<usize> = words
                .iter()
                .enumerate()
                .filter(|(_, w)| w.sentence_index == index)
                .map(|(i, _)| i)
                .collect();
            let (Some(&first_word), Some(&last_word)) = (members.first(), members.last()) else {
                return Err(invalid(format!("sentences[{index}]"), "sentence has no words"));
            };
            sentences.push(SentenceSpan {
                index,
                text,
                first_word,
                last_word,
                pixel_length: line_extent_sum(&words[first_word..=last_word]),
            });
        }
        let doc = LayoutDocument {
            doc_id: doc_id.into(),
            sentences,
            words,
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sentences.is_empty() || self.words.is_empty() {
            return Err(invalid("document", "no sentences or no words"));
        }
        let mut expected_first = 0;
        for (i, s) in self.sentences.iter().enumerate() {
            let loc = |field: &str| format!("sentences[{i}].{field}");
            if s.index != i {
                return Err(invalid(loc("index"), format!("expected {i}, found {}", s.index)));
            }
            if s.first_word != expected_first {
                return Err(invalid(
                    loc("first_word"),
                    format!("word ranges must be contiguous: expected {expected_first}, found {}", s.first_word),
                ));
            }
            if s.last_word < s.first_word {
                return Err(invalid(loc("last_word"), "last_word precedes first_word"));
            }
            if s.last_word >= self.words.len() {
                return Err(invalid(loc("last_word"), "beyond word list"));
            }
            if !(s.pixel_length.is_finite() && s.pixel_length > 0.0) {
                return Err(invalid(loc("pixel_length"), "must be positive"));
            }
            expected_first = s.last_word + 1;
        }
        if expected_first != self.words.len() {
            return Err(invalid(
                "sentences",
                format!("sentences cover {expected_first} of {} words", self.words.len()),
            ));
        }
        for (i, w) in self.words.iter().enumerate() {
            let loc = |field: &str| format!("words[{i}].{field}");
            if w.text.is_empty() {
                return Err(invalid(loc("text"), "empty"));
            }
            if !(w.x.is_finite() && w.y.is_finite()) {
                return Err(invalid(loc("x"), "non-finite position"));
            }
            if !(w.w.is_finite() && w.w > 0.0) {
                return Err(invalid(loc("w"), "width must be positive"));
            }
            if !(w.h.is_finite() && w.h > 0.0) {
                return Err(invalid(loc("h"), "height must be positive"));
            }
            let owner = &self.sentences.get(w.sentence_index).ok_or_else(|| {
                invalid(loc("sentence_index"), format!("no sentence {}", w.sentence_index))
            })?;
            if !owner.word_range().contains(&i) {
                return Err(invalid(
                    loc("sentence_index"),
                    format!("word lies outside sentence {}'s range", w.sentence_index),
                ));
            }
        }
        Ok(())
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    pub fn sentence_words(&self, sentence: usize) -> &[WordBox] {
        let s = &self.sentences[sentence];
        &self.words[s.first_word..=s.last_word]
    }

    pub fn sentence_texts(&self) -> Vec<String> {
        self.sentences.iter().map(|s| s.text.clone()).collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: LayoutDocument = serde_json::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Sum over rendered lines of (rightmost right edge - leftmost left edge).
/// A new line starts whenever a box's top differs from the previous box's.
pub fn line_extent_sum(words: &[WordBox]) -> f64 {
    let mut total = 0.0;
    let mut line: Option<(f64, f64, f64)> = None; // (top, left, right)
    for w in words {
        line = match line {
            Some((top, left, right)) if top == w.y => Some((top, left.min(w.x), right.max(w.right()))),
            Some((_, left, right)) => {
                total += right - left;
                Some((w.y, w.x, w.right()))
            }
            None => Some((w.y, w.x, w.right())),
        };
    }
    if let Some((_, left, right)) = line {
        total += right - left;
    }
    total
}

/// Resolves a fixation centroid to a word: containing box first, otherwise the
/// nearest box within `snap_radius`. Ties go to the lower word index.
pub fn map_fixation_to_word(f: &Fixation, doc: &LayoutDocument, snap_radius: f64) -> Option<usize> {
    map_point_to_word(f.cx, f.cy, doc, snap_radius)
}

pub fn map_point_to_word(px: f64, py: f64, doc: &LayoutDocument, snap_radius: f64) -> Option<usize> {
    if !(px.is_finite() && py.is_finite()) {
        return None;
    }
    if let Some(i) = doc.words.iter().position(|w| w.contains(px, py)) {
        return Some(i);
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, w) in doc.words.iter().enumerate() {
        let d = w.distance_to(px, py);
        if d <= snap_radius && best.map_or(true, |(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Sentence that owns a resolved fixation's word.
pub fn sentence_of_fixation(f: &Fixation, doc: &LayoutDocument) -> Result<Option<usize>> {
    match f.word_index {
        None => Ok(None),
        Some(i) => doc
            .words
            .get(i)
            .map(|w| Some(w.sentence_index))
            .ok_or(Error::CorruptLayout {
                index: i,
                count: doc.words.len(),
            }),
    }
}

pub fn sentence_pixel_length(s: &SentenceSpan, _doc: &LayoutDocument) -> f64 {
    s.pixel_length
}

/// Resolves every fixation in place and returns them.
pub fn resolve_fixations(fixations: &[Fixation], doc: &LayoutDocument, snap_radius: f64) -> Vec<Fixation> {
    fixations
        .iter()
        .map(|f| Fixation {
            word_index: map_fixation_to_word(f, doc, snap_radius),
            ..*f
        })
        .collect()
}
