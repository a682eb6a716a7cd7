//! Seeded synthetic readers: texts typeset into layouts, 60 Hz gaze streams
//! and not-understood marks. Marked sentences are read more slowly, with
//! more refixations and regressions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::{extract_features, LabeledSentence};
use crate::gaze::{GazeSample, IvtParams};
use crate::layout::{LayoutDocument, WordBox};
use crate::learner::derive_seed;
use crate::linguistics::{is_stopword, Lexicons};

/// Monospace page geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Typesetter {
    pub page_width: f64,
    pub margin: f64,
    pub char_width: f64,
    pub word_height: f64,
    pub line_height: f64,
}

impl Default for Typesetter {
    fn default() -> Self {
        Typesetter {
            page_width: 1400.0,
            margin: 50.0,
            char_width: 11.0,
            word_height: 24.0,
            line_height: 40.0,
        }
    }
}

impl Typesetter {
    /// Lays the sentences out as running text, wrapping at the right margin.
    /// The page scrolls: lines continue downward without page breaks.
    pub fn layout(&self, doc_id: &str, sentences: &[String]) -> Result<LayoutDocument> {
        let mut words = Vec::new();
        let (mut x, mut y) = (self.margin, self.margin);
        for (s, text) in sentences.iter().enumerate() {
            for token in text.split_whitespace() {
                let w = token.chars().count() as f64 * self.char_width;
                if x > self.margin && x + w > self.page_width - self.margin {
                    x = self.margin;
                    y += self.line_height;
                }
                words.push(WordBox {
                    text: token.to_string(),
                    x,
                    y,
                    w,
                    h: self.word_height,
                    sentence_index: s,
                });
                x += w + self.char_width;
            }
        }
        LayoutDocument::from_words(doc_id, sentences.to_vec(), words)
    }
}

/// How a reader's behaviour differs on a sentence they do not understand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadingEffects {
    /// Median first-pass fixation duration, ms.
    pub base_duration: f64,
    /// Duration multiplier on marked sentences.
    pub marked_duration_factor: f64,
    pub skip_prob: f64,
    pub marked_skip_prob: f64,
    pub refixation_prob: f64,
    pub marked_refixation_prob: f64,
    /// Per-word chance of jumping back within the sentence.
    pub regression_prob: f64,
    pub marked_regression_prob: f64,
    /// Log-scale spread of the per-sentence reading-effort factor.
    pub sentence_noise: f64,
}

impl Default for ReadingEffects {
    fn default() -> Self {
        ReadingEffects {
            base_duration: 210.0,
            marked_duration_factor: 1.3,
            skip_prob: 0.25,
            marked_skip_prob: 0.12,
            refixation_prob: 0.12,
            marked_refixation_prob: 0.3,
            regression_prob: 0.04,
            marked_regression_prob: 0.14,
            sentence_noise: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub sentences: usize,
    pub marked_fraction: f64,
    pub min_words: usize,
    pub max_words: usize,
    pub sample_rate_hz: f64,
    /// Standard deviation of per-sample gaze jitter, px.
    pub jitter_px: f64,
    /// Chance of a blink after any fixation.
    pub blink_prob: f64,
    pub typesetter: Typesetter,
    pub effects: ReadingEffects,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sentences: 270,
            marked_fraction: 0.28,
            min_words: 8,
            max_words: 22,
            sample_rate_hz: 60.0,
            jitter_px: 1.0,
            blink_prob: 0.02,
            typesetter: Typesetter::default(),
            effects: ReadingEffects::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticUser {
    pub user_id: String,
    pub layout: LayoutDocument,
    pub gaze: Vec<GazeSample>,
    /// `true` = marked as not understood.
    pub marks: Vec<bool>,
}

struct Vocabulary {
    easy: Vec<String>,
    hard: Vec<String>,
    function: Vec<String>,
}

impl Vocabulary {
    fn from_lexicons(lexicons: &Lexicons) -> Self {
        let mut easy = Vec::new();
        let mut hard = Vec::new();
        let mut function = Vec::new();
        let mut entries: Vec<(String, f64)> = lexicons.aoa.entries().map(|(w, r)| (w.to_string(), r)).collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for (word, aoa) in entries {
            if !word.chars().all(char::is_alphabetic) {
                continue;
            }
            if is_stopword(&word) {
                function.push(word);
            } else if aoa >= 8.0 {
                hard.push(word);
            } else {
                easy.push(word);
            }
        }
        Vocabulary { easy, hard, function }
    }

    fn sentence(&self, rng: &mut ChaCha8Rng, words: usize, hard_share: f64) -> String {
        let mut out: Vec<String> = Vec::with_capacity(words);
        for i in 0..words {
            let pool = if rng.gen_bool(0.4) {
                &self.function
            } else if rng.gen_bool(hard_share) {
                &self.hard
            } else {
                &self.easy
            };
            let mut w = pool.choose(rng).expect("non-empty pool").clone();
            if i == 0 {
                let mut c = w.chars();
                w = c.next().map_or(String::new(), |f| f.to_uppercase().chain(c).collect());
            }
            out.push(w);
        }
        let mut s = out.join(" ");
        s.push('.');
        s
    }
}

struct GazeWriter<'a> {
    rng: &'a mut ChaCha8Rng,
    samples: Vec<GazeSample>,
    tick: u64,
    period: f64,
    jitter: Normal<f64>,
}

impl GazeWriter<'_> {
    fn now(&self) -> f64 {
        self.tick as f64 * self.period
    }

    fn fixate(&mut self, x: f64, y: f64, duration: f64) {
        let n = ((duration / self.period).round() as u64).max(1);
        for _ in 0..n {
            let jx = self.jitter.sample(self.rng);
            let jy = self.jitter.sample(self.rng);
            self.samples.push(GazeSample::new(self.now(), x + jx, y + jy));
            self.tick += 1;
        }
    }

    fn blink(&mut self, duration: f64) {
        let n = ((duration / self.period).round() as u64).max(1);
        for _ in 0..n {
            self.samples.push(GazeSample::invalid(self.now()));
            self.tick += 1;
        }
    }
}

impl SyntheticUser {
    /// Runs the gaze stream through fixation detection, word mapping and
    /// feature extraction, and attaches the marks as labels.
    pub fn labeled_rows(&self, ivt: &IvtParams, snap_radius: f64, lexicons: &Lexicons) -> Result<Vec<LabeledSentence>> {
        extract_features(&self.layout, &self.gaze, ivt, snap_radius, lexicons)?
            .with_marks(&self.marks)?
            .labeled()
    }
}

/// Generates one synthetic reader from `seed`.
pub fn generate_user(user_id: &str, seed: u64, config: &SynthConfig, lexicons: &Lexicons) -> Result<SyntheticUser> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = Vocabulary::from_lexicons(lexicons);
    let n = config.sentences;
    let marked_count = (n as f64 * config.marked_fraction).round() as usize;
    let mut marks: Vec<bool> = (0..n).map(|i| i < marked_count).collect();
    marks.shuffle(&mut rng);

    let texts: Vec<String> = marks
        .iter()
        .map(|&m| {
            let words = rng.gen_range(config.min_words..=config.max_words);
            let hard_share = if m { 0.35 } else { 0.2 };
            vocab.sentence(&mut rng, words, hard_share)
        })
        .collect();
    let layout = config.typesetter.layout(&format!("{user_id}-doc"), &texts)?;

    let e = config.effects;
    let reader_speed = LogNormal::new(0.0, 0.1).expect("valid").sample(&mut rng);
    let effort_noise = LogNormal::new(0.0, e.sentence_noise).expect("valid");
    let duration_noise = LogNormal::new(0.0, 0.3).expect("valid");
    let mut gw = GazeWriter {
        rng: &mut rng,
        samples: Vec::new(),
        tick: 0,
        period: 1000.0 / config.sample_rate_hz,
        jitter: Normal::new(0.0, config.jitter_px).expect("valid"),
    };

    for (s, span) in layout.sentences.iter().enumerate() {
        let marked = marks[s];
        let effort = effort_noise.sample(gw.rng);
        let pick = |plain: f64, hard: f64| if marked { hard } else { plain };
        let median = e.base_duration * reader_speed * effort * pick(1.0, e.marked_duration_factor);
        let skip = (pick(e.skip_prob, e.marked_skip_prob) / effort).min(0.9);
        let refix = (pick(e.refixation_prob, e.marked_refixation_prob) * effort).min(0.9);
        let regress = (pick(e.regression_prob, e.marked_regression_prob) * effort).min(0.9);
        for w in span.word_range() {
            let bx = &layout.words[w];
            if w > span.first_word && gw.rng.gen_bool(skip) {
                continue;
            }
            let cy = bx.y + bx.h / 2.0;
            let d = median * duration_noise.sample(gw.rng);
            gw.fixate(bx.x + bx.w * 0.4, cy, d);
            if gw.rng.gen_bool(refix) {
                let d = median * 0.8 * duration_noise.sample(gw.rng);
                gw.fixate(bx.x + bx.w * 0.4 + 30.0f64.max(bx.w * 0.5), cy, d);
            }
            if w > span.first_word && gw.rng.gen_bool(regress) {
                let back = gw.rng.gen_range(span.first_word..w);
                let target = &layout.words[back];
                let d = median * duration_noise.sample(gw.rng);
                gw.fixate(target.x + target.w / 2.0, target.y + target.h / 2.0, d);
                let d = median * 0.7 * duration_noise.sample(gw.rng);
                gw.fixate(bx.x + bx.w * 0.6, cy, d);
            }
            if gw.rng.gen_bool(config.blink_prob) {
                let d = gw.rng.gen_range(80.0..200.0);
                gw.blink(d);
            }
        }
    }
    let gaze = gw.samples;
    Ok(SyntheticUser {
        user_id: user_id.to_string(),
        layout,
        gaze,
        marks,
    })
}

/// `count` users with seeds derived from `seed`.
pub fn generate_users(count: usize, seed: u64, config: &SynthConfig, lexicons: &Lexicons) -> Result<Vec<SyntheticUser>> {
    (0..count)
        .map(|i| generate_user(&format!("user{i:02}"), derive_seed(seed, i as u64), config, lexicons))
        .collect()
}
