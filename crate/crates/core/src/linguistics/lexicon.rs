use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tokenize::Token;

static BUNDLED_AOA: &str = include_str!("../../data/aoa_fixture.csv");
static BUNDLED_FREQUENCY: &str = include_str!("../../data/zipf_fixture.csv");

pub const AOA_FILE: &str = "aoa.csv";
pub const FREQUENCY_FILE: &str = "frequency.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LexiconKind {
    /// Age of acquisition in years.
    AgeOfAcquisition,
    ZipfFrequency,
}

/// Word ratings keyed by lowercase word.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    kind: LexiconKind,
    entries: HashMap<String, f64>,
    mean: f64,
}

impl Lexicon {
    pub fn from_pairs<K: AsRef<str>>(
        kind: LexiconKind,
        pairs: impl IntoIterator<Item = (K, f64)>,
    ) -> Result<Self> {
        let mut entries = HashMap::new();
        for (word, rating) in pairs {
            let word = word.as_ref().trim().to_lowercase();
            if !rating.is_finite() || (kind == LexiconKind::AgeOfAcquisition && rating <= 0.0) {
                return Err(Error::InvalidParam {
                    name: "rating",
                    reason: format!("bad rating {rating} for {word:?}"),
                });
            }
            entries.insert(word, rating);
        }
        if entries.is_empty() {
            return Err(Error::Empty("lexicon"));
        }
        // Sorted summation keeps the mean independent of hash order.
        let mut values: Vec<f64> = entries.values().copied().collect();
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Ok(Lexicon { kind, entries, mean })
    }

    /// Reads `word,rating` CSV with a header line.
    pub fn read_csv<R: Read>(kind: LexiconKind, reader: R, source_name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut pairs = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let (Some(word), Some(rating)) = (rec.get(0), rec.get(1)) else {
                return Err(Error::parse(format!("{source_name}:{}", line + 2), "expected word,rating"));
            };
            let rating: f64 = rating
                .parse()
                .map_err(|e| Error::parse(format!("{source_name}:{}", line + 2), e))?;
            pairs.push((word.to_string(), rating));
        }
        Self::from_pairs(kind, pairs)
    }

    pub fn load(kind: LexiconKind, path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(kind, file, &path.display().to_string())
    }

    pub fn kind(&self) -> LexiconKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, normalized: &str) -> bool {
        self.entries.contains_key(normalized)
    }

    /// All (word, rating) entries, in unspecified order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.entries.iter().map(|(w, &r)| (w.as_str(), r))
    }

    pub fn get(&self, normalized: &str) -> Option<f64> {
        self.entries.get(normalized).copied()
    }

    /// Mean rating over all entries; the fallback for uncovered sentences.
    pub fn mean_rating(&self) -> f64 {
        self.mean
    }

    fn ratings<'a>(&'a self, tokens: &'a [Token]) -> impl Iterator<Item = f64> + 'a {
        tokens
            .iter()
            .filter(|t| t.is_word)
            .filter_map(|t| self.get(&t.normalized))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LexiconStats {
    pub average: f64,
    pub maximum: f64,
    pub covered: usize,
}

/// Mean and maximum rating over covered word tokens; `None` when no token is
/// in the lexicon.
pub fn lexicon_stats(tokens: &[Token], lex: &Lexicon) -> Option<LexiconStats> {
    let (sum, max, covered) = lex
        .ratings(tokens)
        .fold((0.0, f64::NEG_INFINITY, 0usize), |(s, m, n), r| (s + r, m.max(r), n + 1));
    (covered > 0).then(|| LexiconStats {
        average: sum / covered as f64,
        maximum: max,
        covered,
    })
}

pub fn aoa_stats(tokens: &[Token], lex: &Lexicon) -> Option<LexiconStats> {
    debug_assert_eq!(lex.kind(), LexiconKind::AgeOfAcquisition);
    lexicon_stats(tokens, lex)
}

pub fn zipf_avg(tokens: &[Token], lex: &Lexicon) -> Option<f64> {
    lexicon_stats(tokens, lex).map(|s| s.average)
}

/// The AoA and frequency lexicons used for linguistic features.
#[derive(Debug, Clone)]
pub struct Lexicons {
    pub aoa: Lexicon,
    pub frequency: Lexicon,
}

impl Lexicons {
    /// Small fixture lexicons shipped with the crate.
    pub fn bundled() -> Self {
        Lexicons {
            aoa: Lexicon::read_csv(LexiconKind::AgeOfAcquisition, BUNDLED_AOA.as_bytes(), "bundled aoa")
                .expect("bundled AoA lexicon parses"),
            frequency: Lexicon::read_csv(
                LexiconKind::ZipfFrequency,
                BUNDLED_FREQUENCY.as_bytes(),
                "bundled frequency",
            )
            .expect("bundled frequency lexicon parses"),
        }
    }

    /// Loads `aoa.csv` and `frequency.csv` from a directory.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        Ok(Lexicons {
            aoa: Lexicon::load(LexiconKind::AgeOfAcquisition, &dir.join(AOA_FILE))?,
            frequency: Lexicon::load(LexiconKind::ZipfFrequency, &dir.join(FREQUENCY_FILE))?,
        })
    }

    pub fn from_option_dir(dir: Option<&Path>) -> Result<Self> {
        dir.map_or_else(|| Ok(Self::bundled()), Self::load_dir)
    }
}
