//! Corpus-level readability before and after simplification.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linguistics::{aoa_stats, ari_sentences, fkgl_sentences, split_sentences, tokenize, Lexicons};
use crate::simplifier::SimplificationPair;

/// Original/simplified sentence pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PairCorpus {
    pub pairs: Vec<SimplificationPair>,
}

impl PairCorpus {
    pub fn new(pairs: Vec<SimplificationPair>) -> Result<Self> {
        let corpus = PairCorpus { pairs };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::Empty("pair corpus"));
        }
        for (i, p) in self.pairs.iter().enumerate() {
            if p.original.trim().is_empty() || p.simplified.trim().is_empty() {
                return Err(Error::Parse {
                    source_name: "pair corpus".into(),
                    message: format!("pair {i} has an empty side"),
                });
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let corpus: PairCorpus = serde_json::from_str(text)?;
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn originals(&self) -> Vec<String> {
        self.pairs.iter().map(|p| p.original.clone()).collect()
    }

    pub fn simplified(&self) -> Vec<String> {
        self.pairs.iter().map(|p| p.simplified.clone()).collect()
    }
}

/// Readability of one text unit. A unit may hold several sentences, as a
/// simplification often does.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitReadability {
    pub fkgl: f64,
    pub ari: f64,
    pub avg_aoa: f64,
    pub max_aoa: f64,
}

pub fn unit_readability(text: &str, lexicons: &Lexicons) -> Result<UnitReadability> {
    let sentences = split_sentences(text).len().max(1);
    let tokens = tokenize(text);
    let fallback = lexicons.aoa.mean_rating();
    let aoa = aoa_stats(&tokens, &lexicons.aoa);
    Ok(UnitReadability {
        fkgl: fkgl_sentences(&tokens, sentences)?,
        ari: ari_sentences(&tokens, sentences)?,
        avg_aoa: aoa.map_or(fallback, |s| s.average),
        max_aoa: aoa.map_or(fallback, |s| s.maximum),
    })
}

/// Unweighted means of per-unit metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusReadability {
    pub units: usize,
    pub fkgl: f64,
    pub ari: f64,
    pub avg_aoa: f64,
    pub max_aoa: f64,
}

/// Order-independent mean: values are summed in sorted order.
fn mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn corpus_readability<S: AsRef<str> + Sync>(units: &[S], lexicons: &Lexicons) -> Result<CorpusReadability> {
    if units.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    let per_unit = units
        .par_iter()
        .map(|u| unit_readability(u.as_ref(), lexicons))
        .collect::<Result<Vec<_>>>()?;
    let column = |f: fn(&UnitReadability) -> f64| mean(per_unit.iter().map(f).collect());
    Ok(CorpusReadability {
        units: units.len(),
        fkgl: column(|u| u.fkgl),
        ari: column(|u| u.ari),
        avg_aoa: column(|u| u.avg_aoa),
        max_aoa: column(|u| u.max_aoa),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub original: f64,
    pub simplified: f64,
    /// simplified minus original.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub pairs: usize,
    pub original: CorpusReadability,
    pub simplified: CorpusReadability,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn row(&self, metric: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>10} {:>10} {:>10}", "metric", "original", "simplified", "delta");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<10} {:>10.2} {:>10.2} {:>+10.2}",
                r.metric, r.original, r.simplified, r.delta
            );
        }
        let _ = writeln!(out, "pairs: {}", self.pairs);
        out
    }
}

pub fn compare_report(corpus: &PairCorpus, lexicons: &Lexicons) -> Result<ComparisonReport> {
    corpus.validate()?;
    let original = corpus_readability(&corpus.originals(), lexicons)?;
    let simplified = corpus_readability(&corpus.simplified(), lexicons)?;
    let row = |metric: &str, a: f64, b: f64| ComparisonRow {
        metric: metric.to_string(),
        original: a,
        simplified: b,
        delta: b - a,
    };
    let rows = vec![
        row("FKGL", original.fkgl, simplified.fkgl),
        row("ARI", original.ari, simplified.ari),
        row("avg_AoA", original.avg_aoa, simplified.avg_aoa),
        row("max_AoA", original.max_aoa, simplified.max_aoa),
    ];
    Ok(ComparisonReport {
        pairs: corpus.pairs.len(),
        original,
        simplified,
        rows,
    })
}
