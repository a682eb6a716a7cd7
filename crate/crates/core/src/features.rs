//! Per-sentence feature vectors: five gaze features and eleven linguistic
//! features, in a fixed column order.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::{detect_fixations, Fixation, GazeSample, IvtParams};
use crate::layout::{
    resolve_fixations, sentence_of_fixation, sentence_pixel_length, LayoutDocument, SentenceSpan,
};
use crate::linguistics::{
    aoa_stats, ari, fkgl, named_entity_count, text_counts, tokenize_with, zipf_avg, Lexicons,
};

pub const FEATURE_COUNT: usize = 16;

/// Column names, in matrix order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8", "f9", "f10", "f11", "f12", "f13", "f14", "f15",
    "f16",
];

pub const FEATURE_DESCRIPTIONS: [&str; FEATURE_COUNT] = [
    "maximum fixation duration (ms)",
    "total fixation duration (ms)",
    "fixation count",
    "regressive fixation count",
    "fixation count per word",
    "words",
    "stopwords",
    "characters",
    "content words",
    "sentence length (px)",
    "named entities",
    "named entities per word",
    "ARI",
    "FKGL",
    "average age of acquisition",
    "average Zipf frequency",
];

/// Number of leading gaze-derived columns.
pub const GAZE_FEATURES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub f1_max_fix_dur: f64,
    pub f2_total_fix_dur: f64,
    pub f3_fix_count: f64,
    pub f4_regressive_fix_count: f64,
    pub f5_count_per_word: f64,
    pub f6_words: f64,
    pub f7_stopwords: f64,
    pub f8_chars: f64,
    pub f9_content_words: f64,
    pub f10_pixel_len: f64,
    pub f11_named_entities: f64,
    pub f12_ne_per_word: f64,
    pub f13_ari: f64,
    pub f14_fkgl: f64,
    pub f15_avg_aoa: f64,
    pub f16_avg_zipf: f64,
}

impl FeatureVector {
    pub fn from_parts(gaze: GazeFeatures, ling: LinguisticFeatures) -> Self {
        FeatureVector {
            f1_max_fix_dur: gaze.max_fix_dur,
            f2_total_fix_dur: gaze.total_fix_dur,
            f3_fix_count: gaze.fix_count as f64,
            f4_regressive_fix_count: gaze.regressive_fix_count as f64,
            f5_count_per_word: gaze.count_per_word,
            f6_words: ling.words as f64,
            f7_stopwords: ling.stopwords as f64,
            f8_chars: ling.chars as f64,
            f9_content_words: ling.content_words as f64,
            f10_pixel_len: ling.pixel_len,
            f11_named_entities: ling.named_entities as f64,
            f12_ne_per_word: ling.ne_per_word,
            f13_ari: ling.ari,
            f14_fkgl: ling.fkgl,
            f15_avg_aoa: ling.avg_aoa,
            f16_avg_zipf: ling.avg_zipf,
        }
    }

    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.f1_max_fix_dur,
            self.f2_total_fix_dur,
            self.f3_fix_count,
            self.f4_regressive_fix_count,
            self.f5_count_per_word,
            self.f6_words,
            self.f7_stopwords,
            self.f8_chars,
            self.f9_content_words,
            self.f10_pixel_len,
            self.f11_named_entities,
            self.f12_ne_per_word,
            self.f13_ari,
            self.f14_fkgl,
            self.f15_avg_aoa,
            self.f16_avg_zipf,
        ]
    }

    pub fn from_array(a: [f64; FEATURE_COUNT]) -> Self {
        FeatureVector {
            f1_max_fix_dur: a[0],
            f2_total_fix_dur: a[1],
            f3_fix_count: a[2],
            f4_regressive_fix_count: a[3],
            f5_count_per_word: a[4],
            f6_words: a[5],
            f7_stopwords: a[6],
            f8_chars: a[7],
            f9_content_words: a[8],
            f10_pixel_len: a[9],
            f11_named_entities: a[10],
            f12_ne_per_word: a[11],
            f13_ari: a[12],
            f14_fkgl: a[13],
            f15_avg_aoa: a[14],
            f16_avg_zipf: a[15],
        }
    }
}

/// A word-resolved fixation together with the word of the fixation that
/// preceded it in the whole stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttributedFixation {
    pub word_index: usize,
    pub duration: f64,
    pub previous_word: Option<usize>,
}

impl AttributedFixation {
    pub fn is_regression(&self) -> bool {
        self.previous_word.is_some_and(|p| self.word_index < p)
    }
}

/// Chains a temporal sequence of (word, duration) pairs, linking each to its
/// predecessor.
pub fn chain_fixations(seq: impl IntoIterator<Item = (usize, f64)>) -> Vec<AttributedFixation> {
    let mut previous_word = None;
    seq.into_iter()
        .map(|(word_index, duration)| {
            let f = AttributedFixation {
                word_index,
                duration,
                previous_word,
            };
            previous_word = Some(word_index);
            f
        })
        .collect()
}

/// Groups a resolved fixation stream by sentence. Unresolved fixations are
/// dropped before regressions are linked.
pub fn attribute_fixations(
    fixations: &[Fixation],
    doc: &LayoutDocument,
) -> Result<Vec<Vec<AttributedFixation>>> {
    let mut per_sentence = vec![Vec::new(); doc.sentence_count()];
    let resolved = fixations
        .iter()
        .filter_map(|f| f.word_index.map(|w| (w, f.duration)));
    for (f, a) in fixations
        .iter()
        .filter(|f| f.word_index.is_some())
        .zip(chain_fixations(resolved))
    {
        let sentence = sentence_of_fixation(f, doc)?.expect("resolved fixation");
        per_sentence[sentence].push(a);
    }
    Ok(per_sentence)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GazeFeatures {
    pub max_fix_dur: f64,
    pub total_fix_dur: f64,
    pub fix_count: usize,
    pub regressive_fix_count: usize,
    pub count_per_word: f64,
}

pub fn gaze_features(fixations: &[AttributedFixation], word_count: usize) -> Result<GazeFeatures> {
    if word_count == 0 {
        return Err(Error::InvalidParam {
            name: "word_count",
            reason: "must be at least 1".into(),
        });
    }
    let max_fix_dur = fixations.iter().map(|f| f.duration).fold(0.0, f64::max);
    let total_fix_dur = fixations.iter().map(|f| f.duration).sum();
    let fix_count = fixations.len();
    Ok(GazeFeatures {
        max_fix_dur,
        total_fix_dur,
        fix_count,
        regressive_fix_count: fixations.iter().filter(|f| f.is_regression()).count(),
        count_per_word: fix_count as f64 / word_count as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinguisticFeatures {
    pub words: usize,
    pub stopwords: usize,
    pub chars: usize,
    pub content_words: usize,
    pub pixel_len: f64,
    pub named_entities: usize,
    pub ne_per_word: f64,
    pub ari: f64,
    pub fkgl: f64,
    pub avg_aoa: f64,
    pub avg_zipf: f64,
}

pub fn linguistic_features(
    span: &SentenceSpan,
    doc: &LayoutDocument,
    lexicons: &Lexicons,
) -> Result<LinguisticFeatures> {
    let tokens = tokenize_with(&span.text, Some(&lexicons.frequency));
    let counts = text_counts(&tokens);
    let ari = ari(&tokens)?;
    let fkgl = fkgl(&tokens)?;
    let named_entities = named_entity_count(&tokens);
    Ok(LinguisticFeatures {
        words: counts.words,
        stopwords: tokens.iter().filter(|t| t.is_stopword).count(),
        chars: counts.chars,
        content_words: tokens.iter().filter(|t| t.is_content).count(),
        pixel_len: sentence_pixel_length(span, doc),
        named_entities,
        ne_per_word: named_entities as f64 / counts.words as f64,
        ari,
        fkgl,
        avg_aoa: aoa_stats(&tokens, &lexicons.aoa).map_or(lexicons.aoa.mean_rating(), |s| s.average),
        avg_zipf: zipf_avg(&tokens, &lexicons.frequency).unwrap_or(lexicons.frequency.mean_rating()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub sentence_index: usize,
    pub vector: FeatureVector,
    /// `true` = understood (not marked by the reader).
    pub label: Option<bool>,
}

/// A training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub sentence_index: usize,
    pub vector: FeatureVector,
    pub understood: bool,
}

/// S x 16 matrix, one row per sentence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureRow>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn values(&self) -> Vec<[f64; FEATURE_COUNT]> {
        self.rows.iter().map(|r| r.vector.to_array()).collect()
    }

    /// Attaches labels from reader marks (`true` = marked as not understood).
    pub fn with_marks(mut self, marks: &[bool]) -> Result<Self> {
        if marks.len() != self.rows.len() {
            return Err(Error::LengthMismatch {
                left: self.rows.len(),
                right: marks.len(),
            });
        }
        for (row, &marked) in self.rows.iter_mut().zip(marks) {
            row.label = Some(!marked);
        }
        Ok(self)
    }

    /// Labeled rows; errors if any row lacks a label.
    pub fn labeled(&self) -> Result<Vec<LabeledSentence>> {
        self.rows
            .iter()
            .map(|r| {
                r.label
                    .map(|understood| LabeledSentence {
                        sentence_index: r.sentence_index,
                        vector: r.vector,
                        understood,
                    })
                    .ok_or_else(|| Error::parse("feature matrix", format!("row {} has no label", r.sentence_index)))
            })
            .collect()
    }

    pub fn from_labeled(rows: &[LabeledSentence]) -> Self {
        FeatureMatrix {
            rows: rows
                .iter()
                .map(|r| FeatureRow {
                    sentence_index: r.sentence_index,
                    vector: r.vector,
                    label: Some(r.understood),
                })
                .collect(),
        }
    }

    /// CSV with header `sentence_index,f1..f16[,label]`. The label column is
    /// written when any row carries a label.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let with_label = self.rows.iter().any(|r| r.label.is_some());
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["sentence_index"];
        header.extend(FEATURE_NAMES);
        if with_label {
            header.push("label");
        }
        wtr.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.sentence_index.to_string()];
            rec.extend(row.vector.to_array().iter().map(f64::to_string));
            if with_label {
                rec.push(match row.label {
                    Some(true) => "1".into(),
                    Some(false) => "0".into(),
                    None => String::new(),
                });
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<feature csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, source_name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let names: Vec<&str> = headers.iter().collect();
        let with_label = match names.len() {
            17 => false,
            18 if names[17] == "label" => true,
            _ => return Err(Error::parse(source_name, "expected sentence_index,f1..f16[,label]")),
        };
        if names[0] != "sentence_index" || names[1..17] != FEATURE_NAMES {
            return Err(Error::parse(source_name, "expected sentence_index,f1..f16[,label]"));
        }
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let loc = || format!("{source_name}:{}", line + 2);
            let sentence_index = rec[0].parse::<usize>().map_err(|e| Error::parse(loc(), e))?;
            let mut values = [0.0; FEATURE_COUNT];
            for (j, v) in values.iter_mut().enumerate() {
                *v = rec[j + 1].parse::<f64>().map_err(|e| Error::parse(loc(), e))?;
                if !v.is_finite() {
                    return Err(Error::parse(loc(), format!("non-finite {}", FEATURE_NAMES[j])));
                }
            }
            let label = if with_label {
                match &rec[17] {
                    "" => None,
                    "1" | "true" => Some(true),
                    "0" | "false" => Some(false),
                    other => return Err(Error::parse(loc(), format!("bad label {other:?}"))),
                }
            } else {
                None
            };
            rows.push(FeatureRow {
                sentence_index,
                vector: FeatureVector::from_array(values),
                label,
            });
        }
        Ok(FeatureMatrix { rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Builds the feature matrix of a document from its word-resolved fixation
/// stream (temporal order). Rows follow document order.
pub fn build_matrix(
    doc: &LayoutDocument,
    fixations: &[Fixation],
    lexicons: &Lexicons,
) -> Result<FeatureMatrix> {
    if doc.sentences.is_empty() {
        return Err(Error::Empty("document"));
    }
    let attributed = attribute_fixations(fixations, doc)?;
    let rows = doc
        .sentences
        .par_iter()
        .zip(attributed.par_iter())
        .map(|(span, fixations)| {
            let ling = linguistic_features(span, doc, lexicons)?;
            let gaze = gaze_features(fixations, ling.words)?;
            Ok(FeatureRow {
                sentence_index: span.index,
                vector: FeatureVector::from_parts(gaze, ling),
                label: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMatrix { rows })
}

/// Raw gaze to feature matrix: I-VT, AOI mapping, then [`build_matrix`].
pub fn extract_features(
    doc: &LayoutDocument,
    samples: &[GazeSample],
    ivt: &IvtParams,
    snap_radius: f64,
    lexicons: &Lexicons,
) -> Result<FeatureMatrix> {
    let fixations = detect_fixations(samples, ivt)?;
    let resolved = resolve_fixations(&fixations, doc, snap_radius);
    build_matrix(doc, &resolved, lexicons)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::WordBox;

    fn doc(sentences: &[&str]) -> LayoutDocument {
        let mut words = Vec::new();
        for (s, text) in sentences.iter().enumerate() {
            for (i, w) in text.split_whitespace().enumerate() {
                words.push(WordBox {
                    text: w.into(),
                    x: i as f64 * 50.0,
                    y: s as f64 * 40.0,
                    w: 40.0,
                    h: 20.0,
                    sentence_index: s,
                });
            }
        }
        LayoutDocument::from_words("t", sentences.iter().map(|s| s.to_string()).collect(), words).unwrap()
    }

    #[test]
    fn no_fixations_gives_zero_gaze_features() {
        let g = gaze_features(&[], 4).unwrap();
        assert_eq!(g, GazeFeatures::default());
        assert!(gaze_features(&[], 0).is_err());
    }

    #[test]
    fn one_backward_step() {
        let seq = chain_fixations([0, 1, 2, 1, 3].into_iter().zip([100.0, 120.0, 80.0, 90.0, 110.0]));
        let g = gaze_features(&seq, 8).unwrap();
        assert_eq!(g.max_fix_dur, 120.0);
        assert_eq!(g.total_fix_dur, 500.0);
        assert_eq!(g.fix_count, 5);
        assert_eq!(g.regressive_fix_count, 1);
        assert_eq!(g.count_per_word, 5.0 / 8.0);
    }

    #[test]
    fn every_step_regresses() {
        let seq = chain_fixations([4, 3, 2].into_iter().zip([100.0; 3]));
        assert_eq!(gaze_features(&seq, 5).unwrap().regressive_fix_count, 2);
    }

    #[test]
    fn the_cat_sat_linguistics() {
        let words = vec![WordBox {
            text: "The cat sat.".into(),
            x: 10.0,
            y: 0.0,
            w: 120.0,
            h: 20.0,
            sentence_index: 0,
        }];
        let d = LayoutDocument::from_words("t", vec!["The cat sat.".into()], words).unwrap();
        let f = linguistic_features(&d.sentences[0], &d, &Lexicons::bundled()).unwrap();
        assert_eq!((f.words, f.stopwords, f.chars, f.content_words), (3, 1, 9, 2));
        assert_eq!(f.pixel_len, 120.0);
        assert!((f.ari - (-5.80)).abs() < 1e-9);
        assert!((f.fkgl - (-2.62)).abs() < 1e-9);
    }

    #[test]
    fn all_stopword_and_oov_sentences() {
        let lex = Lexicons::bundled();
        let d = doc(&["it is what it is", "Zorbly quaxed flurm"]);
        let f = linguistic_features(&d.sentences[0], &d, &lex).unwrap();
        assert_eq!((f.content_words, f.named_entities, f.ne_per_word), (0, 0, 0.0));
        let f = linguistic_features(&d.sentences[1], &d, &lex).unwrap();
        assert_eq!(f.avg_aoa, lex.aoa.mean_rating());
        assert_eq!(f.avg_zipf, lex.frequency.mean_rating());
    }

    fn fix(word: usize, duration: f64) -> Fixation {
        Fixation {
            start: 0.0,
            end: duration,
            duration,
            cx: 0.0,
            cy: 0.0,
            word_index: Some(word),
        }
    }

    #[test]
    fn matrix_shape_and_cross_sentence_regression() {
        let d = doc(&["The cat sat.", "The dog ran home.", "It rained."]);
        // Words: s0 = 0..=2, s1 = 3..=6, s2 = 7..=8.
        let mut stream = vec![fix(0, 100.0), fix(1, 150.0), fix(4, 200.0), fix(2, 90.0), fix(5, 120.0)];
        stream.insert(2, Fixation { word_index: None, ..fix(0, 300.0) });
        let m = build_matrix(&d, &stream, &Lexicons::bundled()).unwrap();
        assert_eq!(m.len(), 3);
        let r0 = m.rows[0].vector;
        assert_eq!((r0.f1_max_fix_dur, r0.f2_total_fix_dur, r0.f3_fix_count), (150.0, 340.0, 3.0));
        // 4 -> 2 lands in sentence 0.
        assert_eq!(r0.f4_regressive_fix_count, 1.0);
        assert_eq!(m.rows[1].vector.f4_regressive_fix_count, 0.0);
        assert_eq!(m.rows[2].vector.f3_fix_count, 0.0);
        for row in &m.rows {
            let v = row.vector;
            assert!(v.f1_max_fix_dur <= v.f2_total_fix_dur);
            assert!(v.f4_regressive_fix_count <= v.f3_fix_count);
            assert_eq!(v.f5_count_per_word, v.f3_fix_count / v.f6_words);
            assert_eq!(v.f12_ne_per_word, v.f11_named_entities / v.f6_words);
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let d = doc(&["The cat sat.", "El Niño is forming in its stead."]);
        let m = build_matrix(&d, &[fix(0, 123.456789), fix(5, 1.0 / 3.0)], &Lexicons::bundled())
            .unwrap()
            .with_marks(&[false, true])
            .unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("sentence_index,f1,f2,f3,f4,f5,f6,f7,f8,f9,f10,f11,f12,f13,f14,f15,f16,label\n"));
        let back = FeatureMatrix::read_csv(&buf[..], "mem").unwrap();
        assert_eq!(back, m);
        let labeled = back.labeled().unwrap();
        assert!(labeled[0].understood && !labeled[1].understood);
    }

    #[test]
    fn unlabeled_csv_has_no_label_column() {
        let d = doc(&["The cat sat."]);
        let m = build_matrix(&d, &[], &Lexicons::bundled()).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert!(!String::from_utf8(buf.clone()).unwrap().contains("label"));
        assert!(FeatureMatrix::read_csv(&buf[..], "mem").unwrap().labeled().is_err());
    }
}
