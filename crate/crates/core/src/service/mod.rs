//! Reading sessions, per-user models and the on-disk store behind them.
//!
//! Store layout under the root directory:
//!
//! ```text
//! sessions/<session_id>/layout.json    layout uploaded at creation
//! sessions/<session_id>/gaze.csv       append-only gaze log
//! sessions/<session_id>/session.json   state, scores, marks, document
//! sessions/<session_id>/features.csv   matrix computed at scoring
//! users/<user_id>/corpus/<session_id>.csv   labeled rows per session
//! users/<user_id>/model.json
//! users/<user_id>/report.json
//! ```
//!
//! The gaze log is synced before an ingest call returns, so a crash loses at
//! most the batch in flight. Every other file is replaced atomically.

mod api;
mod config;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureMatrix, LabeledSentence};
use crate::gaze::{append_gaze_log, check_monotone, load_gaze_log, GazeSample};
use crate::layout::LayoutDocument;
use crate::learner::{classify_threshold, train_and_evaluate, ComprehensionModel, EvalReport, Hyperparams};
use crate::linguistics::Lexicons;
use crate::simplifier::{build_prompt_for, simplify, ChangeRecord, CompletionClient, SimplificationResult, SlotDocument};

pub use api::{handle, serve, spawn, ApiResponse, GazeBatch, GazeSampleWire, ServerHandle};
pub use config::{ClientConfig, ServiceConfig};

/// A user needs at least this many labeled sentences before training.
pub const MIN_CORPUS_ROWS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Reading,
    Scored,
    Simplified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplificationFailure {
    pub sentence_index: usize,
    pub message: String,
}

/// Everything about a session except its layout and gaze log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub user_id: String,
    pub state: SessionState,
    pub scores: Option<Vec<f64>>,
    pub flagged: Vec<usize>,
    /// `true` = marked by the reader as not understood.
    pub marks: Option<Vec<bool>>,
    pub document: SlotDocument,
    pub changes: Vec<ChangeRecord>,
    pub failures: Vec<SimplificationFailure>,
}

#[derive(Debug)]
struct Session {
    record: SessionRecord,
    layout: LayoutDocument,
    gaze: Vec<GazeSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreOutcome {
    /// P(understood) per sentence.
    pub scores: Vec<f64>,
    pub flagged: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplifyOutcome {
    pub results: Vec<SimplificationResult>,
    pub failures: Vec<SimplificationFailure>,
    pub document: SlotDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentView {
    pub session_id: String,
    pub state: SessionState,
    pub slots: Vec<String>,
    pub flagged: Vec<usize>,
    pub scores: Option<Vec<f64>>,
    pub changes: Vec<ChangeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserReport {
    pub user_id: String,
    pub seed: u64,
    pub corpus_rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub hyperparams: Hyperparams,
    pub cv_f1: f64,
    pub report: EvalReport,
}

fn check_id(kind: &'static str, id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            name: kind,
            reason: format!("{id:?} must be 1-128 characters of [A-Za-z0-9_-]"),
        })
    }
}

/// Writes through a temporary file so readers never see a partial file.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn state_error(record: &SessionRecord, wanted: &str) -> Error {
    Error::InvalidState(format!(
        "session {} is {:?}, expected {wanted}",
        record.session_id, record.state
    ))
}

pub struct Service {
    root: PathBuf,
    config: ServiceConfig,
    lexicons: Lexicons,
    client: Box<dyn CompletionClient>,
    sessions: Mutex<HashMap<String, Arc<RwLock<Session>>>>,
    /// Training holds a user's lock exclusively; scoring shares it.
    users: Mutex<HashMap<String, Arc<RwLock<()>>>>,
}

impl Service {
    /// Opens (or creates) a store at `root`, building the lexicons and the
    /// completion client from `config`.
    pub fn open(root: impl Into<PathBuf>, config: ServiceConfig) -> Result<Self> {
        config.validate()?;
        let lexicons = config.lexicons()?;
        let client = config.client.build(&lexicons)?;
        Self::with_client(root, config, lexicons, client)
    }

    pub fn with_client(
        root: impl Into<PathBuf>,
        config: ServiceConfig,
        lexicons: Lexicons,
        client: Box<dyn CompletionClient>,
    ) -> Result<Self> {
        let root = root.into();
        create_dir(&root.join("sessions"))?;
        create_dir(&root.join("users"))?;
        Ok(Service {
            root,
            config,
            lexicons,
            client,
            sessions: Mutex::new(HashMap::new()),
            users: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn lexicons(&self) -> &Lexicons {
        &self.lexicons
    }

    fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(id)
    }

    fn user_dir(&self, id: &str) -> PathBuf {
        self.root.join("users").join(id)
    }

    fn user_lock(&self, user_id: &str) -> Arc<RwLock<()>> {
        let mut users = self.users.lock().expect("user table lock");
        users.entry(user_id.to_string()).or_default().clone()
    }

    /// Looks a session up in memory, loading it from disk on first use.
    fn session(&self, id: &str) -> Result<Arc<RwLock<Session>>> {
        check_id("session_id", id).map_err(|_| Error::NotFound(format!("session {id}")))?;
        let mut sessions = self.sessions.lock().expect("session table lock");
        if let Some(s) = sessions.get(id) {
            return Ok(s.clone());
        }
        let dir = self.session_dir(id);
        if !dir.join("session.json").exists() {
            return Err(Error::NotFound(format!("session {id}")));
        }
        let text = std::fs::read_to_string(dir.join("session.json")).map_err(|e| Error::io(dir.join("session.json"), e))?;
        let record: SessionRecord = serde_json::from_str(&text)?;
        let layout = LayoutDocument::load(&dir.join("layout.json"))?;
        let gaze_path = dir.join("gaze.csv");
        let gaze = if gaze_path.exists() {
            load_gaze_log(&gaze_path)?
        } else {
            Vec::new()
        };
        let session = Arc::new(RwLock::new(Session { record, layout, gaze }));
        sessions.insert(id.to_string(), session.clone());
        Ok(session)
    }

    fn persist(&self, record: &SessionRecord) -> Result<()> {
        let path = self.session_dir(&record.session_id).join("session.json");
        write_atomic(&path, serde_json::to_string_pretty(record)?.as_bytes())
    }

    pub fn create_session(&self, user_id: &str, layout: LayoutDocument) -> Result<String> {
        check_id("user_id", user_id)?;
        layout.validate()?;
        let session_id = uuid::Uuid::new_v4().simple().to_string();
        let dir = self.session_dir(&session_id);
        create_dir(&dir)?;
        write_atomic(&dir.join("layout.json"), layout.to_json()?.as_bytes())?;
        let record = SessionRecord {
            session_id: session_id.clone(),
            user_id: user_id.to_string(),
            state: SessionState::Reading,
            scores: None,
            flagged: Vec::new(),
            marks: None,
            document: SlotDocument::new(layout.sentence_texts()),
            changes: Vec::new(),
            failures: Vec::new(),
        };
        self.persist(&record)?;
        self.sessions.lock().expect("session table lock").insert(
            session_id.clone(),
            Arc::new(RwLock::new(Session {
                record,
                layout,
                gaze: Vec::new(),
            })),
        );
        Ok(session_id)
    }

    /// Appends a batch to the session's gaze log. A batch that is internally
    /// out of order or starts before the last accepted sample is rejected
    /// whole.
    pub fn ingest_gaze(&self, session_id: &str, batch: &[GazeSample]) -> Result<usize> {
        let session = self.session(session_id)?;
        let mut s = session.write().expect("session lock");
        if s.record.state != SessionState::Reading {
            return Err(state_error(&s.record, "reading"));
        }
        if batch.is_empty() {
            return Ok(0);
        }
        for sample in batch {
            if !sample.timestamp.is_finite() || (sample.valid && !sample.is_usable()) {
                return Err(Error::InvalidParam {
                    name: "sample",
                    reason: format!("bad sample at {} ms", sample.timestamp),
                });
            }
        }
        if let Some(last) = s.gaze.last() {
            if !(batch[0].timestamp >= last.timestamp) {
                return Err(Error::NonMonotone {
                    last: last.timestamp,
                    next: batch[0].timestamp,
                });
            }
        }
        check_monotone(batch).map_err(|e| match e {
            Error::NonIncreasingTimestamps { previous, next } => Error::NonMonotone { last: previous, next },
            other => other,
        })?;
        append_gaze_log(&self.session_dir(session_id).join("gaze.csv"), batch)?;
        s.gaze.extend_from_slice(batch);
        Ok(batch.len())
    }

    fn session_matrix(&self, s: &Session) -> Result<FeatureMatrix> {
        extract_features(&s.layout, &s.gaze, &self.config.ivt, self.config.snap_radius, &self.lexicons)
    }

    pub fn load_model(&self, user_id: &str) -> Result<ComprehensionModel> {
        let path = self.user_dir(user_id).join("model.json");
        if !path.exists() {
            return Err(Error::UntrainedUser(user_id.to_string()));
        }
        ComprehensionModel::load(&path)
    }

    /// Scores every sentence with the user's model and flags those below the
    /// decision threshold. Repeat calls return the stored result.
    pub fn finalize_and_score(&self, session_id: &str) -> Result<ScoreOutcome> {
        let session = self.session(session_id)?;
        let mut s = session.write().expect("session lock");
        if let (SessionState::Scored | SessionState::Simplified, Some(scores)) = (s.record.state, &s.record.scores) {
            return Ok(ScoreOutcome {
                scores: scores.clone(),
                flagged: s.record.flagged.clone(),
            });
        }
        let user_lock = self.user_lock(&s.record.user_id);
        let _shared = user_lock.read().expect("user lock");
        let model = self.load_model(&s.record.user_id)?;
        let matrix = self.session_matrix(&s)?;
        let scores = model.predict_full(&matrix.values())?;
        let flagged: Vec<usize> = classify_threshold(&scores)
            .iter()
            .enumerate()
            .filter(|(_, &understood)| !understood)
            .map(|(i, _)| i)
            .collect();
        matrix.save(&self.session_dir(session_id).join("features.csv"))?;
        let mut record = s.record.clone();
        record.state = SessionState::Scored;
        record.scores = Some(scores.clone());
        record.flagged = flagged.clone();
        self.persist(&record)?;
        s.record = record;
        Ok(ScoreOutcome { scores, flagged })
    }

    pub fn simplify_flagged(&self, session_id: &str) -> Result<SimplifyOutcome> {
        self.simplify_flagged_with(session_id, self.client.as_ref())
    }

    /// Simplifies every flagged sentence and swaps it into the document. A
    /// failing sentence is reported and left as it was; the others proceed.
    pub fn simplify_flagged_with(&self, session_id: &str, client: &dyn CompletionClient) -> Result<SimplifyOutcome> {
        let session = self.session(session_id)?;
        let mut s = session.write().expect("session lock");
        if s.record.state != SessionState::Scored {
            return Err(state_error(&s.record, "scored"));
        }
        let outcomes: Vec<(usize, Result<SimplificationResult>)> = s
            .record
            .flagged
            .par_iter()
            .map(|&i| {
                let original = &s.layout.sentences[i].text;
                (i, build_prompt_for(i, original).and_then(|req| simplify(&req, client)))
            })
            .collect();
        let mut record = s.record.clone();
        let mut results = Vec::new();
        let mut failures = Vec::new();
        for (i, outcome) in outcomes {
            match outcome {
                Ok(result) => {
                    record.changes.push(record.document.replace_sentence(i, &result.simplified)?);
                    results.push(result);
                }
                Err(e) => failures.push(SimplificationFailure {
                    sentence_index: i,
                    message: e.to_string(),
                }),
            }
        }
        record.failures = failures.clone();
        record.state = SessionState::Simplified;
        self.persist(&record)?;
        let document = record.document.clone();
        s.record = record;
        Ok(SimplifyOutcome {
            results,
            failures,
            document,
        })
    }

    /// Stores the reader's marks and writes the session's labeled rows into
    /// the user's corpus, replacing any earlier submission for the session.
    pub fn submit_marks(&self, session_id: &str, marks: &[bool]) -> Result<usize> {
        let session = self.session(session_id)?;
        let mut s = session.write().expect("session lock");
        let count = s.layout.sentence_count();
        if marks.len() != count {
            return Err(Error::LengthMismatch {
                left: count,
                right: marks.len(),
            });
        }
        let matrix = self.session_matrix(&s)?.with_marks(marks)?;
        let corpus = self.user_dir(&s.record.user_id).join("corpus");
        create_dir(&corpus)?;
        let mut csv = Vec::new();
        matrix.write_csv(&mut csv)?;
        write_atomic(&corpus.join(format!("{session_id}.csv")), &csv)?;
        let mut record = s.record.clone();
        record.marks = Some(marks.to_vec());
        self.persist(&record)?;
        s.record = record;
        Ok(matrix.len())
    }

    /// All labeled rows of a user, sessions in id order.
    pub fn user_corpus(&self, user_id: &str) -> Result<Vec<LabeledSentence>> {
        check_id("user_id", user_id)?;
        let dir = self.user_dir(user_id).join("corpus");
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        let mut rows = Vec::new();
        for f in files {
            rows.extend(FeatureMatrix::load(&f)?.labeled()?);
        }
        Ok(rows)
    }

    /// Trains the user's model on their corpus (70/30 split, grid search
    /// with selection) and persists the model and the held-out report.
    pub fn train_user(&self, user_id: &str, seed: u64) -> Result<UserReport> {
        let rows = self.user_corpus(user_id)?;
        if rows.len() < MIN_CORPUS_ROWS {
            return Err(Error::InsufficientData(format!(
                "user {user_id} has {} labeled sentences, need {MIN_CORPUS_ROWS}",
                rows.len()
            )));
        }
        let positives = rows.iter().filter(|r| r.understood).count();
        if positives == 0 || positives == rows.len() {
            return Err(Error::InsufficientData(format!(
                "user {user_id} corpus has a single class"
            )));
        }
        let user_lock = self.user_lock(user_id);
        let _exclusive = user_lock.write().expect("user lock");
        let evaluation = train_and_evaluate(&rows, seed, &self.config.training)?;
        let best = evaluation.search.best();
        let report = UserReport {
            user_id: user_id.to_string(),
            seed,
            corpus_rows: rows.len(),
            train_rows: evaluation.train_rows,
            test_rows: evaluation.test_rows,
            hyperparams: best.hyperparams.clone(),
            cv_f1: best.selection.final_f1,
            report: evaluation.report.clone(),
        };
        let dir = self.user_dir(user_id);
        create_dir(&dir)?;
        write_atomic(&dir.join("model.json"), evaluation.search.model.to_json()?.as_bytes())?;
        write_atomic(&dir.join("report.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
        Ok(report)
    }

    pub fn user_report(&self, user_id: &str) -> Result<UserReport> {
        check_id("user_id", user_id).map_err(|_| Error::NotFound(format!("user {user_id}")))?;
        let path = self.user_dir(user_id).join("report.json");
        if !path.exists() {
            return Err(Error::NotFound(format!("report for user {user_id}")));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn document(&self, session_id: &str) -> Result<DocumentView> {
        let session = self.session(session_id)?;
        let s = session.read().expect("session lock");
        Ok(DocumentView {
            session_id: s.record.session_id.clone(),
            state: s.record.state,
            slots: s.record.document.slots.clone(),
            flagged: s.record.flagged.clone(),
            scores: s.record.scores.clone(),
            changes: s.record.changes.clone(),
        })
    }

    pub fn record(&self, session_id: &str) -> Result<SessionRecord> {
        let session = self.session(session_id)?;
        let s = session.read().expect("session lock");
        Ok(s.record.clone())
    }

    pub fn gaze_len(&self, session_id: &str) -> Result<usize> {
        let session = self.session(session_id)?;
        let s = session.read().expect("session lock");
        Ok(s.gaze.len())
    }
}

#[cfg(test)]
mod tests;
