//! Command-line front end. Each verb mirrors a service operation so that a
//! recorded session can be replayed offline.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::eval_readability::{compare_report, PairCorpus};
use crate::features::{extract_features, FeatureMatrix};
use crate::gaze::{detect_fixations, load_gaze_log, save_gaze_log};
use crate::layout::{resolve_fixations, LayoutDocument};
use crate::learner::{classify_threshold, train_and_evaluate, weighted_metrics, ComprehensionModel};
use crate::linguistics::split_sentences;
use crate::service::{self, Service, ServiceConfig};
use crate::simplifier::{build_prompt_for, example_pairs, simplify};
use crate::synth::{generate_user, SynthConfig};

#[derive(Parser, Debug)]
#[command(name = "gazeread", version, about = "Gaze-driven comprehension scoring and sentence simplification")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for splits, folds and bagging.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// JSON config (IVT parameters, snap radius, grid, client).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory with aoa.csv and frequency.csv; overrides the config.
    #[arg(long, global = true)]
    pub lexicon_dir: Option<PathBuf>,
}

impl Global {
    pub fn load_config(&self) -> anyhow::Result<ServiceConfig> {
        let mut config = match &self.config {
            Some(path) => ServiceConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => ServiceConfig::default(),
        };
        if let Some(dir) = &self.lexicon_dir {
            config.lexicon_dir = Some(dir.clone());
        }
        Ok(config)
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Gaze log to fixations (CSV), optionally mapped onto a layout's words.
    DetectFixations {
        #[arg(long)]
        gaze: PathBuf,
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gaze log and layout to the per-sentence feature matrix.
    ExtractFeatures {
        #[arg(long)]
        gaze: PathBuf,
        #[arg(long)]
        layout: PathBuf,
        /// JSON array of per-sentence marks (true = not understood).
        #[arg(long)]
        marks: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Labeled feature matrix to a model plus held-out report.
    Train {
        #[arg(long, required = true, num_args = 1..)]
        features: Vec<PathBuf>,
        #[arg(long)]
        model_out: PathBuf,
        #[arg(long)]
        report_out: Option<PathBuf>,
    },
    /// Scores a feature matrix; reports metrics when it carries labels.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simplifies sentences with the configured client.
    Simplify {
        /// Text file; split into sentences.
        #[arg(long, conflicts_with = "sentence")]
        input: Option<PathBuf>,
        #[arg(long)]
        sentence: Vec<String>,
    },
    /// Readability of original vs simplified pairs.
    Evaluate {
        /// JSON array of {original, simplified}; bundled examples if absent.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Runs a recorded session through the service pipeline.
    Replay {
        #[arg(long)]
        gaze: PathBuf,
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "user")]
        user: String,
        /// Marks to submit after reading (JSON array of booleans).
        #[arg(long)]
        marks: Option<PathBuf>,
        /// Train the user's model after submitting marks.
        #[arg(long)]
        train: bool,
        /// Batch length in ms of gaze time.
        #[arg(long, default_value_t = 500.0)]
        batch_ms: f64,
        /// Sleep this many ms between batches to mimic a live client.
        #[arg(long)]
        poll: Option<u64>,
    },
    /// Serves the HTTP API.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
    /// Writes a synthetic reader's layout, gaze log and marks.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 270)]
        sentences: usize,
    },
}

fn output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn read_marks(path: &Path) -> anyhow::Result<Vec<bool>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a JSON array of booleans", path.display()))
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let config = cli.global.load_config()?;
    let seed = cli.global.seed;
    match cli.command {
        Command::DetectFixations { gaze, layout, out } => {
            let samples = load_gaze_log(&gaze)?;
            let mut fixations = detect_fixations(&samples, &config.ivt)?;
            if let Some(layout) = layout {
                fixations = resolve_fixations(&fixations, &LayoutDocument::load(&layout)?, config.snap_radius);
            }
            let mut wtr = csv::Writer::from_writer(Vec::new());
            for f in &fixations {
                wtr.serialize(f)?;
            }
            output(out.as_deref(), &String::from_utf8(wtr.into_inner()?)?)?;
        }
        Command::ExtractFeatures { gaze, layout, marks, out } => {
            let layout = LayoutDocument::load(&layout)?;
            let lexicons = config.lexicons()?;
            let mut matrix = extract_features(&layout, &load_gaze_log(&gaze)?, &config.ivt, config.snap_radius, &lexicons)?;
            if let Some(marks) = marks {
                matrix = matrix.with_marks(&read_marks(&marks)?)?;
            }
            let mut buf = Vec::new();
            matrix.write_csv(&mut buf)?;
            output(out.as_deref(), &String::from_utf8(buf)?)?;
        }
        Command::Train {
            features,
            model_out,
            report_out,
        } => {
            let mut rows = Vec::new();
            for f in &features {
                rows.extend(FeatureMatrix::load(f)?.labeled()?);
            }
            let eval = train_and_evaluate(&rows, seed, &config.training)?;
            eval.search.model.save(&model_out)?;
            let report = serde_json::to_string_pretty(&eval.report)?;
            output(report_out.as_deref(), &(report + "\n"))?;
        }
        Command::Predict { model, features, out } => {
            let model = ComprehensionModel::load(&model)?;
            let matrix = FeatureMatrix::load(&features)?;
            let scores = model.predict_full(&matrix.values())?;
            let mut wtr = csv::Writer::from_writer(Vec::new());
            wtr.write_record(["sentence_index", "score", "understood"])?;
            for ((row, s), u) in matrix.rows.iter().zip(&scores).zip(classify_threshold(&scores)) {
                wtr.write_record([row.sentence_index.to_string(), s.to_string(), u.to_string()])?;
            }
            output(out.as_deref(), &String::from_utf8(wtr.into_inner()?)?)?;
            if matrix.rows.iter().all(|r| r.label.is_some()) && !matrix.is_empty() {
                let y: Vec<bool> = matrix.rows.iter().filter_map(|r| r.label).collect();
                let mut report = weighted_metrics(&y, &classify_threshold(&scores))?;
                report.selected_feature_indices = model.selected_features.clone();
                eprintln!("{}", serde_json::to_string_pretty(&report)?);
            }
        }
        Command::Simplify { input, sentence } => {
            let sentences = match input {
                Some(path) => split_sentences(&std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?),
                None => sentence,
            };
            if sentences.is_empty() {
                bail!("nothing to simplify: pass --input or --sentence");
            }
            let client = config.client.build(&config.lexicons()?)?;
            for (i, s) in sentences.iter().enumerate() {
                let result = simplify(&build_prompt_for(i, s)?, client.as_ref())?;
                println!("{}", serde_json::to_string(&result)?);
            }
        }
        Command::Evaluate { pairs, json } => {
            let corpus = match pairs {
                Some(path) => PairCorpus::load(&path)?,
                None => PairCorpus::new(example_pairs())?,
            };
            let report = compare_report(&corpus, &config.lexicons()?)?;
            if json {
                println!("{}", report.to_json()?);
            } else {
                print!("{}", report.to_text());
            }
        }
        Command::Replay {
            gaze,
            layout,
            store,
            user,
            marks,
            train,
            batch_ms,
            poll,
        } => replay(config, seed, &gaze, &layout, &store, &user, marks.as_deref(), train, batch_ms, poll)?,
        Command::Serve { store, addr, workers } => {
            let service = Arc::new(Service::open(store, config)?);
            let handle = service::spawn(service, &addr, workers)?;
            eprintln!("listening on http://{}", handle.addr());
            handle.wait();
        }
        Command::Synth { out_dir, sentences } => {
            let cfg = SynthConfig {
                sentences,
                ..Default::default()
            };
            let user = generate_user("synthetic", seed, &cfg, &config.lexicons()?)?;
            std::fs::create_dir_all(&out_dir)?;
            user.layout.save(&out_dir.join("layout.json"))?;
            save_gaze_log(&out_dir.join("gaze.csv"), &user.gaze)?;
            std::fs::write(out_dir.join("marks.json"), serde_json::to_string(&user.marks)?)?;
            eprintln!(
                "{} sentences, {} marked, {} samples -> {}",
                user.marks.len(),
                user.marks.iter().filter(|&&m| m).count(),
                user.gaze.len(),
                out_dir.display()
            );
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn replay(
    config: ServiceConfig,
    seed: u64,
    gaze: &Path,
    layout: &Path,
    store: &Path,
    user: &str,
    marks: Option<&Path>,
    train: bool,
    batch_ms: f64,
    poll: Option<u64>,
) -> anyhow::Result<()> {
    if !(batch_ms > 0.0) {
        bail!("--batch-ms must be positive");
    }
    let service = Service::open(store, config)?;
    let samples = load_gaze_log(gaze)?;
    let id = service.create_session(user, LayoutDocument::load(layout)?)?;
    eprintln!("session {id}");
    let mut start = 0;
    while start < samples.len() {
        let t0 = samples[start].timestamp;
        let end = samples[start..]
            .iter()
            .position(|s| s.timestamp >= t0 + batch_ms)
            .map_or(samples.len(), |p| start + p);
        let accepted = service.ingest_gaze(&id, &samples[start..end])?;
        if let Some(ms) = poll {
            eprintln!("t={t0:.0} ms accepted {accepted}");
            std::thread::sleep(Duration::from_millis(ms));
        }
        start = end;
    }
    if let Some(path) = marks {
        let rows = service.submit_marks(&id, &read_marks(path)?)?;
        eprintln!("marks stored, {rows} rows");
    }
    if train {
        let report = service.train_user(user, seed)?;
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    match service.finalize_and_score(&id) {
        Ok(score) => {
            eprintln!("flagged {:?}", score.flagged);
            let out = service.simplify_flagged(&id)?;
            for f in &out.failures {
                eprintln!("sentence {} not simplified: {}", f.sentence_index, f.message);
            }
        }
        Err(crate::Error::UntrainedUser(u)) => {
            eprintln!("user {u} has no model yet; session left in reading state");
        }
        Err(e) => return Err(e.into()),
    }
    println!("{}", serde_json::to_string_pretty(&service.document(&id)?)?);
    Ok(())
}

/// Entry point for the binary.
pub fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
