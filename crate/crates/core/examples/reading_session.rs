//! The whole service lifecycle for one reader, in process: read a first
//! document and mark it, train on the marks, then read a second document
//! and get its hard sentences simplified.

use gazeread::learner::{GridSpec, TrainingConfig};
use gazeread::linguistics::Lexicons;
use gazeread::service::{Service, ServiceConfig};
use gazeread::synth::{generate_users, SyntheticUser, SynthConfig};

fn read(service: &Service, reader: &SyntheticUser) -> gazeread::Result<String> {
    let id = service.create_session("reader", reader.layout.clone())?;
    for batch in reader.gaze.chunks(30) {
        service.ingest_gaze(&id, batch)?;
    }
    Ok(id)
}

fn main() -> gazeread::Result<()> {
    let store = tempfile::tempdir().expect("temp dir");
    // A one-cell grid keeps the example quick; the default searches 48.
    let config = ServiceConfig {
        training: TrainingConfig {
            grid: GridSpec {
                tree_depths: vec![4],
                l2_leaf_regs: vec![3.0],
                bagging_temperatures: vec![1.0],
            },
            ..TrainingConfig::default()
        },
        ..ServiceConfig::default()
    };
    let service = Service::open(store.path(), config)?;
    let synth = SynthConfig { sentences: 120, ..SynthConfig::default() };
    let docs = generate_users(2, 5, &synth, &Lexicons::bundled())?;

    let first = read(&service, &docs[0])?;
    service.submit_marks(&first, &docs[0].marks)?;
    let report = service.train_user("reader", 5)?;
    println!(
        "trained on {} sentences: CV F1 {:.3}, held-out F1 {:.3}",
        report.corpus_rows, report.cv_f1, report.report.weighted_f1
    );

    let second = read(&service, &docs[1])?;
    let scored = service.finalize_and_score(&second)?;
    let truly_marked = docs[1].marks.iter().filter(|&&m| m).count();
    println!("{} of {} sentences flagged ({truly_marked} marked by the reader)", scored.flagged.len(), scored.scores.len());
    let out = service.simplify_flagged(&second)?;
    for r in out.results.iter().take(3) {
        println!("\n[{}] {}\n  -> {}", r.sentence_index, r.original, r.simplified);
    }
    println!("\nsession files under {}", store.path().join("sessions").join(&second).display());
    Ok(())
}
