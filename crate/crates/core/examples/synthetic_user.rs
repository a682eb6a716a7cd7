//! Generates one synthetic reader and runs the full per-user protocol.

use std::time::Instant;

use gazeread::gaze::IvtParams;
use gazeread::layout::DEFAULT_SNAP_RADIUS;
use gazeread::learner::{train_and_evaluate, TrainingConfig};
use gazeread::linguistics::Lexicons;
use gazeread::synth::{generate_user, SynthConfig};

fn main() -> gazeread::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let lexicons = Lexicons::bundled();
    let user = generate_user("demo", seed, &SynthConfig::default(), &lexicons)?;
    let rows = user.labeled_rows(&IvtParams::default(), DEFAULT_SNAP_RADIUS, &lexicons)?;
    println!(
        "{} sentences, {} marked, {} gaze samples",
        rows.len(),
        rows.iter().filter(|r| !r.understood).count(),
        user.gaze.len()
    );
    let started = Instant::now();
    let eval = train_and_evaluate(&rows, seed, &TrainingConfig::default())?;
    let best = eval.search.best();
    println!(
        "weighted F1 {:.3} (precision {:.3}, recall {:.3}) on {} held-out rows",
        eval.report.weighted_f1, eval.report.weighted_precision, eval.report.weighted_recall, eval.test_rows
    );
    println!(
        "best cell: depth {} l2 {} temperature {}, features {:?}",
        best.hyperparams.tree_depth,
        best.hyperparams.l2_leaf_reg,
        best.hyperparams.bagging_temperature,
        eval.report.selected_feature_indices
    );
    println!("trained in {:.1?}", started.elapsed());
    Ok(())
}
