//! Trains a boosted-tree comprehension model on one synthetic reader with a
//! single hyperparameter cell: backward feature selection under 5-fold CV,
//! then a refit and a save/load round trip.

use gazeread::features::{FEATURE_COUNT, FEATURE_NAMES};
use gazeread::gaze::IvtParams;
use gazeread::layout::DEFAULT_SNAP_RADIUS;
use gazeread::learner::{
    classify_threshold, sequential_backward_selection, split_dataset, train_on_features, weighted_metrics,
    ComprehensionModel, Hyperparams,
};
use gazeread::linguistics::Lexicons;
use gazeread::synth::{generate_user, SynthConfig};

fn columns(rows: &[gazeread::features::LabeledSentence]) -> (Vec<[f64; FEATURE_COUNT]>, Vec<bool>) {
    (rows.iter().map(|r| r.vector.to_array()).collect(), rows.iter().map(|r| r.understood).collect())
}

fn main() -> gazeread::Result<()> {
    let lexicons = Lexicons::bundled();
    let user = generate_user("trainer", 3, &SynthConfig::default(), &lexicons)?;
    let rows = user.labeled_rows(&IvtParams::default(), DEFAULT_SNAP_RADIUS, &lexicons)?;
    let (train, test) = split_dataset(&rows, 3)?;
    let (x, y) = columns(&train);

    let hp = Hyperparams { tree_depth: 4, seed: 3, ..Hyperparams::default() };
    let selection = sequential_backward_selection(&x, &y, &hp, 5)?;
    println!("CV F1 {:.3} with all features", selection.initial_f1);
    for step in &selection.trace {
        println!("  drop {:<4} -> {:.3}", FEATURE_NAMES[step.removed], step.cv_f1);
    }
    let kept: Vec<&str> = selection.selected.iter().map(|&f| FEATURE_NAMES[f]).collect();
    println!("kept {}", kept.join(" "));

    let model = train_on_features(&x, &y, &selection.selected, &hp)?;
    let path = std::env::temp_dir().join("gazeread-example-model.json");
    model.save(&path)?;
    let model = ComprehensionModel::load(&path)?;
    let (tx, ty) = columns(&test);
    let report = weighted_metrics(&ty, &classify_threshold(&model.predict_full(&tx)?))?;
    println!(
        "held-out weighted F1 {:.3} on {} rows, {} trees saved to {}",
        report.weighted_f1,
        test.len(),
        model.trees.len(),
        path.display()
    );
    Ok(())
}
