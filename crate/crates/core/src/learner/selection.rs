//! Data splitting, stratified cross-validation, sequential backward feature
//! selection and the hyperparameter grid search.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{LabeledSentence, FEATURE_COUNT};

use super::gbdt::{train_on_features, ComprehensionModel, Hyperparams};
use super::metrics::{classify_threshold, weighted_metrics, EvalReport};

/// Required CV gain for removing a feature.
pub const MIN_IMPROVEMENT: f64 = 0.01;

pub const TRAIN_FRACTION_TENTHS: usize = 7;

/// SplitMix64 step; derives independent seeds for parallel work items.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn class_indices(y: &[bool]) -> [Vec<usize>; 2] {
    let mut classes = [Vec::new(), Vec::new()];
    for (i, &v) in y.iter().enumerate() {
        classes[usize::from(v)].push(i);
    }
    classes
}

/// Stratified seeded 70/30 split. Each class contributes
/// round(0.7 * class size) rows to training. Both parts keep input order.
pub fn split_dataset(
    rows: &[LabeledSentence],
    seed: u64,
) -> Result<(Vec<LabeledSentence>, Vec<LabeledSentence>)> {
    if rows.len() < 10 {
        return Err(Error::InsufficientData(format!("{} rows, need at least 10", rows.len())));
    }
    let y: Vec<bool> = rows.iter().map(|r| r.understood).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; rows.len()];
    for mut members in class_indices(&y) {
        if members.len() < 2 {
            return Err(Error::DegenerateLabels(format!(
                "a class has {} rows; each class needs at least 2 to split",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n_train = (members.len() * TRAIN_FRACTION_TENTHS + 5) / 10;
        for &i in &members[..n_train] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<_>, Vec<_>) = rows.iter().cloned().zip(in_train).partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(r, _)| r).collect(),
        test.into_iter().map(|(r, _)| r).collect(),
    ))
}

/// Held-out row indices per fold, each fold drawing from both classes.
pub fn stratified_folds(y: &[bool], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParam {
            name: "k",
            reason: "need at least 2 folds".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for mut members in class_indices(y) {
        if members.len() < k {
            return Err(Error::InsufficientData(format!(
                "class with {} rows cannot be stratified into {k} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (j, i) in members.into_iter().enumerate() {
            folds[(j + offset) % k].push(i);
        }
        offset += 1;
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Mean held-out weighted F1 over precomputed folds.
pub fn cv_score<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    y: &[bool],
    features: &[usize],
    hp: &Hyperparams,
    folds: &[Vec<usize>],
) -> Result<f64> {
    Ok(cv_score_above(rows, y, features, hp, folds, f64::NEG_INFINITY)?.expect("no cutoff"))
}

/// Like [`cv_score`], but gives up with `None` as soon as the mean cannot
/// reach `cutoff` even if every remaining fold scored 1.
fn cv_score_above<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    y: &[bool],
    features: &[usize],
    hp: &Hyperparams,
    folds: &[Vec<usize>],
    cutoff: f64,
) -> Result<Option<f64>> {
    let mut held_out = vec![usize::MAX; rows.len()];
    for (fi, fold) in folds.iter().enumerate() {
        for &i in fold {
            held_out[i] = fi;
        }
    }
    let k = folds.len() as f64;
    let mut scores = Vec::with_capacity(folds.len());
    for (fi, fold) in folds.iter().enumerate() {
        let done: f64 = scores.iter().sum();
        if (done + (folds.len() - fi) as f64) / k < cutoff {
            return Ok(None);
        }
        let train_idx: Vec<usize> = (0..rows.len()).filter(|&i| held_out[i] != fi).collect();
        let train_rows: Vec<&[f64]> = train_idx.iter().map(|&i| rows[i].as_ref()).collect();
        let train_y: Vec<bool> = train_idx.iter().map(|&i| y[i]).collect();
        let fold_hp = Hyperparams {
            seed: derive_seed(hp.seed, fi as u64),
            ..*hp
        };
        let model = train_on_features(&train_rows, &train_y, features, &fold_hp)?;
        let test_rows: Vec<&[f64]> = fold.iter().map(|&i| rows[i].as_ref()).collect();
        let test_y: Vec<bool> = fold.iter().map(|&i| y[i]).collect();
        let predicted = classify_threshold(&model.predict_full(&test_rows)?);
        scores.push(weighted_metrics(&test_y, &predicted)?.weighted_f1);
    }
    let mean = scores.iter().sum::<f64>() / k;
    Ok((mean >= cutoff).then_some(mean))
}

/// Stratified k-fold CV over all columns, folds seeded by `hp.seed`.
pub fn cross_validate<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    y: &[bool],
    hp: &Hyperparams,
    k: usize,
) -> Result<f64> {
    let width = rows.first().map_or(0, |r| r.as_ref().len());
    let features: Vec<usize> = (0..width).collect();
    let folds = stratified_folds(y, k, hp.seed)?;
    cv_score(rows, y, &features, hp, &folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub removed: usize,
    pub cv_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub selected: Vec<usize>,
    /// CV F1 with every starting feature.
    pub initial_f1: f64,
    /// CV F1 of the surviving set.
    pub final_f1: f64,
    pub trace: Vec<SelectionStep>,
}

/// Greedy backward elimination. Each step drops the feature whose removal
/// gives the best CV F1, as long as that beats the current F1 by at least
/// `min_improvement`. Equal candidates resolve to the lower feature index.
pub fn backward_selection<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    y: &[bool],
    start: &[usize],
    hp: &Hyperparams,
    folds: &[Vec<usize>],
    min_improvement: f64,
) -> Result<SelectionOutcome> {
    if start.len() < 2 {
        return Err(Error::InvalidParam {
            name: "features",
            reason: "backward selection needs at least 2 features".into(),
        });
    }
    let mut selected = start.to_vec();
    let initial_f1 = cv_score(rows, y, &selected, hp, folds)?;
    let mut current = initial_f1;
    let mut trace = Vec::new();
    while selected.len() > 1 {
        let candidates = (0..selected.len())
            .into_par_iter()
            .map(|drop| {
                let subset: Vec<usize> = selected
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != drop)
                    .map(|(_, &f)| f)
                    .collect();
                // Candidates that cannot reach the stopping margin never
                // change the outcome, so their CV may stop early.
                cv_score_above(rows, y, &subset, hp, folds, current + min_improvement)
                    .map(|f1| f1.map(|f1| (drop, f1)))
            })
            .collect::<Result<Vec<_>>>()?;
        let Some((drop, best)) = candidates
            .into_iter()
            .flatten()
            .fold(None, |acc: Option<(usize, f64)>, (i, f1)| match acc {
                Some((bi, bf)) if bf > f1 || (bf == f1 && selected[bi] < selected[i]) => Some((bi, bf)),
                _ => Some((i, f1)),
            })
        else {
            break;
        };
        let removed = selected.remove(drop);
        trace.push(SelectionStep { removed, cv_f1: best });
        current = best;
    }
    Ok(SelectionOutcome {
        selected,
        initial_f1,
        final_f1: current,
        trace,
    })
}

/// Backward selection from every column with `k` stratified folds seeded by
/// `hp.seed`.
pub fn sequential_backward_selection<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    y: &[bool],
    hp: &Hyperparams,
    k: usize,
) -> Result<SelectionOutcome> {
    let width = rows.first().map_or(0, |r| r.as_ref().len());
    let features: Vec<usize> = (0..width).collect();
    let folds = stratified_folds(y, k, hp.seed)?;
    backward_selection(rows, y, &features, hp, &folds, MIN_IMPROVEMENT)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub tree_depths: Vec<usize>,
    pub l2_leaf_regs: Vec<f64>,
    pub bagging_temperatures: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            tree_depths: vec![4, 6, 8, 10],
            l2_leaf_regs: vec![1.0, 3.0, 5.0, 7.0],
            bagging_temperatures: vec![0.2, 0.5, 1.0],
        }
    }
}

impl GridSpec {
    /// Cells ordered by depth, then l2, then temperature. Seeds are derived
    /// from `seed` and the cell index.
    pub fn cells(&self, n_trees: usize, learning_rate: f64, seed: u64) -> Vec<Hyperparams> {
        let mut cells = Vec::new();
        for &tree_depth in &self.tree_depths {
            for &l2_leaf_reg in &self.l2_leaf_regs {
                for &bagging_temperature in &self.bagging_temperatures {
                    cells.push(Hyperparams {
                        tree_depth,
                        l2_leaf_reg,
                        bagging_temperature,
                        n_trees,
                        learning_rate,
                        seed: derive_seed(seed, cells.len() as u64),
                    });
                }
            }
        }
        cells
    }

    pub fn len(&self) -> usize {
        self.tree_depths.len() * self.l2_leaf_regs.len() * self.bagging_temperatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub grid: GridSpec,
    pub folds: usize,
    pub n_trees: usize,
    pub learning_rate: f64,
    /// Run backward selection inside every grid cell.
    pub feature_selection: bool,
    pub min_improvement: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            grid: GridSpec::default(),
            folds: 5,
            n_trees: 200,
            learning_rate: 0.1,
            feature_selection: true,
            min_improvement: MIN_IMPROVEMENT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub hyperparams: Hyperparams,
    pub selection: SelectionOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    pub model: ComprehensionModel,
    pub best_cell: usize,
    pub cells: Vec<CellResult>,
}

impl GridSearchOutcome {
    pub fn best(&self) -> &CellResult {
        &self.cells[self.best_cell]
    }
}

/// Runs selection + CV in every grid cell (in parallel), keeps the cell with
/// the highest CV F1 (earliest cell on ties) and refits it on all rows.
pub fn grid_search_train<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    y: &[bool],
    config: &TrainingConfig,
    seed: u64,
) -> Result<GridSearchOutcome> {
    if config.grid.is_empty() {
        return Err(Error::InvalidParam {
            name: "grid",
            reason: "empty hyperparameter grid".into(),
        });
    }
    let width = rows.first().map_or(0, |r| r.as_ref().len());
    let all: Vec<usize> = (0..width).collect();
    let folds = stratified_folds(y, config.folds, derive_seed(seed, u64::MAX))?;
    let cells = config
        .grid
        .cells(config.n_trees, config.learning_rate, seed)
        .into_par_iter()
        .map(|hp| {
            let selection = if config.feature_selection && all.len() >= 2 {
                backward_selection(rows, y, &all, &hp, &folds, config.min_improvement)?
            } else {
                let f1 = cv_score(rows, y, &all, &hp, &folds)?;
                SelectionOutcome {
                    selected: all.clone(),
                    initial_f1: f1,
                    final_f1: f1,
                    trace: Vec::new(),
                }
            };
            Ok(CellResult {
                hyperparams: hp,
                selection,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best_cell = 0;
    for (i, c) in cells.iter().enumerate().skip(1) {
        if c.selection.final_f1 > cells[best_cell].selection.final_f1 {
            best_cell = i;
        }
    }
    let best = &cells[best_cell];
    let model = train_on_features(rows, y, &best.selection.selected, &best.hyperparams)?;
    Ok(GridSearchOutcome {
        model,
        best_cell,
        cells,
    })
}

pub fn evaluate_model(
    model: &ComprehensionModel,
    rows: &[LabeledSentence],
) -> Result<EvalReport> {
    let x: Vec<[f64; FEATURE_COUNT]> = rows.iter().map(|r| r.vector.to_array()).collect();
    let y: Vec<bool> = rows.iter().map(|r| r.understood).collect();
    let predicted = classify_threshold(&model.predict_full(&x)?);
    let mut report = weighted_metrics(&y, &predicted)?;
    report.selected_feature_indices = model.selected_features.clone();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserEvaluation {
    pub report: EvalReport,
    pub train_rows: usize,
    pub test_rows: usize,
    pub search: GridSearchOutcome,
}

/// 70/30 stratified split, grid search with selection on the training part,
/// evaluation on the held-out part.
pub fn train_and_evaluate(
    rows: &[LabeledSentence],
    seed: u64,
    config: &TrainingConfig,
) -> Result<UserEvaluation> {
    let (train, test) = split_dataset(rows, seed)?;
    let x: Vec<[f64; FEATURE_COUNT]> = train.iter().map(|r| r.vector.to_array()).collect();
    let y: Vec<bool> = train.iter().map(|r| r.understood).collect();
    let search = grid_search_train(&x, &y, config, seed)?;
    let report = evaluate_model(&search.model, &test)?;
    Ok(UserEvaluation {
        report,
        train_rows: train.len(),
        test_rows: test.len(),
        search,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;

    fn labeled(n: usize, positives: usize) -> Vec<LabeledSentence> {
        (0..n)
            .map(|i| LabeledSentence {
                sentence_index: i,
                vector: FeatureVector::default(),
                understood: i < positives,
            })
            .collect()
    }

    #[test]
    fn stratified_split_arithmetic() {
        let rows = labeled(100, 30);
        let (train, test) = split_dataset(&rows, 3).unwrap();
        assert_eq!(train.len(), 70);
        assert_eq!(test.len(), 30);
        assert_eq!(train.iter().filter(|r| r.understood).count(), 21);
        assert_eq!(test.iter().filter(|r| r.understood).count(), 9);
        let again = split_dataset(&rows, 3).unwrap();
        assert_eq!(again.0, train);
        let other = split_dataset(&rows, 4).unwrap();
        assert_ne!(other.0, train);
    }

    #[test]
    fn split_rejects_degenerate_classes() {
        assert!(split_dataset(&labeled(20, 1), 0).is_err());
        assert!(split_dataset(&labeled(20, 20), 0).is_err());
        assert!(split_dataset(&labeled(9, 4), 0).is_err());
    }

    #[test]
    fn two_balanced_folds() {
        let y: Vec<bool> = (0..20).map(|i| i % 2 == 0).collect();
        let folds = stratified_folds(&y, 2, 11).unwrap();
        assert_eq!(folds.len(), 2);
        for f in &folds {
            assert_eq!(f.len(), 10);
            assert_eq!(f.iter().filter(|&&i| y[i]).count(), 5);
        }
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
        assert!(stratified_folds(&y, 11, 0).is_err());
        assert!(stratified_folds(&y, 1, 0).is_err());
    }

    #[test]
    fn grid_has_48_cells_inside_the_declared_values() {
        let grid = GridSpec::default();
        let cells = grid.cells(200, 0.1, 5);
        assert_eq!(cells.len(), 48);
        assert_eq!(grid.len(), 48);
        for c in &cells {
            assert!([4, 6, 8, 10].contains(&c.tree_depth));
            assert!([1.0, 3.0, 5.0, 7.0].contains(&c.l2_leaf_reg));
            assert!([0.2, 0.5, 1.0].contains(&c.bagging_temperature));
        }
        let seeds: std::collections::HashSet<u64> = cells.iter().map(|c| c.seed).collect();
        assert_eq!(seeds.len(), 48);
    }

    #[test]
    fn learnable_duplicated_data_scores_near_one() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 2) as f64, ((i / 2) % 3) as f64]).collect();
        let y: Vec<bool> = rows.iter().map(|r| r[0] == 1.0).collect();
        let hp = Hyperparams {
            tree_depth: 2,
            n_trees: 30,
            bagging_temperature: 0.0,
            ..Hyperparams::default()
        };
        let f1 = cross_validate(&rows, &y, &hp, 5).unwrap();
        assert!((f1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn selection_stops_immediately_when_nothing_helps() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 2) as f64, (i % 2) as f64 * 2.0]).collect();
        let y: Vec<bool> = rows.iter().map(|r| r[0] == 1.0).collect();
        let hp = Hyperparams {
            tree_depth: 2,
            n_trees: 20,
            bagging_temperature: 0.0,
            ..Hyperparams::default()
        };
        let out = sequential_backward_selection(&rows, &y, &hp, 3).unwrap();
        // Perfect CV with both features: no removal can gain 0.01.
        assert_eq!(out.selected, vec![0, 1]);
        assert!(out.trace.is_empty());
        assert_eq!(out.final_f1, out.initial_f1);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(9, 4), derive_seed(9, 4));
    }
}
