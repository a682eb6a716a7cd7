//! Per-user comprehension classifier and its evaluation protocol.

mod gbdt;
mod metrics;
mod selection;

pub use gbdt::{
    check_training_input, log_loss, sigmoid, train_gbdt, train_on_features, train_traced,
    ComprehensionModel, Hyperparams, TreeNode, MIN_TRAINING_ROWS, MODEL_FORMAT_VERSION,
};
pub use metrics::{classify_threshold, weighted_metrics, ClassMetrics, EvalReport, DECISION_THRESHOLD};
pub use selection::{
    backward_selection, cross_validate, cv_score, derive_seed, evaluate_model, grid_search_train,
    sequential_backward_selection, split_dataset, stratified_folds, train_and_evaluate,
    CellResult, GridSearchOutcome, GridSpec, SelectionOutcome, SelectionStep, TrainingConfig,
    UserEvaluation, MIN_IMPROVEMENT,
};
