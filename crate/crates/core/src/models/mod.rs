//! The classifier catalog, the kernel SVM, and per-fold model selection.

mod catalog;
mod input;
mod kernel;
mod select;
mod svm;

pub use catalog::{build_architecture, build_architecture_with, ArchName, Family, DROPOUT_RATE};
pub use input::{reshape_for_lstm, ModelInput, LSTM_STEPS};
pub use kernel::{kernel_eval, Kernel, KernelKind};
pub use select::{
    class_from_margin, class_from_probability, predict, predict_batch, select_best_network, select_max_score,
    select_min_loss, select_network, svm_grid, svm_grid_search, Candidate, Criterion, Prediction, SelectionLog,
    SelectionResult, SvmSelection, TrainedModel, C_GRID, GAMMA_GRID, NETWORK_RUNS,
};
pub use svm::{dual_objective, svm_train, Standardizer, SvmConfig, SvmModel};
