//! Solver selection from benchmark data.
//!
//! Benchmark runs are reduced to one [`LabeledInstance`] per problem (the
//! fastest eligible configuration and every configuration within a time
//! ratio of it). PCA ranks candidate features, decision trees are induced on
//! the labels, and k-fold cross-validation measures how often the true best
//! configuration is among the predicted ones.

mod classifier;
mod config;
mod cv;
mod labels;
mod pca;
mod runs;
pub mod synth;
mod tree;

use thiserror::Error;

pub use classifier::{Classifier, DecisionTreeTrainer, MajorityTrainer, Prediction, Trainer, TrainerRegistry};
pub use config::{ProblemKind, SolverConfig, EIGEN_METHODS, LINEAR_METHODS, PRECONDITIONERS};
pub use cv::{accuracy, cross_validate, cross_validate_folds, stratified_folds, CvReport, Scoring};
pub use labels::{derive_labels, is_eligible, LabelReport, LabeledInstance, DEFAULT_TIME_RATIO};
pub use pca::{fit_pca, select_features, PcaResult};
pub use runs::{read_runs, write_runs, RequestSpec, RunRecord, Spectrum, RUN_COLUMNS};
pub use tree::{
    export_model, induce_tree, induce_tree_with, lookup_exported, ClassifierModel, CriterionRegistry, Entropy, Gini,
    SplitCriterion, Target, TreeNode, TreeParams, MODEL_FORMAT_VERSION,
};

#[derive(Debug, Error)]
pub enum MlError {
    #[error("unknown solver method `{0}`")]
    UnknownMethod(String),
    #[error("unknown preconditioner `{0}`")]
    UnknownPreconditioner(String),
    #[error("malformed solver label `{0}`")]
    BadLabel(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("bad value `{value}` in column `{column}`")]
    BadValue { column: String, value: String },
    #[error("line {line}: {source}")]
    Line { line: usize, source: Box<MlError> },
    #[error("time ratio must be a finite number >= 1, got {0}")]
    InvalidRatio(f64),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("missing feature `{0}`")]
    MissingFeature(String),
    #[error("non-finite value of feature `{feature}` in {problem}")]
    NonFinite { feature: String, problem: String },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("row {row} has {found} values, expected {expected}")]
    RowWidth { row: usize, expected: usize, found: usize },
    #[error("every feature is constant")]
    ConstantData,
    #[error("cannot select {k} features out of {available}")]
    InvalidK { k: usize, available: usize },
    #[error("cannot make {k} folds from {n} instances")]
    BadFolds { k: usize, n: usize },
    #[error("unknown split criterion `{0}`")]
    UnknownCriterion(String),
    #[error("unknown trainer `{0}`")]
    UnknownTrainer(String),
    #[error("unsupported model format version {0}")]
    ModelVersion(u32),
    #[error("invalid model: {0}")]
    BadModel(String),
    #[error("no exported row matches the features")]
    NoMatchingRow,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = MlError> = std::result::Result<T, E>;
