//! Sparse matrices and the matrix properties used for solver selection.
//!
//! Matrices come in as Matrix Market coordinate files (real or integer
//! values, general or symmetric) and are assembled into compressed-row form.
//! Features are computed by a [`FeatureRegistry`] of named
//! [`MatrixFeature`] implementations so they can be timed one at a time.

mod features;
mod market;
mod sparse;

use thiserror::Error;

pub use features::{
    compute_extended_features, compute_features, measure_features, ExtendedFeatureVector, FeatureContext,
    FeatureRegistry, FeatureTiming, FeatureVector, FnFeature, MatrixFeature, EXTENDED_NAMES, TABLE1_NAMES,
};
pub use market::{parse_matrix_market, read_matrix_market_file, write_matrix_market};
pub use sparse::{SparseMatrix, Symmetry};

#[derive(Debug, Error)]
pub enum MatfeatError {
    #[error("missing %%MatrixMarket header")]
    MissingHeader,
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("line {line}: malformed size line")]
    BadSizeLine { line: usize },
    #[error("line {line}: non-numeric value `{token}`")]
    NonNumeric { line: usize, token: String },
    #[error("line {line}: expected `row col value`")]
    BadEntry { line: usize },
    #[error("entry ({row}, {col}) out of range for a {n_rows}x{n_cols} matrix")]
    IndexOutOfRange { row: usize, col: usize, n_rows: usize, n_cols: usize },
    #[error("expected {expected} entries, found {found}")]
    EntryCount { expected: usize, found: usize },
    #[error("matrix dimensions must be positive")]
    EmptyDimensions,
    #[error("feature requires a square matrix, got {n_rows}x{n_cols}")]
    NonSquare { n_rows: usize, n_cols: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = MatfeatError> = std::result::Result<T, E>;
