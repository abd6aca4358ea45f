//! Core building blocks for a numerical-software advisor.
//!
//! * [`taxonomy`] holds the routine ontology and the question trees behind
//!   guided search.
//! * [`matfeat`] reads Matrix Market files and computes structural and norm
//!   features of sparse matrices.
//! * [`mlselect`] turns solver benchmark runs into labeled data and learns
//!   decision-tree classifiers that recommend solver configurations.
//! * [`textsearch`] is the keyword index with autocompletion and spelling
//!   correction.
//! * [`codegen`] renders buildable code bundles from template bases.
//! * [`kernelc`] compiles short linear-algebra scripts into naive C kernels.

pub mod codegen;
pub mod kernelc;
pub mod matfeat;
pub mod mlselect;
pub mod taxonomy;
pub mod textsearch;

/// Bundled data files shipped with the crate.
pub mod data {
    /// Full LAPACK linear-solver taxonomy (drivers, expert drivers, equilibration).
    pub const LAPACK_TAXONOMY: &str = include_str!("../data/lapack_taxonomy.json");
    /// Twelve-routine subset used by tests and examples.
    pub const LAPACK_TAXONOMY_SMALL: &str = include_str!("../data/lapack_taxonomy_small.json");
    /// Linear algebra vocabulary, one term or phrase per line.
    pub const VOCABULARY: &str = include_str!("../data/vocabulary.txt");
    /// Synthetic sequential PETSc benchmark corpus.
    pub const PETSC_SEQ_RUNS: &str = include_str!("../data/petsc_seq_runs.csv");
    /// Synthetic parallel PETSc benchmark corpus.
    pub const PETSC_PAR_RUNS: &str = include_str!("../data/petsc_par_runs.csv");
    /// Small hand-written eigensolver corpus.
    pub const SLEPC_RUNS: &str = include_str!("../data/slepc_runs.csv");
}
