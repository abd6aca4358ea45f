//! Compiler for short linear-algebra kernel scripts.
//!
//! A script names a kernel and lists assignments built from `+`, `*`,
//! transposes (`'`) and parentheses:
//!
//! ```text
//! kernel gemver
//! B = A + u1 * v1' + u2 * v2'
//! x = b * (B' * y) + z
//! w = a * (B * x)
//! ```
//!
//! [`parse_kernel`] builds the syntax tree, [`infer`] assigns every variable a
//! kind, orientation, dimensions and intent, [`lower`] turns each statement
//! into a loop nest and [`emit_c`] prints one naive C procedure. Two
//! interpreters, one over the syntax tree and one over the loop nests, serve
//! as each other's oracle.

mod ast;
mod emit;
mod infer;
mod interp;
mod ir;
pub mod random;

use thiserror::Error;

pub use ast::{parse_kernel, BinOp, Expr, ExprKind, KernelProgram, Pos, Statement};
pub use emit::{emit_c, manifest, manifest_json, ManifestEntry, ParameterManifest};
pub use infer::{infer, Intent, Kind, Orientation, Seed, Seeds, TypedProgram, VarInfo};
pub use interp::{extents_from_bindings, interpret_ast, Bindings, Extents, Tensor};
pub use ir::{interpret_ir, lower, validate_ir, IrExpr, IrStmt, LoopIr, LoopNest};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}, column {column}: type conflict: {message}")]
    TypeConflict { line: usize, column: usize, message: String },
    #[error("cannot infer a unique type for {}; add seeds", .0.join(", "))]
    Ambiguous(Vec<String>),
    #[error("seed for unknown variable `{0}`")]
    UnknownSeedVariable(String),
    #[error("bad seed `{0}`; use scalar, vector, matrix, row, column, in, out or inout")]
    BadSeed(String),
    #[error("intent `{intent}` does not fit how `{name}` is used")]
    IntentConflict { name: String, intent: String },
    #[error("missing binding for `{0}`")]
    MissingBinding(String),
    #[error("extent mismatch for `{name}`: expected shape {expected:?}, got {found:?}")]
    ExtentMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("missing extent `{0}`")]
    MissingExtent(String),
    #[error("invalid loop program: {0}")]
    InvalidIr(String),
}

pub type Result<T, E = KernelError> = std::result::Result<T, E>;
