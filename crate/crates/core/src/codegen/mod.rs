//! Code bundles built from template base files.
//!
//! A routine driver is rendered from the template base for its category and
//! target language, then packaged with a makefile and a README. PETSc and
//! SLEPc bundles add a command-line options file. Bundles zip into archives
//! whose bytes depend only on the bundle contents.

mod archive;
mod backend;
mod bundle;
pub mod engine;
pub mod lint;
mod store;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::TaxonomyError;

pub use archive::{package_archive, unpack_archive};
pub use backend::{
    analyze_routine, render_routine_template, BackendRegistry, CBackend, DiagRow, DriverPlan, Fill, Fortran90Backend,
    LanguageBackend,
};
pub use bundle::{
    generate_solver_bundle, generate_solver_bundle_with, routine_bundle, routine_bundle_with, Bundle, BundleFile,
    BundleKind, ManifestEntry,
};
pub use store::{TemplateBase, TemplateStore, PLACEHOLDERS};

#[derive(Debug, Error)]
pub enum CodegenError {
    #[error("no template for category `{category}` in {language}")]
    NoTemplate { category: String, language: Language },
    #[error("missing support template `{0}`")]
    MissingSupport(String),
    #[error("template `{template}` uses `{{{{{placeholder}}}}}` with no binding")]
    Unbound { template: String, placeholder: String },
    #[error("template `{template}` uses undocumented placeholder `{placeholder}`")]
    Undocumented { template: String, placeholder: String },
    #[error("template `{template}` line {line}: {message}")]
    TemplateSyntax { template: String, line: usize, message: String },
    #[error("output of template `{0}` still contains `{{{{`")]
    Unresolved(String),
    #[error("unknown target language `{0}`; expected `fortran90` or `c`")]
    UnknownLanguage(String),
    #[error("unknown bundle kind `{0}`")]
    UnknownKind(String),
    #[error("a recommended-solver bundle needs a recommendation")]
    MissingRecommendation,
    #[error("only a recommended-solver bundle takes a recommendation")]
    UnexpectedRecommendation,
    #[error("unknown solver method `{0}`")]
    UnknownMethod(String),
    #[error("parameter values of {0} depend on each other in a cycle")]
    CyclicValues(String),
    #[error("empty bundle")]
    EmptyBundle,
    #[error("bad bundle path `{0}`")]
    BadPath(String),
    #[error("duplicate bundle path `{0}`")]
    DuplicatePath(String),
    #[error("{path}: {message}")]
    Lint { path: String, message: String },
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Zip(#[from] zip::result::ZipError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CodegenError> = std::result::Result<T, E>;

/// Target language of a template base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Fortran90,
    C,
}

impl Language {
    pub const ALL: [Language; 2] = [Language::Fortran90, Language::C];

    pub fn as_str(self) -> &'static str {
        match self {
            Language::Fortran90 => "fortran90",
            Language::C => "c",
        }
    }

    /// Source file extension, also used in template file names.
    pub fn extension(self) -> &'static str {
        match self {
            Language::Fortran90 => "f90",
            Language::C => "c",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = CodegenError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fortran90" | "fortran" | "f90" => Ok(Language::Fortran90),
            "c" => Ok(Language::C),
            _ => Err(CodegenError::UnknownLanguage(s.to_string())),
        }
    }
}
