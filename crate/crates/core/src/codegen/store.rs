use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::engine::placeholders;
use super::{CodegenError, Language, Result};

/// Every placeholder a template may use, with the rule that binds it.
pub const PLACEHOLDERS: &[(&str, &str)] = &[
    ("routine_name", "routine name as listed in the taxonomy, e.g. DGBSV"),
    ("description", "one-line description of the routine or program"),
    ("category", "category of the template base"),
    ("program_name", "lowercased routine name followed by `_driver`, or the PETSc program name"),
    ("precision_kind", "Fortran kind expression for the routine precision"),
    ("param_decls", "one declaration line per parameter, in parameter order"),
    ("scalar_inits", "assignments of suggested values to scalar inputs, dependencies first"),
    ("allocations", "one allocation per array parameter, after all scalar inputs are set"),
    ("array_inits", "fill loops for input arrays: diagonally dominant matrices, right-hand sides of ones"),
    ("call_args", "parameters in call order, passed by reference in C, with hidden character lengths last"),
    ("symbol", "external symbol of the Fortran routine as seen from C"),
    ("prototype", "C prototype parameter list of the external routine"),
    ("matrix_dims", "`NAME = value` pairs of the integer inputs that size arrays"),
    ("params", "block over parameters; items bind `name`, `kind`, `intent` and `summary`"),
    ("name", "parameter name inside `params`"),
    ("kind", "parameter kind inside `params`"),
    ("intent", "parameter intent inside `params`"),
    ("summary", "first sentence of the parameter description inside `params`"),
    ("files", "block over bundle files; items bind `path` and `role`"),
    ("path", "bundle-relative file path inside `files`"),
    ("role", "what the file is for, inside `files`"),
    ("source_file", "file name of the generated program source"),
    ("compile_hint", "which installation variables the makefile needs"),
    ("conf_includes", "makefile include lines of the PETSc or SLEPc build configuration"),
    ("link_libs", "libraries the program links against"),
    ("options_file", "file name of the options file"),
    ("run_command", "command line that runs the program with the options file"),
    ("bundle_title", "heading of the README"),
    ("usage", "paragraph explaining what the program does and how to read its output"),
];

fn documented(name: &str) -> bool {
    PLACEHOLDERS.iter().any(|(n, _)| *n == name)
}

/// A template base for one category of routines in one language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TemplateBase {
    pub id: String,
    pub language: Language,
    pub category: String,
    pub body: String,
}

/// Template bases plus the makefile and README templates they ship with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateStore {
    bases: Vec<TemplateBase>,
    support: BTreeMap<String, String>,
}

const BUNDLED: &[(&str, &str)] = &[
    ("lapack/linear_solve.f90", include_str!("../../templates/lapack/linear_solve.f90.tmpl")),
    ("lapack/linear_solve.c", include_str!("../../templates/lapack/linear_solve.c.tmpl")),
    ("lapack/linear_solve_expert.f90", include_str!("../../templates/lapack/linear_solve_expert.f90.tmpl")),
    ("lapack/linear_solve_expert.c", include_str!("../../templates/lapack/linear_solve_expert.c.tmpl")),
    ("lapack/equilibrate.f90", include_str!("../../templates/lapack/equilibrate.f90.tmpl")),
    ("lapack/equilibrate.c", include_str!("../../templates/lapack/equilibrate.c.tmpl")),
    ("lapack/makefile.f90", include_str!("../../templates/lapack/makefile.f90.tmpl")),
    ("lapack/makefile.c", include_str!("../../templates/lapack/makefile.c.tmpl")),
    ("lapack/README", include_str!("../../templates/lapack/README.tmpl")),
    ("petsc/petsc_properties.c", include_str!("../../templates/petsc/petsc_properties.c.tmpl")),
    ("petsc/petsc_solver.c", include_str!("../../templates/petsc/petsc_solver.c.tmpl")),
    ("petsc/slepc_eigensolver.c", include_str!("../../templates/petsc/slepc_eigensolver.c.tmpl")),
    ("petsc/makefile", include_str!("../../templates/petsc/makefile.tmpl")),
    ("petsc/README", include_str!("../../templates/petsc/README.tmpl")),
];

impl TemplateStore {
    /// Templates compiled into the crate.
    pub fn bundled() -> Self {
        Self::from_entries(BUNDLED.iter().map(|(id, body)| (id.to_string(), body.to_string())))
            .expect("bundled templates are valid")
    }

    /// Loads `<dir>/<library>/<name>.tmpl` files, for editing templates
    /// without rebuilding.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for lib in fs::read_dir(dir)? {
            let lib = lib?;
            if !lib.file_type()?.is_dir() {
                continue;
            }
            for file in fs::read_dir(lib.path())? {
                let path = file?.path();
                let Some(stem) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(".tmpl")) else {
                    continue;
                };
                let id = format!("{}/{stem}", lib.file_name().to_string_lossy());
                entries.push((id, fs::read_to_string(&path)?));
            }
        }
        entries.sort();
        Self::from_entries(entries)
    }

    /// Builds a store from `(id, body)` pairs. Ids of the form
    /// `<library>/<category>.<f90|c>` are template bases; `makefile` and
    /// `README` ids are support templates.
    pub fn from_entries(entries: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut bases = Vec::new();
        let mut support = BTreeMap::new();
        for (id, body) in entries {
            for p in placeholders(&id, &body)? {
                if !documented(&p) {
                    return Err(CodegenError::Undocumented { template: id, placeholder: p });
                }
            }
            let file = id.rsplit('/').next().unwrap_or(&id);
            let base = file
                .rsplit_once('.')
                .filter(|(stem, _)| !stem.starts_with("makefile"))
                .and_then(|(stem, ext)| Language::ALL.into_iter().find(|l| l.extension() == ext).map(|l| (stem, l)));
            match base {
                Some((stem, language)) => {
                    bases.push(TemplateBase { id: id.clone(), language, category: stem.to_string(), body })
                }
                None => {
                    support.insert(id, body);
                }
            }
        }
        Ok(Self { bases, support })
    }

    pub fn bases(&self) -> &[TemplateBase] {
        &self.bases
    }

    pub fn base(&self, category: &str, language: Language) -> Result<&TemplateBase> {
        self.bases
            .iter()
            .find(|b| b.category == category && b.language == language)
            .ok_or_else(|| CodegenError::NoTemplate { category: category.to_string(), language })
    }

    pub fn support(&self, id: &str) -> Result<&str> {
        self.support.get(id).map(String::as_str).ok_or_else(|| CodegenError::MissingSupport(id.to_string()))
    }

    /// All templates as `(id, body)` pairs.
    pub fn all(&self) -> impl Iterator<Item = (&str, &str)> {
        self.bases
            .iter()
            .map(|b| (b.id.as_str(), b.body.as_str()))
            .chain(self.support.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }
}
