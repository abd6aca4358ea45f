use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::backend::{analyze_routine, render_routine_with, routine_context};
use super::engine::{item, render, Context};
use super::{BackendRegistry, CodegenError, Language, Result, TemplateStore};
use crate::mlselect::{ProblemKind, SolverConfig};
use crate::taxonomy::{RoutineRecord, Taxonomy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleFile {
    pub path: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub size: usize,
}

/// Files of a downloadable bundle, in archive order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    files: Vec<BundleFile>,
}

fn valid_path(path: &str) -> bool {
    !path.is_empty()
        && !path.starts_with('/')
        && !path.contains('\\')
        && !path.contains(':')
        && path.split('/').all(|part| !part.is_empty() && part != "." && part != "..")
}

impl Bundle {
    /// Checks that the bundle is nonempty and its paths are relative,
    /// traversal-free and distinct.
    pub fn new(files: Vec<BundleFile>) -> Result<Self> {
        if files.is_empty() {
            return Err(CodegenError::EmptyBundle);
        }
        for (i, f) in files.iter().enumerate() {
            if !valid_path(&f.path) {
                return Err(CodegenError::BadPath(f.path.clone()));
            }
            if files[..i].iter().any(|g| g.path == f.path) {
                return Err(CodegenError::DuplicatePath(f.path.clone()));
            }
        }
        Ok(Self { files })
    }

    pub fn files(&self) -> &[BundleFile] {
        &self.files
    }

    pub fn file(&self, path: &str) -> Option<&BundleFile> {
        self.files.iter().find(|f| f.path == path)
    }

    pub fn text(&self, path: &str) -> Option<&str> {
        self.file(path).and_then(|f| std::str::from_utf8(&f.bytes).ok())
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        self.files.iter().map(|f| ManifestEntry { path: f.path.clone(), size: f.bytes.len() }).collect()
    }

    pub fn paths(&self) -> Vec<&str> {
        self.files.iter().map(|f| f.path.as_str()).collect()
    }

    /// Path of the program source (`.f90` or `.c`).
    pub fn source_path(&self) -> Option<&str> {
        self.paths().into_iter().find(|p| p.ends_with(".f90") || p.ends_with(".c"))
    }

    /// True when the bundle has a program source, a makefile and a README.
    pub fn is_complete(&self) -> bool {
        let paths = self.paths();
        self.source_path().is_some()
            && paths.iter().any(|p| p.eq_ignore_ascii_case("makefile"))
            && paths.contains(&"README")
    }

    /// Paths listed under the README's `Files` heading.
    pub fn readme_listing(&self) -> Vec<String> {
        let Some(text) = self.text("README") else {
            return Vec::new();
        };
        text.lines()
            .skip_while(|l| *l != "Files")
            .skip(1)
            .take_while(|l| l.starts_with("- "))
            .filter_map(|l| l[2..].split_once(':').map(|(p, _)| p.to_string()))
            .collect()
    }
}

/// What a PETSc bundle is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundleKind {
    /// Program that computes matrix properties for a later recommendation.
    PropertiesProgram,
    /// Solver program with no method suggestion.
    DefaultSolver,
    /// Solver program whose options encode a recommended configuration.
    RecommendedSolver,
}

impl BundleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BundleKind::PropertiesProgram => "properties_program",
            BundleKind::DefaultSolver => "default_solver",
            BundleKind::RecommendedSolver => "recommended_solver",
        }
    }
}

impl fmt::Display for BundleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BundleKind {
    type Err = CodegenError;

    fn from_str(s: &str) -> Result<Self> {
        [BundleKind::PropertiesProgram, BundleKind::DefaultSolver, BundleKind::RecommendedSolver]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| CodegenError::UnknownKind(s.to_string()))
    }
}

fn text_file(path: &str, text: String) -> BundleFile {
    BundleFile { path: path.to_string(), bytes: text.into_bytes() }
}

fn files_list(entries: &[(&str, &str)]) -> Vec<super::engine::Item> {
    entries.iter().map(|(p, r)| item([("path", p.to_string()), ("role", r.to_string())])).collect()
}

/// Driver, makefile and README for one routine, from the given templates.
pub fn routine_bundle_with(
    store: &TemplateStore,
    backends: &BackendRegistry,
    routine: &RoutineRecord,
    language: Language,
) -> Result<Bundle> {
    let source = render_routine_with(store, backends, routine, language)?;
    let plan = analyze_routine(routine)?;
    let backend = backends
        .get(language)
        .ok_or_else(|| CodegenError::NoTemplate { category: routine.problem_class.clone(), language })?;
    let source_file = format!("{}.{}", plan.program_name, language.extension());

    let mut ctx = routine_context(&plan, backend, &routine.problem_class);
    ctx.set("source_file", source_file.clone());
    let makefile_id = format!("lapack/makefile.{}", language.extension());
    let makefile = render(&makefile_id, store.support(&makefile_id)?, &ctx)?;

    let lang_name = match language {
        Language::Fortran90 => "Fortran 90",
        Language::C => "C",
    };
    ctx.set("bundle_title", format!("{} driver ({lang_name})", routine.name))
        .set(
            "usage",
            format!(
                "A complete program that declares and initializes every argument of {} and calls it.\n{}",
                routine.name, routine.description
            ),
        )
        .set_list(
            "files",
            files_list(&[(&source_file, "driver program"), ("Makefile", "portable makefile"), ("README", "this file")]),
        );
    let readme = render("lapack/README", store.support("lapack/README")?, &ctx)?;

    Bundle::new(vec![text_file(&source_file, source), text_file("Makefile", makefile), text_file("README", readme)])
}

/// Driver bundle for a routine from the bundled templates.
pub fn routine_bundle(taxonomy: &Taxonomy, routine_id: &str, language: Language) -> Result<Bundle> {
    let routine = taxonomy.routine(routine_id)?;
    routine_bundle_with(&TemplateStore::bundled(), &BackendRegistry::standard(), routine, language)
}

const OPTIONS_FILE: &str = "petsc_options.txt";
const OPTIONS_HEADER: &str = "# PETSc options, one per line";

/// PETSc or SLEPc program with makefile, options file and README.
pub fn generate_solver_bundle(
    kind: BundleKind,
    recommendation: Option<&SolverConfig>,
    parallel: bool,
) -> Result<Bundle> {
    generate_solver_bundle_with(&TemplateStore::bundled(), kind, recommendation, parallel)
}

pub fn generate_solver_bundle_with(
    store: &TemplateStore,
    kind: BundleKind,
    recommendation: Option<&SolverConfig>,
    parallel: bool,
) -> Result<Bundle> {
    let config = match (kind, recommendation) {
        (BundleKind::RecommendedSolver, None) => return Err(CodegenError::MissingRecommendation),
        (BundleKind::RecommendedSolver, Some(c)) => {
            SolverConfig::new(&c.method, c.preconditioner.as_deref())
                .map_err(|_| CodegenError::UnknownMethod(c.label()))?;
            Some(c)
        }
        (_, Some(_)) => return Err(CodegenError::UnexpectedRecommendation),
        (_, None) => None,
    };
    let eigen = config.is_some_and(|c| c.kind() == ProblemKind::Eigen);

    let (category, program, mut options, description) = match (kind, config) {
        (BundleKind::PropertiesProgram, _) => (
            "petsc_properties",
            "matrix_properties",
            vec!["-symmetry_tol 1e-12".to_string()],
            "Prints dimensions, nonzeros, norms, symmetry and diagonal statistics of a sparse matrix.".to_string(),
        ),
        (BundleKind::DefaultSolver, _) => (
            "petsc_solver",
            "solver",
            Vec::new(),
            "Solves a sparse linear system with the default PETSc method and preconditioner.".to_string(),
        ),
        (BundleKind::RecommendedSolver, Some(c)) if eigen => (
            "slepc_eigensolver",
            "eigensolver",
            c.petsc_options(),
            format!("Computes eigenvalues with the recommended eigensolver {}.", c.method),
        ),
        (BundleKind::RecommendedSolver, Some(c)) => (
            "petsc_solver",
            "solver",
            c.petsc_options(),
            format!(
                "Solves a sparse linear system with the recommended method {} and preconditioner {}.",
                c.method,
                c.preconditioner_label()
            ),
        ),
        (BundleKind::RecommendedSolver, None) => unreachable!("checked above"),
    };
    if eigen {
        options.push("-eps_tol 1e-8".into());
    } else if kind != BundleKind::PropertiesProgram {
        options.extend(["-ksp_rtol 1e-8".to_string(), "-ksp_max_it 10000".to_string()]);
    }

    let source_file = format!("{program}.c");
    let launcher = if parallel { "mpiexec -n $(NP) " } else { "" };
    let run_command = format!("{launcher}./{program} -f $(MATRIX) -options_file {OPTIONS_FILE}");
    let (compile_hint, conf_includes, link_libs) = if eigen {
        (
            "Needs SLEPC_DIR, PETSC_DIR and PETSC_ARCH set for a SLEPc installation.",
            "include ${SLEPC_DIR}/lib/slepc/conf/slepc_common",
            "${SLEPC_EPS_LIB}",
        )
    } else {
        (
            "Needs PETSC_DIR and PETSC_ARCH set for a PETSc installation.",
            "include ${PETSC_DIR}/lib/petsc/conf/variables\ninclude ${PETSC_DIR}/lib/petsc/conf/rules",
            "${PETSC_LIB}",
        )
    };
    let mut usage = description.clone();
    usage.push_str(match kind {
        BundleKind::PropertiesProgram => "\nThe printed properties can be fed back to get a solver recommendation.",
        BundleKind::DefaultSolver => {
            "\nNo method is suggested; set one in the options file or on the command line if the default is slow."
        }
        BundleKind::RecommendedSolver => "\nThe options file selects the recommended configuration.",
    });
    if parallel {
        usage.push_str("\nThe run target starts NP processes (default 4) with mpiexec.");
    }

    let mut ctx = Context::new();
    ctx.set("description", description)
        .set("program_name", program)
        .set("source_file", source_file.clone())
        .set("options_file", OPTIONS_FILE)
        .set("run_command", run_command)
        .set("compile_hint", compile_hint)
        .set("conf_includes", conf_includes)
        .set("link_libs", link_libs)
        .set("bundle_title", format!("{program} ({})", if eigen { "SLEPc" } else { "PETSc" }))
        .set("usage", usage)
        .set_list(
            "files",
            files_list(&[
                (&source_file, "program source"),
                ("makefile", "makefile using the installation's build configuration"),
                (OPTIONS_FILE, "command-line options, one per line"),
                ("README", "this file"),
            ]),
        );
    let base = store.base(category, Language::C)?;
    let source = render(&base.id, &base.body, &ctx)?;
    let makefile = render("petsc/makefile", store.support("petsc/makefile")?, &ctx)?;
    let readme = render("petsc/README", store.support("petsc/README")?, &ctx)?;
    let mut options_text = format!("{OPTIONS_HEADER}\n");
    for o in &options {
        options_text.push_str(o);
        options_text.push('\n');
    }

    Bundle::new(vec![
        text_file(&source_file, source),
        text_file("makefile", makefile),
        text_file(OPTIONS_FILE, options_text),
        text_file("README", readme),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::lint::lint_bundle;

    #[test]
    fn path_rules() {
        let f = |p: &str| BundleFile { path: p.into(), bytes: vec![] };
        assert!(Bundle::new(vec![f("a/b.c")]).is_ok());
        for bad in ["/etc/passwd", "../x", "a/../b", "", "a//b", "c:\\x", "./a"] {
            assert!(matches!(Bundle::new(vec![f(bad)]), Err(CodegenError::BadPath(_))), "{bad}");
        }
        assert!(matches!(Bundle::new(vec![f("a"), f("a")]), Err(CodegenError::DuplicatePath(_))));
        assert!(matches!(Bundle::new(vec![]), Err(CodegenError::EmptyBundle)));
    }

    #[test]
    fn every_routine_bundles_in_both_languages() {
        let t = Taxonomy::bundled();
        for r in t.routines() {
            for lang in Language::ALL {
                let b = routine_bundle(&t, &r.id, lang).unwrap();
                assert!(b.is_complete());
                assert_eq!(b.readme_listing(), b.paths());
                lint_bundle(&b).unwrap_or_else(|e| panic!("{} {lang}: {e}", r.name));
            }
        }
    }

    #[test]
    fn recommended_options() {
        let c = SolverConfig::new("gmres", Some("ilu(k)")).unwrap();
        let b = generate_solver_bundle(BundleKind::RecommendedSolver, Some(&c), false).unwrap();
        let opts = b.text(OPTIONS_FILE).unwrap();
        assert_eq!(opts.matches("gmres").count(), 1);
        assert_eq!(opts.matches("ilu").count(), 1);
        assert!(opts.lines().any(|l| l == "-ksp_type gmres"));
        assert!(opts.lines().any(|l| l == "-pc_type ilu"));
        assert!(!b.text("makefile").unwrap().contains("mpiexec"));
    }

    #[test]
    fn default_solver_suggests_nothing() {
        let b = generate_solver_bundle(BundleKind::DefaultSolver, None, true).unwrap();
        let opts = b.text(OPTIONS_FILE).unwrap();
        assert!(!opts.lines().any(|l| l.starts_with("-ksp_type") || l.starts_with("-pc_type")));
        assert!(b.text("makefile").unwrap().contains("mpiexec -n $(NP)"));
    }

    #[test]
    fn solver_bundle_errors() {
        assert!(matches!(
            generate_solver_bundle(BundleKind::RecommendedSolver, None, false),
            Err(CodegenError::MissingRecommendation)
        ));
        let c = SolverConfig::new("cg", None).unwrap();
        assert!(matches!(
            generate_solver_bundle(BundleKind::DefaultSolver, Some(&c), false),
            Err(CodegenError::UnexpectedRecommendation)
        ));
        let mut bad = c.clone();
        bad.method = "multigrid".into();
        assert!(matches!(
            generate_solver_bundle(BundleKind::RecommendedSolver, Some(&bad), false),
            Err(CodegenError::UnknownMethod(_))
        ));
    }

    #[test]
    fn every_solver_bundle_is_complete() {
        let eigen = SolverConfig::new("krylovschur", None).unwrap();
        let linear = SolverConfig::new("bicgstab", Some("jacobi")).unwrap();
        for (kind, rec) in [
            (BundleKind::PropertiesProgram, None),
            (BundleKind::DefaultSolver, None),
            (BundleKind::RecommendedSolver, Some(&linear)),
            (BundleKind::RecommendedSolver, Some(&eigen)),
        ] {
            for parallel in [false, true] {
                let b = generate_solver_bundle(kind, rec, parallel).unwrap();
                assert!(b.is_complete());
                assert_eq!(b.readme_listing(), b.paths());
                lint_bundle(&b).unwrap();
            }
        }
        let b = generate_solver_bundle(BundleKind::RecommendedSolver, Some(&eigen), false).unwrap();
        assert_eq!(b.source_path(), Some("eigensolver.c"));
        assert!(b.text(OPTIONS_FILE).unwrap().contains("-eps_type krylovschur"));
    }

    #[test]
    fn kinds_parse() {
        for k in ["properties_program", "default_solver", "recommended_solver"] {
            assert_eq!(k.parse::<BundleKind>().unwrap().to_string(), k);
        }
        assert!("other".parse::<BundleKind>().is_err());
    }
}
