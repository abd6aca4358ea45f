use std::path::{Path, PathBuf};
use std::process::Command;

use lighthouse_core::codegen::lint::{lint_bundle, lint_fortran};
use lighthouse_core::codegen::{
    generate_solver_bundle, package_archive, render_routine_template, routine_bundle, unpack_archive, BundleKind,
    Language,
};
use lighthouse_core::data::LAPACK_TAXONOMY;
use lighthouse_core::mlselect::SolverConfig;
use lighthouse_core::taxonomy::Taxonomy;

fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares against a reviewed golden file; `LH_BLESS=1` rewrites it.
fn check_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("LH_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} differs from its golden file");
}

/// Parameter names of a routine read straight from the fixture JSON.
fn fixture_params(name: &str) -> Vec<String> {
    let doc: serde_json::Value = serde_json::from_str(LAPACK_TAXONOMY).unwrap();
    let r = doc["routines"].as_array().unwrap().iter().find(|r| r["name"] == name).unwrap();
    r["parameters"].as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap().to_string()).collect()
}

/// Joins `&` continuation lines of free-form Fortran.
fn statements(src: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for line in src.lines() {
        let code = line.split('!').next().unwrap().trim();
        match code.strip_suffix('&') {
            Some(head) => cur.push_str(head),
            None => {
                cur.push_str(code);
                out.push(std::mem::take(&mut cur));
            }
        }
    }
    out
}

#[test]
fn dgbsv_fortran_driver() {
    let t = Taxonomy::bundled();
    let src = render_routine_template(&t, "DGBSV", Language::Fortran90).unwrap();
    check_golden("dgbsv_driver.f90", &src);

    let params = fixture_params("DGBSV");
    let stmts = statements(&src);
    for p in &params {
        let decls = stmts
            .iter()
            .filter(|s| s.split_once("::").is_some_and(|(_, rhs)| rhs.trim().split('(').next() == Some(p.as_str())))
            .count();
        assert_eq!(decls, 1, "declarations of {p}");
    }
    let call = stmts.iter().find(|s| s.starts_with("call DGBSV(")).expect("call statement");
    let args: Vec<&str> = call["call DGBSV(".len()..call.len() - 1].split(',').map(str::trim).collect();
    assert_eq!(args, params);
    for sub in ["subroutine init()", "subroutine solve()", "subroutine check()"] {
        assert!(src.contains(sub), "{sub}");
    }
    assert!(!src.contains("{{"));
    lint_fortran(&src).unwrap();
    assert_eq!(src, render_routine_template(&t, "DGBSV", Language::Fortran90).unwrap());
}

#[test]
fn dgbsv_c_driver() {
    let src = render_routine_template(&Taxonomy::bundled(), "DGBSV", Language::C).unwrap();
    check_golden("dgbsv_driver.c", &src);
}

#[test]
fn recommended_gmres_ilu_bundle() {
    let c = SolverConfig::new("gmres", Some("ilu(k)")).unwrap();
    let b = generate_solver_bundle(BundleKind::RecommendedSolver, Some(&c), false).unwrap();
    let opts = b.text("petsc_options.txt").unwrap();
    check_golden("gmres_ilu_options.txt", opts);
    check_golden("gmres_ilu_makefile", b.text("makefile").unwrap());
    assert_eq!(opts.matches("gmres").count(), 1);
    assert_eq!(opts.matches("ilu").count(), 1);
}

#[test]
fn unknown_routine() {
    assert!(render_routine_template(&Taxonomy::bundled(), "DGBSVQ", Language::C).is_err());
}

#[test]
fn archives_are_reproducible() {
    let t = Taxonomy::bundled();
    let c = SolverConfig::new("cg", Some("jacobi")).unwrap();
    let bundles = [
        routine_bundle(&t, "ZGESVX", Language::C).unwrap(),
        generate_solver_bundle(BundleKind::RecommendedSolver, Some(&c), true).unwrap(),
    ];
    for b in bundles {
        assert!(b.is_complete());
        lint_bundle(&b).unwrap();
        let a = package_archive(&b).unwrap();
        assert_eq!(a, package_archive(&b).unwrap());
        assert_eq!(unpack_archive(&a).unwrap(), b);
    }
}

/// Builds and runs every C driver against the system LAPACK. Opt in with
/// `LH_COMPILE_CHECK=1`; needs `cc` and `-llapack -lblas`.
#[test]
fn c_drivers_build_and_run() {
    if std::env::var_os("LH_COMPILE_CHECK").is_none() {
        return;
    }
    let t = Taxonomy::bundled();
    let dir = tempfile::tempdir().unwrap();
    for r in t.routines() {
        let b = routine_bundle(&t, &r.id, Language::C).unwrap();
        let work = dir.path().join(&r.id);
        std::fs::create_dir_all(&work).unwrap();
        for f in b.files() {
            std::fs::write(work.join(&f.path), &f.bytes).unwrap();
        }
        let build = Command::new("make").arg("-s").current_dir(&work).output().unwrap();
        assert!(build.status.success(), "{}: {}", r.name, String::from_utf8_lossy(&build.stderr));
        let exe = work.join(format!("{}_driver", r.name.to_lowercase()));
        let run = Command::new(&exe).output().unwrap();
        assert!(run.status.success(), "{}: {}", r.name, String::from_utf8_lossy(&run.stderr));
    }
}
