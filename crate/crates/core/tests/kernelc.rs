use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use lighthouse_core::kernelc::random::random_kernel;
use lighthouse_core::kernelc::{
    emit_c, extents_from_bindings, infer, interpret_ast, interpret_ir, lower, manifest, manifest_json, parse_kernel,
    validate_ir, Bindings, Intent, IrStmt, Kind, Orientation, Seeds, Tensor,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GEMVER: &str = "kernel gemver\nB = A + u1 * v1' + u2 * v2'\nx = b * (B' * y) + z\nw = a * (B * x)\n";

fn check_golden(name: &str, actual: &str) {
    let path: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("LH_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} differs from its golden file");
}

fn seeds(pairs: &[(&str, &str)]) -> Seeds {
    pairs.iter().map(|(k, v)| (k.to_string(), v.parse().unwrap())).collect()
}

#[test]
fn gemver_roles_golden_source_and_manifest() {
    let t = infer(&parse_kernel(GEMVER).unwrap(), &Seeds::new()).unwrap();
    let ir = lower(&t);
    validate_ir(&ir).unwrap();
    let src = emit_c(&ir);
    check_golden("gemver.c", &src);
    check_golden("gemver_manifest.json", &manifest_json(&ir));
    assert_eq!(src.matches("void ").count(), 1);
    assert!(src.contains("void gemver("));

    let m = manifest(&ir);
    let role = |n: &str| {
        let p = m.parameters.iter().find(|p| p.name == n).unwrap();
        (p.kind, p.orientation, p.intent)
    };
    for n in ["A"] {
        assert_eq!(role(n), (Kind::Matrix, None, Intent::In));
    }
    assert_eq!(role("B"), (Kind::Matrix, None, Intent::Out));
    for n in ["u1", "u2", "v1", "v2", "y", "z"] {
        assert_eq!(role(n), (Kind::Vector, Some(Orientation::Column), Intent::In), "{n}");
    }
    for n in ["x", "w"] {
        assert_eq!(role(n), (Kind::Vector, Some(Orientation::Column), Intent::Out), "{n}");
    }
    for n in ["a", "b"] {
        assert_eq!(role(n), (Kind::Scalar, None, Intent::In), "{n}");
    }
}

#[test]
fn scaled_matrix_vector_example() {
    let t = infer(&parse_kernel("kernel k\nw = a * (B * x)\n").unwrap(), &seeds(&[("x", "column")])).unwrap();
    let ir = lower(&t);
    assert_eq!(ir.depths(), [2]);
    let IrStmt::Loop { body, .. } = &ir.nests[0].body[0] else { panic!("outer loop") };
    assert!(matches!(body[0], IrStmt::Zero { .. }));
    let b: Bindings = [
        ("B".to_string(), Tensor::from_rows(&[&[1.0, 0.0], &[0.0, 2.0]])),
        ("x".to_string(), Tensor::vector(vec![1.0, 1.0])),
        ("a".to_string(), Tensor::scalar(2.0)),
    ]
    .into();
    let ext = extents_from_bindings(&t, &b).unwrap();
    assert_eq!(interpret_ast(&t, &b, &ext).unwrap()["w"], Tensor::vector(vec![2.0, 4.0]));
    assert_eq!(interpret_ir(&ir, &t, &b, &ext).unwrap()["w"], Tensor::vector(vec![2.0, 4.0]));
}

/// Written out by hand: B = A + u1 v1' + u2 v2', x = b B' y + z, w = a B x.
fn gemver_by_hand(bind: &Bindings) -> BTreeMap<&'static str, Vec<f64>> {
    let a_m = &bind["A"];
    let (m, n) = (a_m.shape[0], a_m.shape[1]);
    let (u1, v1, u2, v2) = (&bind["u1"].data, &bind["v1"].data, &bind["u2"].data, &bind["v2"].data);
    let (y, z) = (&bind["y"].data, &bind["z"].data);
    let (a, b) = (bind["a"].data[0], bind["b"].data[0]);
    let mut bm = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            bm[i + j * m] = a_m.data[i + j * m] + u1[i] * v1[j] + u2[i] * v2[j];
        }
    }
    let x: Vec<f64> = (0..n).map(|j| b * (0..m).map(|i| bm[i + j * m] * y[i]).sum::<f64>() + z[j]).collect();
    let w: Vec<f64> = (0..m).map(|i| a * (0..n).map(|j| bm[i + j * m] * x[j]).sum::<f64>()).collect();
    [("B", bm), ("x", x), ("w", w)].into()
}

fn gemver_bindings(m: usize, n: usize, rng: &mut ChaCha8Rng) -> Bindings {
    use rand::Rng;
    let mut v = |len: usize| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    [
        ("A", Tensor { shape: vec![m, n], data: v(m * n) }),
        ("u1", Tensor::vector(v(m))),
        ("u2", Tensor::vector(v(m))),
        ("v1", Tensor::vector(v(n))),
        ("v2", Tensor::vector(v(n))),
        ("y", Tensor::vector(v(m))),
        ("z", Tensor::vector(v(n))),
        ("a", Tensor::scalar(v(1)[0])),
        ("b", Tensor::scalar(v(1)[0])),
    ]
    .into_iter()
    .map(|(k, t)| (k.to_string(), t))
    .collect()
}

#[test]
fn gemver_matches_hand_written_loops() {
    let t = infer(&parse_kernel(GEMVER).unwrap(), &Seeds::new()).unwrap();
    let ir = lower(&t);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (m, n) in [(1, 1), (3, 5), (6, 2)] {
        let bind = gemver_bindings(m, n, &mut rng);
        let ext = extents_from_bindings(&t, &bind).unwrap();
        let out = interpret_ir(&ir, &t, &bind, &ext).unwrap();
        for (name, want) in gemver_by_hand(&bind) {
            let got = &out[name].data;
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0), "{name}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn interpreters_agree_on_a_thousand_random_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let k = random_kernel(&mut rng, 3, 8);
        let t = infer(&k.program, &k.seeds).unwrap_or_else(|e| panic!("{}: {e}", k.text));
        let ext = extents_from_bindings(&t, &k.bindings).unwrap();
        let ir = lower(&t);
        let a = interpret_ast(&t, &k.bindings, &ext).unwrap();
        let b = interpret_ir(&ir, &t, &k.bindings, &ext).unwrap();
        assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
        for (name, v) in &a {
            assert!(v.max_rel_diff(&b[name]) <= 1e-12, "{}: {name}", k.text);
        }
    }
}

proptest! {
    #[test]
    fn zero_inputs_give_zero_outputs(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut k = random_kernel(&mut rng, 3, 8);
        // Literals would make constants out of nothing.
        prop_assume!(!k.program.statements.iter().any(|s| {
            let mut lit = false;
            s.expr.walk(&mut |e| lit |= matches!(e.kind, lighthouse_core::kernelc::ExprKind::Number(_)));
            lit
        }));
        for t in k.bindings.values_mut() {
            t.data.iter_mut().for_each(|x| *x = 0.0);
        }
        let t = infer(&k.program, &k.seeds).unwrap();
        let ext = extents_from_bindings(&t, &k.bindings).unwrap();
        let out = interpret_ir(&lower(&t), &t, &k.bindings, &ext).unwrap();
        for v in out.values() {
            prop_assert!(v.data.iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn double_transpose_is_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = random_kernel(&mut rng, 2, 6);
        let wrapped = k.program.statements.iter().map(|s| format!("{} = (({})')'", s.target, s.expr)).collect::<Vec<_>>();
        let text = format!("kernel random\n{}\n", wrapped.join("\n"));
        let t1 = infer(&k.program, &k.seeds).unwrap();
        let t2 = infer(&parse_kernel(&text).unwrap(), &k.seeds).unwrap();
        let ext = extents_from_bindings(&t1, &k.bindings).unwrap();
        let a = interpret_ast(&t1, &k.bindings, &ext).unwrap();
        let b = interpret_ir(&lower(&t2), &t2, &k.bindings, &ext).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn intents_match_the_loop_program(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = random_kernel(&mut rng, 3, 8);
        let t = infer(&k.program, &k.seeds).unwrap();
        let ir = lower(&t);
        prop_assert!(validate_ir(&ir).is_ok());
        for v in &t.vars {
            let written = k.program.statements.iter().any(|s| s.target == v.name);
            prop_assert_eq!(v.intent == Intent::In, !written, "{}", v.name);
            let first = k.program.statements.iter().position(|s| s.target == v.name || s.expr.vars().contains(&v.name.as_str())).unwrap();
            let read_first = k.program.statements[first].expr.vars().contains(&v.name.as_str());
            prop_assert_eq!(v.intent == Intent::Out, !read_first, "{}", v.name);
        }
    }

    #[test]
    fn emitted_source_has_one_balanced_procedure(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = random_kernel(&mut rng, 3, 8);
        let src = emit_c(&lower(&infer(&k.program, &k.seeds).unwrap()));
        prop_assert!(lighthouse_core::codegen::lint::lint_c(&src).is_ok(), "{}", src);
        prop_assert_eq!(src.matches("\nvoid ").count(), 1);
    }
}

fn c_array(name: &str, data: &[f64]) -> String {
    let items: Vec<String> = data.iter().map(|x| format!("{x:?}")).collect();
    format!("static double {name}[] = {{{}}};\n", items.join(", "))
}

/// Compiles the generated procedure with a small harness and compares its
/// output with the interpreter. Runs when `LH_COMPILE_CHECK` is set.
#[test]
fn gemver_compiles_and_matches_interpreter() {
    if std::env::var_os("LH_COMPILE_CHECK").is_none() {
        return;
    }
    let t = infer(&parse_kernel(GEMVER).unwrap(), &Seeds::new()).unwrap();
    let ir = lower(&t);
    let (m, n) = (4, 3);
    let bind = gemver_bindings(m, n, &mut ChaCha8Rng::seed_from_u64(11));
    let ext = extents_from_bindings(&t, &bind).unwrap();
    let want = interpret_ir(&ir, &t, &bind, &ext).unwrap();

    let mut main = String::from("#include <stdio.h>\n");
    main.push_str(&emit_c(&ir));
    for p in &t.vars {
        if p.kind == Kind::Scalar {
            continue;
        }
        let data = match bind.get(&p.name) {
            Some(b) if p.intent != Intent::Out => b.data.clone(),
            _ => vec![0.0; p.dims.iter().map(|d| ext[d]).product()],
        };
        main.push_str(&c_array(&p.name, &data));
    }
    let args: Vec<String> = t
        .dims
        .iter()
        .map(|d| ext[d].to_string())
        .chain(t.vars.iter().map(|p| match p.kind {
            Kind::Scalar => format!("{:?}", bind[&p.name].data[0]),
            _ => p.name.clone(),
        }))
        .collect();
    let _ = write!(main, "int main(void)\n{{\n    gemver({});\n", args.join(", "));
    for out in ["B", "x", "w"] {
        let len = want[out].data.len();
        let _ = writeln!(main, "    for (int i = 0; i < {len}; ++i) printf(\"{out} %.17g\\n\", {out}[i]);");
    }
    main.push_str("    return 0;\n}\n");

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("main.c"), &main).unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-O0", "-o", "gemver", "main.c"])
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert!(status.success(), "{main}");
    let run = Command::new(dir.path().join("gemver")).output().unwrap();
    let stdout = String::from_utf8(run.stdout).unwrap();
    let mut got: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for line in stdout.lines() {
        let (name, v) = line.split_once(' ').unwrap();
        got.entry(["B", "x", "w"].into_iter().find(|n| *n == name).unwrap()).or_default().push(v.parse().unwrap());
    }
    for out in ["B", "x", "w"] {
        assert_eq!(got[out], want[out].data, "{out}");
    }
}
