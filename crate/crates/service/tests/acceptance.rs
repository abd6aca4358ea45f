//! Acceptance suite: one line per criterion, nonzero exit on any failure.
//!
//! Every expected value is computed here from first principles (dense
//! reference arithmetic, brute-force scans, explicit enumeration, simulation)
//! rather than taken from the code under test.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Display;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lighthouse_core::codegen::{
    generate_solver_bundle, package_archive, render_routine_template, routine_bundle, unpack_archive, Bundle,
    BundleKind, Language,
};
use lighthouse_core::data;
use lighthouse_core::kernelc::random::random_kernel;
use lighthouse_core::kernelc::{
    emit_c, extents_from_bindings, infer, interpret_ast, interpret_ir, lower, parse_kernel, validate_ir, Kind, Seeds,
};
use lighthouse_core::matfeat::{compute_features, SparseMatrix};
use lighthouse_core::mlselect::synth::{random_runs, standard_normal};
use lighthouse_core::mlselect::{
    accuracy, cross_validate, derive_labels, fit_pca, induce_tree, select_features, LabeledInstance, RunRecord,
    Scoring, SolverConfig, Target, TrainerRegistry, TreeParams, EIGEN_METHODS, LINEAR_METHODS, PRECONDITIONERS,
};
use lighthouse_core::taxonomy::{
    flatten_tree, lookup_path, AnswerOption, DecisionTree, Library, Node, Question, Taxonomy,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

fn fail(e: impl Display) -> String {
    e.to_string()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("guided-search transcript", guided_transcript),
        ("flatten/lookup equivalence", flatten_lookup),
        ("feature oracle", feature_oracle),
        ("labeling", labeling),
        ("pca", pca),
        ("tree induction", tree_induction),
        ("kernel compiler", kernel_compiler),
        ("codegen", codegen),
        ("service walkthrough", service_walkthrough),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail} ({secs:.2}s)"),
            Err(detail) => {
                failures += 1;
                println!("[FAIL] {name}: {detail} ({secs:.2}s)");
            }
        }
    }
    let _ = panic::take_hook();
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

// ---------------------------------------------------------------- guided

fn guided_transcript() -> Outcome {
    let answers = std::fs::read_to_string(common::fixture("dgbsv_answers.txt")).map_err(fail)?;
    let answers: Vec<&str> = answers.lines().filter(|l| !l.trim().is_empty()).collect();
    ensure(answers.len() == 6, || format!("transcript has {} answers", answers.len()))?;

    let fixture: Value = serde_json::from_str(data::LAPACK_TAXONOMY_SMALL).map_err(fail)?;
    let all: BTreeSet<String> =
        fixture["routines"].as_array().unwrap().iter().map(|r| r["id"].as_str().unwrap().to_string()).collect();

    let started = Instant::now();
    let tax = Taxonomy::from_json(data::LAPACK_TAXONOMY_SMALL).map_err(fail)?;
    let mut session = tax.start_session(Library::Lapack, "acceptance").map_err(fail)?;
    let first: BTreeSet<String> = session.view(&tax).candidates.into_iter().collect();
    ensure(first == all, || format!("initial candidates {first:?} differ from the fixture's {all:?}"))?;
    for text in &answers {
        let view = session.view(&tax);
        let option = view
            .options
            .iter()
            .find(|o| o.text == *text)
            .ok_or_else(|| format!("`{text}` is not offered for {:?}", view.question))?;
        session = session.answer(&tax, &option.key).map_err(fail)?;
    }
    let view = session.view(&tax);
    let elapsed = started.elapsed();

    ensure(view.finished, || "search did not finish".into())?;
    ensure(view.candidates == ["DGBSV"], || format!("result {:?}", view.candidates))?;
    ensure(view.message == Some("End of guided search! Check out the result."), || {
        format!("message {:?}", view.message)
    })?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("6 answers -> {{DGBSV}} in {:.3} ms", elapsed.as_secs_f64() * 1e3))
}

// ---------------------------------------------------------- flatten/lookup

/// Tree built by repeatedly splitting a random leaf; kept alongside the
/// serialized form so paths can be enumerated without the code under test.
struct RandomTree {
    tree: DecisionTree,
    questions: HashMap<String, Question>,
    /// (facet, option key) pairs and leaf payload of every root-to-leaf path.
    paths: Vec<(Vec<(String, String)>, Vec<String>)>,
}

fn random_tree(rng: &mut ChaCha8Rng, leaves: usize) -> RandomTree {
    const FACETS: [&str; 6] = ["precision", "storage", "matrix_type", "form", "scalar_field", "function"];
    // children[i] = (question id, [(key, child)]) or None for leaves
    let mut children: Vec<Option<(String, Vec<(String, usize)>)>> = vec![None];
    let mut open = vec![0usize];
    let mut questions = HashMap::new();
    while open.len() < leaves {
        let pick = open.swap_remove(rng.gen_range(0..open.len()));
        let k = rng.gen_range(2..=4usize).min(leaves - open.len());
        let qid = format!("q{}", questions.len());
        let mut options: Vec<AnswerOption> =
            (0..k).map(|i| AnswerOption { key: format!("o{i}"), text: format!("option {i}") }).collect();
        options.shuffle(rng);
        let facet = FACETS[rng.gen_range(0..FACETS.len())].to_string();
        let mut edges = Vec::new();
        for o in &options {
            children.push(None);
            open.push(children.len() - 1);
            edges.push((o.key.clone(), children.len() - 1));
        }
        questions.insert(qid.clone(), Question { id: qid.clone(), text: format!("question {qid}"), facet, options });
        children[pick] = Some((qid, edges));
    }

    let mut nodes = BTreeMap::new();
    let mut paths = Vec::new();
    let mut stack = vec![(0usize, Vec::new())];
    while let Some((i, path)) = stack.pop() {
        match &children[i] {
            None => {
                let payload = vec![format!("R{i}")];
                nodes.insert(format!("n{i}"), Node::Leaf { leaf: payload.clone() });
                paths.push((path, payload));
            }
            Some((qid, edges)) => {
                let facet = &questions[qid].facet;
                nodes.insert(
                    format!("n{i}"),
                    Node::Internal {
                        question: qid.clone(),
                        edges: edges.iter().map(|(k, c)| (k.clone(), format!("n{c}"))).collect(),
                    },
                );
                for (k, c) in edges {
                    let mut next: Vec<(String, String)> = path.clone();
                    next.push((facet.clone(), k.clone()));
                    stack.push((*c, next));
                }
            }
        }
    }
    RandomTree { tree: DecisionTree { root: "n0".into(), nodes }, questions, paths }
}

fn check_tree(t: &RandomTree, leaves: usize) -> Result<usize, String> {
    let lookup = |id: &str| t.questions.get(id);
    t.tree.validate(&lookup).map_err(fail)?;
    let table = flatten_tree(&t.tree, &lookup);
    ensure(t.paths.len() == leaves, || format!("generator made {} leaves, wanted {leaves}", t.paths.len()))?;
    ensure(table.rows.len() == leaves, || format!("{} rows for {leaves} leaves", table.rows.len()))?;
    for (answers, payload) in &t.paths {
        let found = lookup_path(&table, answers).map_err(|e| format!("lookup {answers:?}: {e}"))?;
        ensure(found == payload.as_slice(), || format!("lookup {answers:?} gave {found:?}, expected {payload:?}"))?;
        let keys: Vec<&str> = answers.iter().map(|(_, k)| k.as_str()).collect();
        let walked = t.tree.traverse(&keys).map_err(fail)?;
        ensure(walked == payload.as_slice(), || format!("traversal {keys:?} gave {walked:?}"))?;
    }
    if let Some((answers, _)) = t.paths.iter().find(|(a, _)| !a.is_empty()) {
        ensure(lookup_path(&table, &answers[..answers.len() - 1]).is_err(), || "a proper prefix found a row".into())?;
    }
    Ok(t.paths.len())
}

fn flatten_lookup() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for _ in 0..100 {
        let leaves = rng.gen_range(1..=500);
        checked += check_tree(&random_tree(&mut rng, leaves), leaves)?;
    }
    let big = random_tree(&mut rng, 395);
    check_tree(&big, 395)?;
    Ok(format!("100 random trees, {checked} paths; 395-leaf tree -> 395 rows"))
}

// ----------------------------------------------------------------- features

type Dense = Vec<Vec<f64>>;

fn pop_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mu = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n
}

/// The fifteen properties evaluated over a full n-by-n array.
fn dense_features(a: &Dense) -> BTreeMap<&'static str, f64> {
    let n = a.len();
    let col = |j: usize| (0..n).map(|i| a[i][j]).collect::<Vec<_>>();
    let diag: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    let part = |i: usize, j: usize, sign: f64| 0.5 * (a[i][j] + sign * a[j][i]);
    let all = || (0..n).flat_map(move |i| (0..n).map(move |j| (i, j)));
    let row_abs = |i: usize, f: &dyn Fn(usize, usize) -> f64| (0..n).map(|j| f(i, j).abs()).sum::<f64>();
    let max = |xs: Vec<f64>| xs.into_iter().fold(0.0f64, f64::max);
    let mut m = BTreeMap::new();
    m.insert("row_variance", a.iter().map(|r| pop_variance(r)).sum::<f64>() / n as f64);
    m.insert("column_variance", (0..n).map(|j| pop_variance(&col(j))).sum::<f64>() / n as f64);
    m.insert("diagonal_variance", pop_variance(&diag));
    m.insert("nnz", all().filter(|&(i, j)| a[i][j] != 0.0).count() as f64);
    m.insert("n_rows", n as f64);
    m.insert("frobenius_norm", all().map(|(i, j)| a[i][j] * a[i][j]).sum::<f64>().sqrt());
    m.insert("symmetric_frobenius_norm", all().map(|(i, j)| part(i, j, 1.0).powi(2)).sum::<f64>().sqrt());
    m.insert("antisymmetric_frobenius_norm", all().map(|(i, j)| part(i, j, -1.0).powi(2)).sum::<f64>().sqrt());
    m.insert("one_norm", max((0..n).map(|j| col(j).iter().map(|v| v.abs()).sum()).collect()));
    m.insert("infinity_norm", max((0..n).map(|i| row_abs(i, &|i, j| a[i][j])).collect()));
    m.insert("symmetric_infinity_norm", max((0..n).map(|i| row_abs(i, &|i, j| part(i, j, 1.0))).collect()));
    m.insert("antisymmetric_infinity_norm", max((0..n).map(|i| row_abs(i, &|i, j| part(i, j, -1.0))).collect()));
    m.insert("max_nnz_per_row", (0..n).map(|i| a[i].iter().filter(|v| **v != 0.0).count()).max().unwrap_or(0) as f64);
    m.insert("trace", diag.iter().sum());
    m.insert("absolute_trace", diag.iter().map(|v| v.abs()).sum());
    m
}

fn sparse_of(a: &Dense) -> SparseMatrix {
    let n = a.len();
    let triplets =
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| a[i][j] != 0.0).map(|(i, j)| (i, j, a[i][j]));
    SparseMatrix::from_triplets(n, n, triplets).expect("valid triplets")
}

fn compare_features(a: &Dense, label: &str) -> Result<(), String> {
    let want = dense_features(a);
    let got = compute_features(&sparse_of(a)).map_err(fail)?.entries();
    ensure(got.len() == 15 && want.len() == 15, || format!("{} features vs {} expected", got.len(), want.len()))?;
    for (name, g) in got {
        let w = *want.get(name).ok_or_else(|| format!("unexpected feature {name}"))?;
        let scale = w.abs().max(g.abs());
        ensure((g - w).abs() <= 1e-12 * scale, || format!("{label}: {name} = {g}, dense reference {w}"))?;
    }
    Ok(())
}

fn random_dense(rng: &mut ChaCha8Rng, n: usize, density: f64, symmetric: bool) -> Dense {
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if (!symmetric || j >= i) && rng.gen_bool(density) {
                let v = if rng.gen_bool(0.2) { rng.gen_range(-5i32..=5) as f64 } else { rng.gen_range(-10.0..10.0) };
                a[i][j] = v;
                if symmetric {
                    a[j][i] = v;
                }
            }
        }
    }
    a
}

fn feature_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..200 {
        let n = rng.gen_range(1..=50);
        let density = rng.gen_range(0.01..=0.3);
        compare_features(&random_dense(&mut rng, n, density, false), &format!("random #{k} (n={n})"))?;
    }
    for n in [1, 2, 7, 50] {
        let id: Dense = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        compare_features(&id, &format!("identity {n}"))?;
        compare_features(&vec![vec![0.0; n]; n], &format!("zero {n}"))?;
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let p: Dense = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(perm[i] == j))).collect()).collect();
        compare_features(&p, &format!("permutation {n}"))?;
    }
    let mut symmetric = 0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=50);
        let density = rng.gen_range(0.01..=0.3);
        let s = random_dense(&mut rng, n, density, true);
        compare_features(&s, "symmetric")?;
        let f = compute_features(&sparse_of(&s)).map_err(fail)?;
        ensure(f.antisymmetric_frobenius_norm == 0.0 && f.antisymmetric_infinity_norm == 0.0, || {
            format!(
                "symmetric input has antisymmetric norms {} / {}",
                f.antisymmetric_frobenius_norm, f.antisymmetric_infinity_norm
            )
        })?;
        symmetric += 1;
    }
    Ok(format!("200 random + 12 special + {symmetric} symmetric matrices match the dense reference to 1e-12"))
}

// ----------------------------------------------------------------- labeling

fn eligible(r: &RunRecord, default_tol: f64) -> bool {
    let tol = r.request.tolerance.unwrap_or(default_tol);
    let count_ok = match r.request.n_eigenvalues {
        Some(want) => r.converged_count.is_some_and(|got| got >= want),
        None => true,
    };
    r.converged && r.residual.is_some_and(|x| x <= tol) && count_ok && r.time_seconds > 0.0
}

/// Per problem: best configuration and near-best set, by pairwise scans over runs.
type Labels = Vec<(String, Option<(SolverConfig, BTreeSet<SolverConfig>)>)>;

fn brute_force_labels(runs: &[RunRecord], tol: f64, ratio: f64) -> Labels {
    let mut problems: Vec<&str> = Vec::new();
    for r in runs {
        if !problems.contains(&r.problem_id.as_str()) {
            problems.push(&r.problem_id);
        }
    }
    problems
        .into_iter()
        .map(|p| {
            let ok: Vec<&RunRecord> = runs.iter().filter(|r| r.problem_id == p && eligible(r, tol)).collect();
            let best = ok.iter().find(|r| {
                ok.iter().all(|o| {
                    r.time_seconds < o.time_seconds || (r.time_seconds == o.time_seconds && r.config <= o.config)
                })
            });
            let labels = best.map(|b| {
                let near = ok
                    .iter()
                    .filter(|r| r.time_seconds < ratio * b.time_seconds || r.time_seconds == b.time_seconds)
                    .map(|r| r.config.clone())
                    .collect();
                (b.config.clone(), near)
            });
            (p.to_string(), labels)
        })
        .collect()
}

fn labels_of(runs: &[RunRecord], tol: f64, ratio: f64) -> Result<Labels, String> {
    let report = derive_labels(runs, tol, ratio).map_err(fail)?;
    let mut by_id: HashMap<String, &LabeledInstance> =
        report.instances.iter().map(|i| (i.problem_id.clone(), i)).collect();
    let mut order: Vec<String> = Vec::new();
    for r in runs {
        if !order.contains(&r.problem_id) {
            order.push(r.problem_id.clone());
        }
    }
    let labels = order
        .into_iter()
        .map(|p| {
            let l = by_id.remove(&p).map(|i| (i.best.clone(), i.near_best.clone()));
            (p, l)
        })
        .collect::<Labels>();
    let excluded: Vec<&String> = labels.iter().filter(|(_, l)| l.is_none()).map(|(p, _)| p).collect();
    ensure(excluded == report.excluded.iter().collect::<Vec<_>>(), || {
        "excluded list differs from unlabeled problems".into()
    })?;
    Ok(labels)
}

fn labeling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let tol = 1e-8;
    let mut runs = random_runs(&mut rng, 100, true);
    let continuous = random_runs(&mut rng, 100, false);
    runs.extend(continuous.into_iter().map(|mut r| {
        r.problem_id = format!("c{}", r.problem_id);
        r
    }));
    let problems = brute_force_labels(&runs, tol, 1.1);
    ensure(problems.len() == 200, || format!("{} problems", problems.len()))?;
    let got = labels_of(&runs, tol, 1.1)?;
    if let Some((want, have)) = problems.iter().zip(&got).find(|(w, g)| w != g) {
        return Err(format!("problem {}: expected {:?}, derived {:?}", want.0, want.1, have.1));
    }

    for _ in 0..50 {
        let (r1, r2) = {
            let a = rng.gen_range(1.0..2.0);
            let b = rng.gen_range(1.0..2.0);
            (f64::min(a, b), f64::max(a, b))
        };
        let small = labels_of(&runs, tol, r1)?;
        let large = labels_of(&runs, tol, r2)?;
        for ((p, s), (_, l)) in small.iter().zip(&large) {
            match (s, l) {
                (Some((b1, n1)), Some((b2, n2))) => {
                    ensure(b1 == b2 && n1.is_subset(n2), || format!("{p}: ratio {r1} -> {r2} is not monotone"))?
                }
                (None, None) => {}
                _ => return Err(format!("{p}: eligibility depends on the ratio")),
            }
        }
    }

    for _ in 0..20 {
        let s = 2f64.powi(rng.gen_range(-10..=10));
        let scaled: Vec<RunRecord> = runs
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.time_seconds *= s;
                r
            })
            .collect();
        ensure(labels_of(&scaled, tol, 1.1)? == got, || format!("labels change when times scale by {s}"))?;
    }
    let labeled = got.iter().filter(|(_, l)| l.is_some()).count();
    Ok(format!("200 problems ({labeled} labeled) match the brute-force scan; 50 ratio pairs monotone; 20 time scalings invariant"))
}

// ---------------------------------------------------------------------- pca

fn standardized_trace(samples: &[Vec<f64>]) -> f64 {
    let n = samples.len() as f64;
    let p = samples[0].len();
    let mut trace = 0.0;
    for j in 0..p {
        let mean = samples.iter().map(|r| r[j]).sum::<f64>() / n;
        let sd = (samples.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let z: Vec<f64> = samples.iter().map(|r| (r[j] - mean) / sd).collect();
        let zm = z.iter().sum::<f64>() / n;
        trace += z.iter().map(|v| (v - zm).powi(2)).sum::<f64>() / (n - 1.0);
    }
    trace
}

fn orthonormality_error(components: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, u) in components.iter().enumerate() {
        for (b, v) in components.iter().enumerate() {
            let dot: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
            worst = worst.max((dot - f64::from(u8::from(a == b))).abs());
        }
    }
    worst
}

/// Three uncorrelated latent columns scaled to unit length after centering.
fn latents(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut z: Vec<Vec<f64>> = Vec::new();
    for _ in 0..3 {
        let mut v: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        for u in &z {
            let proj: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= proj * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        z.push(v);
    }
    z
}

fn pca() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst_ortho: f64 = 0.0;
    let mut worst_trace: f64 = 0.0;
    for _ in 0..20 {
        let p = 10;
        let mix: Vec<Vec<f64>> = (0..p).map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let samples: Vec<Vec<f64>> = (0..100)
            .map(|_| {
                let g: Vec<f64> = (0..p).map(|_| standard_normal(&mut rng)).collect();
                (0..p).map(|j| (0..p).map(|k| mix[j][k] * g[k]).sum::<f64>() * 10f64.powi(j as i32 - 3)).collect()
            })
            .collect();
        let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
        let fit = fit_pca(&names, &samples).map_err(fail)?;
        worst_ortho = worst_ortho.max(orthonormality_error(&fit.components));
        worst_trace = worst_trace.max((fit.total_variance() - standardized_trace(&samples)).abs());
    }
    ensure(worst_ortho <= 1e-10, || format!("components off orthonormal by {worst_ortho:e}"))?;
    ensure(worst_trace <= 1e-8, || format!("explained variance misses the trace by {worst_trace:e}"))?;

    // Named columns are the latents; the others mix them so that the summed
    // outer products of mixing weights are diagonal with distinct entries.
    // Principal axes are then the latent axes, on which a pure latent has
    // the only unit loading, so selection must return the named columns.
    let n = 400;
    let z = latents(&mut rng, n);
    let (r2, r5) = (2f64.sqrt(), 5f64.sqrt());
    let columns: [(&str, [f64; 3]); 7] = [
        ("trace", [1.0, 0.0, 0.0]),
        ("nnz", [0.0, 1.0, 0.0]),
        ("one_norm", [0.0, 0.0, 1.0]),
        ("m1", [1.0 / r2, 1.0 / r2, 0.0]),
        ("m2", [1.0 / r2, -1.0 / r2, 0.0]),
        ("m3", [0.0, 2.0 / r5, 1.0 / r5]),
        ("m4", [0.0, 2.0 / r5, -1.0 / r5]),
    ];
    let samples: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            columns
                .iter()
                .map(|(name, w)| {
                    let noise =
                        if name.starts_with('m') { 1e-3 * standard_normal(&mut rng) / (n as f64).sqrt() } else { 0.0 };
                    100.0 * (w[0] * z[0][i] + w[1] * z[1][i] + w[2] * z[2][i] + noise)
                })
                .collect()
        })
        .collect();
    let names: Vec<String> = columns.iter().map(|(c, _)| c.to_string()).collect();
    let fit = fit_pca(&names, &samples).map_err(fail)?;
    let carried = fit.explained_ratio(3);
    ensure(carried >= 0.99, || format!("three components carry only {carried}"))?;
    let picked: BTreeSet<String> = select_features(&fit, 3).map_err(fail)?.into_iter().collect();
    let expected: BTreeSet<String> = ["trace", "nnz", "one_norm"].iter().map(|s| s.to_string()).collect();
    ensure(picked == expected, || format!("selected {picked:?}"))?;
    Ok(format!(
        "orthonormal to {worst_ortho:.1e}, trace to {worst_trace:.1e}; constructed corpus ({:.4} in 3 components) -> {picked:?}",
        carried
    ))
}

// ----------------------------------------------------------- tree induction

const CLASSES: [&str; 5] = ["cg", "gmres", "bicg", "tfqmr", "bicgstab"];

fn labeled(id: String, features: BTreeMap<String, f64>, label: &str) -> LabeledInstance {
    let best: SolverConfig = label.parse().expect("valid label");
    LabeledInstance { problem_id: id, features, near_best: BTreeSet::from([best.clone()]), best }
}

fn unit_point(rng: &mut ChaCha8Rng, dims: usize) -> BTreeMap<String, f64> {
    (0..dims).map(|k| (format!("x{k}"), rng.gen_range(0.0..1.0))).collect()
}

/// A fixed depth-3 labeling tree over the unit 4-cube.
fn hidden_label(f: &BTreeMap<String, f64>) -> &'static str {
    let x = |k: usize| f[&format!("x{k}")];
    if x(2) <= 0.4 {
        if x(0) <= 0.55 {
            if x(3) <= 0.35 {
                "cg"
            } else {
                "gmres"
            }
        } else if x(1) <= 0.65 {
            "bicg"
        } else {
            "tfqmr"
        }
    } else if x(1) <= 0.3 {
        if x(0) <= 0.25 {
            "bicgstab"
        } else {
            "cg"
        }
    } else if x(3) <= 0.7 {
        "gmres"
    } else {
        "bicg"
    }
}

fn tree_induction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let params = TreeParams { target: Target::Best, ..TreeParams::default() };

    let train: Vec<LabeledInstance> =
        (0..500).map(|i| labeled(format!("t{i}"), unit_point(&mut rng, 4), CLASSES[rng.gen_range(0..5)])).collect();
    let distinct: BTreeSet<Vec<u64>> =
        train.iter().map(|d| d.features.values().map(|v| v.to_bits()).collect()).collect();
    ensure(distinct.len() == train.len(), || "training points repeat".into())?;
    let model = induce_tree(&train, &params).map_err(fail)?;
    let train_acc = accuracy(&model, &train, Scoring::Strict).map_err(fail)?;
    ensure(train_acc == 1.0, || format!("training accuracy {train_acc}"))?;

    let fit: Vec<LabeledInstance> = (0..1000)
        .map(|i| {
            let f = unit_point(&mut rng, 4);
            let label = hidden_label(&f);
            labeled(format!("h{i}"), f, label)
        })
        .collect();
    let model = induce_tree(&fit, &params).map_err(fail)?;
    let mut agree = 0;
    for _ in 0..1000 {
        let f = unit_point(&mut rng, 4);
        let predicted = model.predict_best(&f).map_err(fail)?;
        agree += usize::from(predicted.to_string() == hidden_label(&f));
    }
    let held_out = agree as f64 / 1000.0;
    ensure(held_out >= 0.95, || format!("held-out agreement {held_out}"))?;

    let mut labels: Vec<&str> = (0..2000).map(|i| CLASSES[i % 5]).collect();
    labels.shuffle(&mut rng);
    let shuffled: Vec<LabeledInstance> =
        labels.iter().enumerate().map(|(i, l)| labeled(format!("s{i}"), unit_point(&mut rng, 4), l)).collect();
    // chance level: agreement between the labels and a random permutation of them
    let mut perm = labels.clone();
    let trials = 200;
    let mut matches = 0usize;
    for _ in 0..trials {
        perm.shuffle(&mut rng);
        matches += labels.iter().zip(&perm).filter(|(a, b)| a == b).count();
    }
    let chance = matches as f64 / (trials * labels.len()) as f64;
    let registry = TrainerRegistry::standard();
    let trainer = registry.get("decision_tree").map_err(fail)?;
    let cv = cross_validate(&shuffled, 10, 3, trainer, &params, Scoring::Strict).map_err(fail)?;
    ensure(cv.fold_sizes.iter().max().unwrap() - cv.fold_sizes.iter().min().unwrap() <= 1, || {
        format!("fold sizes {:?}", cv.fold_sizes)
    })?;
    ensure((cv.mean_accuracy - chance).abs() <= 0.1, || {
        format!("cv accuracy {} vs chance {chance}", cv.mean_accuracy)
    })?;
    Ok(format!(
        "training 1.0; held-out {held_out:.3} vs hidden depth-3 tree; shuffled 10-fold cv {:.3} (chance {chance:.3})",
        cv.mean_accuracy
    ))
}

// ---------------------------------------------------------- kernel compiler

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn compile(text: &str, seeds: &Seeds) -> Result<String, String> {
    let program = parse_kernel(text).map_err(fail)?;
    let typed = infer(&program, seeds).map_err(fail)?;
    let ir = lower(&typed);
    validate_ir(&ir).map_err(fail)?;
    Ok(emit_c(&ir))
}

fn placeholder_free(source: &str) -> bool {
    ["{{", "}}", "TODO", "FIXME", "<<", ">>"].iter().all(|m| !source.contains(m))
}

fn kernel_compiler() -> Outcome {
    let text = std::fs::read_to_string(common::fixture("fig5.krn")).map_err(fail)?;
    let program = parse_kernel(&text).map_err(fail)?;
    ensure(program.statements.len() == 3, || format!("{} statements", program.statements.len()))?;
    let typed = infer(&program, &Seeds::new()).map_err(fail)?;
    let mut roles: BTreeMap<Kind, BTreeSet<&str>> = BTreeMap::new();
    for v in &typed.vars {
        roles.entry(v.kind).or_default().insert(v.name.as_str());
    }
    let set = |xs: &[&'static str]| xs.iter().copied().collect::<BTreeSet<&str>>();
    let expected = BTreeMap::from([
        (Kind::Matrix, set(&["A", "B"])),
        (Kind::Vector, set(&["u1", "v1", "u2", "v2", "x", "y", "z", "w"])),
        (Kind::Scalar, set(&["a", "b"])),
    ]);
    ensure(roles == expected, || format!("roles {roles:?}"))?;
    let source = compile(&text, &Seeds::new())?;
    ensure(source == compile(&text, &Seeds::new())?, || "gemver source differs between runs".into())?;
    ensure(placeholder_free(&source), || "gemver source contains a placeholder".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = random_kernel(&mut rng, 3, 8);
        let typed = infer(&k.program, &k.seeds).map_err(|e| format!("{}: {e}", k.text))?;
        let ext = extents_from_bindings(&typed, &k.bindings).map_err(fail)?;
        let ir = lower(&typed);
        validate_ir(&ir).map_err(|e| format!("{}: {e}", k.text))?;
        let a = interpret_ast(&typed, &k.bindings, &ext).map_err(fail)?;
        let b = interpret_ir(&ir, &typed, &k.bindings, &ext).map_err(fail)?;
        ensure(a.keys().eq(b.keys()), || format!("{}: interpreters bind different names", k.text))?;
        for (name, ta) in &a {
            let tb = &b[name];
            ensure(ta.shape == tb.shape, || format!("{}: {name} shapes {:?} vs {:?}", k.text, ta.shape, tb.shape))?;
            for (x, y) in ta.data.iter().zip(&tb.data) {
                ensure(close(*x, *y), || format!("{}: {name} {x} vs {y}", k.text))?;
                worst = worst.max((x - y).abs() / x.abs().max(y.abs()).max(1.0));
            }
        }
        let first = emit_c(&ir);
        ensure(first == compile(&k.text, &k.seeds)?, || format!("{}: output not deterministic", k.text))?;
        ensure(placeholder_free(&first), || format!("{}: placeholder in output", k.text))?;
    }
    Ok(format!("gemver: 3 statements, roles A,B / 8 vectors / a,b; 1000 random programs agree to {worst:.1e}"))
}

// ------------------------------------------------------------------ codegen

fn fortran_balanced(text: &str) -> Result<(), String> {
    let mut stack: Vec<&str> = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('!').next().unwrap_or("").trim().to_lowercase();
        let closes = ["end program", "end subroutine", "end do", "end if", "end function"]
            .iter()
            .find(|k| line.starts_with(**k))
            .map(|k| &k[4..]);
        if let Some(kind) = closes {
            let top = stack.pop().ok_or_else(|| format!("line {}: `{line}` closes nothing", no + 1))?;
            ensure(top == kind, || format!("line {}: `{line}` closes {top}", no + 1))?;
            continue;
        }
        if line.starts_with("program ") {
            stack.push("program");
        } else if line.starts_with("subroutine ") {
            stack.push("subroutine");
        } else if line.starts_with("function ") {
            stack.push("function");
        } else if line.starts_with("do ") {
            stack.push("do");
        } else if line.starts_with("if ") && line.ends_with("then") {
            stack.push("if");
        }
    }
    ensure(stack.is_empty(), || format!("unclosed {stack:?}"))
}

fn c_balanced(text: &str) -> Result<(), String> {
    let (mut depth, mut paren) = (0i64, 0i64);
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '/' if chars.peek() == Some(&'*') => {
                let mut prev = ' ';
                for d in chars.by_ref() {
                    if prev == '*' && d == '/' {
                        break;
                    }
                    prev = d;
                }
            }
            '"' | '\'' => {
                let mut escaped = false;
                for d in chars.by_ref() {
                    if d == c && !escaped {
                        break;
                    }
                    escaped = d == '\\' && !escaped;
                }
            }
            '{' => depth += 1,
            '}' => depth -= 1,
            '(' => paren += 1,
            ')' => paren -= 1,
            _ => {}
        }
        ensure(depth >= 0 && paren >= 0, || "closing bracket before its opener".into())?;
    }
    ensure(depth == 0 && paren == 0, || format!("unbalanced: braces {depth}, parentheses {paren}"))
}

fn fortran_declared(text: &str) -> Vec<String> {
    text.lines()
        .filter_map(|l| l.split('!').next().unwrap_or("").split_once("::"))
        .flat_map(|(_, names)| {
            names.split(',').map(|n| n.trim().split('(').next().unwrap_or("").trim().to_string()).collect::<Vec<_>>()
        })
        .filter(|n| !n.is_empty())
        .collect()
}

fn c_declared(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| l.starts_with("static ") && l.ends_with(';') && !l.contains('('))
        .filter_map(|l| l.trim_end_matches(';').split_whitespace().last())
        .map(|n| n.trim_start_matches('*').to_string())
        .collect()
}

fn complete(bundle: &Bundle) -> bool {
    let paths = bundle.paths();
    paths.iter().any(|p| p.ends_with(".f90") || p.ends_with(".c"))
        && paths.iter().any(|p| p.eq_ignore_ascii_case("makefile"))
        && paths.contains(&"README")
}

fn reproducible(bundle: &Bundle) -> Result<(), String> {
    let first = package_archive(bundle).map_err(fail)?;
    ensure(first == package_archive(bundle).map_err(fail)?, || "archive bytes differ between runs".into())?;
    let again = package_archive(&unpack_archive(&first).map_err(fail)?).map_err(fail)?;
    ensure(first == again, || "repacked archive differs".into())
}

fn codegen() -> Outcome {
    let fixture: Value = serde_json::from_str(data::LAPACK_TAXONOMY_SMALL).map_err(fail)?;
    let dgbsv =
        fixture["routines"].as_array().unwrap().iter().find(|r| r["id"] == "DGBSV").ok_or("no DGBSV in fixture")?;
    let params: Vec<&str> =
        dgbsv["parameters"].as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap()).collect();
    let tax = Taxonomy::from_json(data::LAPACK_TAXONOMY_SMALL).map_err(fail)?;

    let f90 = render_routine_template(&tax, "DGBSV", Language::Fortran90).map_err(fail)?;
    let c = render_routine_template(&tax, "DGBSV", Language::C).map_err(fail)?;
    for (lang, declared) in [("fortran90", fortran_declared(&f90)), ("c", c_declared(&c))] {
        for p in &params {
            let count = declared.iter().filter(|d| d == p).count();
            ensure(count == 1, || format!("{lang}: {p} declared {count} times"))?;
        }
    }
    let call = f90.lines().find(|l| l.trim_start().starts_with("call DGBSV(")).ok_or("no call to DGBSV")?;
    let args = call.split_once('(').unwrap().1.trim_end().trim_end_matches(')').split(',').count();
    ensure(args == params.len(), || format!("call passes {args} arguments for {} parameters", params.len()))?;
    fortran_balanced(&f90).map_err(|e| format!("fortran90: {e}"))?;
    c_balanced(&c).map_err(|e| format!("c: {e}"))?;
    ensure(f90 == render_routine_template(&tax, "DGBSV", Language::Fortran90).map_err(fail)?, || {
        "render not deterministic".into()
    })?;

    let full = Taxonomy::bundled();
    let mut bundles = 0;
    for r in full.routines() {
        for lang in Language::ALL {
            let b = routine_bundle(&full, &r.id, lang).map_err(|e| format!("{} {lang}: {e}", r.id))?;
            ensure(complete(&b), || format!("{} {lang}: files {:?}", r.id, b.paths()))?;
            reproducible(&b).map_err(|e| format!("{} {lang}: {e}", r.id))?;
            bundles += 1;
        }
    }
    let mut configs: Vec<SolverConfig> = Vec::new();
    for m in LINEAR_METHODS {
        configs.push(SolverConfig::new(m, None).map_err(fail)?);
        for p in PRECONDITIONERS {
            configs.push(SolverConfig::new(m, Some(p)).map_err(fail)?);
        }
    }
    for m in EIGEN_METHODS {
        configs.push(SolverConfig::new(m, None).map_err(fail)?);
    }
    for parallel in [false, true] {
        let mut requests: Vec<(BundleKind, Option<&SolverConfig>)> =
            vec![(BundleKind::PropertiesProgram, None), (BundleKind::DefaultSolver, None)];
        requests.extend(configs.iter().map(|c| (BundleKind::RecommendedSolver, Some(c))));
        for (kind, rec) in requests {
            let b = generate_solver_bundle(kind, rec, parallel).map_err(|e| format!("{kind} {rec:?}: {e}"))?;
            ensure(complete(&b), || format!("{kind} {rec:?}: files {:?}", b.paths()))?;
            reproducible(&b).map_err(|e| format!("{kind}: {e}"))?;
            bundles += 1;
        }
    }
    Ok(format!(
        "DGBSV declares {} parameters once each, balanced; {bundles} bundles complete and byte-reproducible",
        params.len()
    ))
}

// ------------------------------------------------------------------ service

fn service_walkthrough() -> Outcome {
    let rt = tokio::runtime::Runtime::new().map_err(fail)?;
    rt.block_on(walkthrough())
}

async fn walkthrough() -> Outcome {
    let h = common::start(|_| {}).await;
    let (status, mut v) = h.post("/api/guided/LAPACK/start", json!({})).await;
    ensure(status == 200, || format!("start: {status} {v}"))?;
    let id = v["session_id"].as_str().ok_or("no session id")?.to_string();
    let answers = std::fs::read_to_string(common::fixture("dgbsv_answers.txt")).map_err(fail)?;
    for text in answers.lines().filter(|l| !l.trim().is_empty()) {
        let key = v["options"]
            .as_array()
            .and_then(|os| os.iter().find(|o| o["text"] == text))
            .and_then(|o| o["key"].as_str())
            .ok_or_else(|| format!("`{text}` not offered: {v}"))?
            .to_string();
        let (status, next) = h.post(&format!("/api/guided/{id}/answer"), json!({ "option": key })).await;
        ensure(status == 200, || format!("answer {key}: {status} {next}"))?;
        v = next;
    }
    ensure(v["finished"] == json!(true) && v["candidates"] == json!(["DGBSV"]), || format!("guided result {v}"))?;
    ensure(v["message"] == json!("End of guided search! Check out the result."), || {
        format!("message {}", v["message"])
    })?;

    let matrix = "%%MatrixMarket matrix coordinate real general\n3 3 5\n1 1 4\n2 2 4\n3 3 4\n1 2 -1\n2 1 -2\n";
    let (status, up) = h.upload("small.mtx", matrix.as_bytes().to_vec()).await;
    ensure(status == 201, || format!("upload: {status} {up}"))?;
    let upload_id = up["upload_id"].as_str().ok_or("no upload id")?.to_string();
    let stored_upload = h.uploads_dir().join(format!("{upload_id}.mtx"));
    ensure(stored_upload.exists(), || "upload not on disk".into())?;
    let (status, f) = h.get(&format!("/api/matrix/{upload_id}/features")).await;
    ensure(status == 200, || format!("features: {status} {f}"))?;
    let dense: Dense = vec![vec![4.0, -1.0, 0.0], vec![-2.0, 4.0, 0.0], vec![0.0, 0.0, 4.0]];
    for (name, want) in dense_features(&dense) {
        let got = f["features"][name].as_f64().ok_or_else(|| format!("feature {name} missing"))?;
        ensure((got - want).abs() <= 1e-12 * want.abs().max(1.0), || format!("{name} = {got}, expected {want}"))?;
    }

    let (status, rec) = h.post("/api/recommend", json!({ "upload_id": upload_id })).await;
    ensure(status == 200, || format!("recommend: {status} {rec}"))?;
    let (status, b) = h
        .post(
            "/api/bundle",
            json!({ "kind": "recommended_solver", "recommendation": rec["best"], "upload_id": upload_id }),
        )
        .await;
    ensure(status == 201, || format!("bundle: {status} {b}"))?;
    let download_id = b["download_id"].as_str().ok_or("no download id")?.to_string();
    let stored = h.downloads_dir().join(format!("{download_id}.zip"));
    ensure(stored.exists(), || "archive not on disk".into())?;

    let r = h.client.get(h.url(&format!("/api/download/{download_id}"))).send().await.map_err(fail)?;
    ensure(r.status().as_u16() == 200, || format!("download: {}", r.status()))?;
    let bytes = r.bytes().await.map_err(fail)?;
    let bundle = unpack_archive(&bytes).map_err(fail)?;
    ensure(complete(&bundle), || format!("downloaded files {:?}", bundle.paths()))?;
    ensure(!stored.exists(), || "archive still on disk after delivery".into())?;
    ensure(!stored_upload.exists(), || "upload still on disk after delivery".into())?;
    let (status, again) = h.get(&format!("/api/download/{download_id}")).await;
    ensure(status == 410, || format!("re-download: {status} {again}"))?;
    let best = rec["best"].as_str().unwrap_or_default().to_string();
    h.server.stop().await.map_err(fail)?;
    Ok(format!("guided -> DGBSV; features match; recommended {best}; download then 410; files removed"))
}
