//! Synthetic data: benchmark corpora with heuristic timings, and small
//! generators used by tests and the acceptance suite.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use super::{LabeledInstance, RequestSpec, RunRecord, SolverConfig, Spectrum};
use crate::matfeat::{compute_extended_features, SparseMatrix};

/// Standard normal sample by the Box-Muller transform.
pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Labeled instance whose near-best set is just its best configuration.
pub fn instance(id: &str, features: &[(&str, f64)], best: &str) -> LabeledInstance {
    let best: SolverConfig = best.parse().expect("valid label");
    LabeledInstance {
        problem_id: id.to_string(),
        features: features.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        near_best: BTreeSet::from([best.clone()]),
        best,
    }
}

const SOME_CONFIGS: &[&str] = &[
    "cg+jacobi",
    "gmres+ilu(k)[levels=0]",
    "gmres+ilu(k)[levels=1]",
    "bicgstab+asm",
    "tfqmr",
    "bicg+sor",
    "fgmres+block_jacobi",
    "krylovschur",
    "lanczos",
];

/// Runs with random times and outcomes for `n_problems` problems. With
/// `grid_times` the times come from a coarse grid so exact ties and exact
/// ratio boundaries occur; otherwise they are continuous.
pub fn random_runs(rng: &mut impl Rng, n_problems: usize, grid_times: bool) -> Vec<RunRecord> {
    let mut runs = Vec::new();
    for p in 0..n_problems {
        let eigen = rng.gen_bool(0.3);
        let request = RequestSpec {
            n_eigenvalues: eigen.then(|| rng.gen_range(1..6)),
            spectrum: eigen.then(|| Spectrum::ALL[rng.gen_range(0..Spectrum::ALL.len())]),
            tolerance: rng.gen_bool(0.5).then_some(1e-8),
            processors: Some(rng.gen_range(1..5)),
        };
        let features = BTreeMap::from([("x".to_string(), rng.gen_range(0.0..1.0)), ("y".to_string(), p as f64)]);
        let n_configs = rng.gen_range(1..=SOME_CONFIGS.len());
        let mut labels: Vec<&str> = SOME_CONFIGS.to_vec();
        for _ in 0..n_configs {
            let label = labels.swap_remove(rng.gen_range(0..labels.len()));
            runs.push(RunRecord {
                problem_id: format!("p{p}"),
                features: features.clone(),
                config: label.parse().expect("valid label"),
                converged: rng.gen_bool(0.8),
                time_seconds: if grid_times { rng.gen_range(10..40) as f64 * 0.25 } else { rng.gen_range(2.5..10.0) },
                residual: Some(10f64.powf(rng.gen_range(-11.0..-6.0))),
                converged_count: eigen.then(|| rng.gen_range(0..7)),
                request: request.clone(),
            });
        }
    }
    runs
}

/// Named feature columns and their sample rows.
pub struct Corpus {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Nine features driven by three uncorrelated latent variables. `f1`..`f3`
/// are the latents themselves; the other six mix them, so every component
/// beyond the third has zero variance and the leading loadings single out
/// `f1`, `f2`, `f3`.
pub fn latent_corpus(rng: &mut impl Rng, n: usize) -> Corpus {
    // Gram-Schmidt on centered columns so the latents are exactly uncorrelated
    let mut z: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| standard_normal(rng)).collect()).collect();
    for k in 0..3 {
        let mean = z[k].iter().sum::<f64>() / n as f64;
        z[k].iter_mut().for_each(|v| *v -= mean);
        for j in 0..k {
            let proj = z[k].iter().zip(&z[j]).map(|(a, b)| a * b).sum::<f64>();
            let (zj, zk) = (z[j].clone(), &mut z[k]);
            zk.iter_mut().zip(&zj).for_each(|(a, b)| *a -= proj * b);
        }
        let norm = z[k].iter().map(|v| v * v).sum::<f64>().sqrt();
        z[k].iter_mut().for_each(|v| *v /= norm);
    }
    let (r2, r5) = (2f64.sqrt(), 5f64.sqrt());
    let mix: [(&str, [f64; 3]); 9] = [
        ("f1", [1.0, 0.0, 0.0]),
        ("f2", [0.0, 1.0, 0.0]),
        ("f3", [0.0, 0.0, 1.0]),
        ("g1", [1.0 / r2, 1.0 / r2, 0.0]),
        ("g2", [1.0 / r2, -1.0 / r2, 0.0]),
        ("g3", [1.0 / r2, 0.0, 1.0 / r2]),
        ("g4", [1.0 / r2, 0.0, -1.0 / r2]),
        ("g5", [1.0 / r5, 2.0 / r5, 0.0]),
        ("g6", [1.0 / r5, -2.0 / r5, 0.0]),
    ];
    let rows = (0..n)
        .map(|i| mix.iter().map(|(_, w)| 10.0 * (w[0] * z[0][i] + w[1] * z[1][i] + w[2] * z[2][i])).collect())
        .collect();
    Corpus { names: mix.iter().map(|(n, _)| n.to_string()).collect(), rows }
}

/// The fixed depth-3 tree behind [`hidden_tree_dataset`].
pub fn hidden_tree_label(f: &BTreeMap<String, f64>) -> SolverConfig {
    let x = |k: &str| f[k];
    let label = if x("x1") <= 0.5 {
        if x("x2") <= 0.3 {
            if x("x3") <= 0.6 {
                "cg"
            } else {
                "gmres"
            }
        } else if x("x4") <= 0.4 {
            "bicg"
        } else {
            "cg"
        }
    } else if x("x3") <= 0.7 {
        if x("x2") <= 0.5 {
            "tfqmr"
        } else {
            "gmres"
        }
    } else if x("x4") <= 0.2 {
        "bicgstab"
    } else {
        "bicg"
    };
    label.parse().expect("valid label")
}

/// Uniform points in the unit 4-cube labeled by [`hidden_tree_label`].
pub fn hidden_tree_dataset(
    rng: &mut impl Rng,
    n: usize,
) -> (Vec<LabeledInstance>, fn(&BTreeMap<String, f64>) -> SolverConfig) {
    let data = (0..n)
        .map(|i| {
            let features: BTreeMap<String, f64> =
                ["x1", "x2", "x3", "x4"].iter().map(|k| (k.to_string(), rng.gen_range(0.0..1.0))).collect();
            let best = hidden_tree_label(&features);
            LabeledInstance { problem_id: format!("h{i}"), features, near_best: BTreeSet::from([best.clone()]), best }
        })
        .collect();
    (data, hidden_tree_label)
}

/// Random features with labels drawn independently of them.
pub fn random_label_dataset(rng: &mut impl Rng, n: usize, classes: usize) -> Vec<LabeledInstance> {
    let labels = ["cg", "gmres", "bicg", "tfqmr", "cgs", "bicgstab", "fgmres"];
    (0..n)
        .map(|i| {
            let fs: Vec<(&str, f64)> = ["a", "b", "c"].iter().map(|k| (*k, rng.gen_range(0.0..1.0))).collect();
            instance(&format!("r{i}"), &fs, labels[rng.gen_range(0..classes.min(labels.len()))])
        })
        .collect()
}

/// Random sparse matrix with about `density * n * n` entries.
pub fn random_sparse(rng: &mut impl Rng, n: usize, density: f64) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if rng.gen_bool(density) {
                t.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, t).expect("positive size")
}

/// Matrix families of the synthetic corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Laplacian,
    ConvectionDiffusion,
    DominantRandom,
    WeakRandom,
    Indefinite,
}

pub const FAMILIES: [Family; 5] =
    [Family::Laplacian, Family::ConvectionDiffusion, Family::DominantRandom, Family::WeakRandom, Family::Indefinite];

pub fn family_matrix(rng: &mut impl Rng, family: Family) -> SparseMatrix {
    let m = rng.gen_range(4..10);
    let scale = 10f64.powf(rng.gen_range(-2.0..3.0));
    let mut t = Vec::new();
    let n = match family {
        Family::Laplacian | Family::ConvectionDiffusion => {
            let c = if family == Family::ConvectionDiffusion { rng.gen_range(0.2..0.9) } else { 0.0 };
            let n = m * m;
            for i in 0..m {
                for j in 0..m {
                    let k = i * m + j;
                    t.push((k, k, 4.0));
                    if j + 1 < m {
                        t.push((k, k + 1, -1.0 + c));
                        t.push((k + 1, k, -1.0 - c));
                    }
                    if i + 1 < m {
                        t.push((k, k + m, -1.0 + c));
                        t.push((k + m, k, -1.0 - c));
                    }
                }
            }
            n
        }
        Family::DominantRandom | Family::WeakRandom => {
            let n = m * rng.gen_range(3..9);
            let density = rng.gen_range(0.02..0.2);
            let mut row_sums = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.gen_bool(density) {
                        let v = rng.gen_range(-1.0..1.0);
                        row_sums[i] += f64::abs(v);
                        t.push((i, j, v));
                    }
                }
            }
            for (i, s) in row_sums.iter().enumerate() {
                let d = if family == Family::DominantRandom {
                    s * rng.gen_range(1.1..2.0) + 0.1
                } else {
                    s * rng.gen_range(0.05..0.6) + 0.01
                };
                t.push((i, i, if rng.gen_bool(0.5) { d } else { -d }));
            }
            n
        }
        Family::Indefinite => {
            let n = m * rng.gen_range(4..9);
            let bw = rng.gen_range(1..4);
            for i in 0..n {
                t.push((i, i, rng.gen_range(-3.0..3.0)));
                for d in 1..=bw {
                    if i + d < n {
                        let v = rng.gen_range(-1.0..1.0);
                        t.push((i, i + d, v));
                        t.push((i + d, i, v));
                    }
                }
            }
            n
        }
    };
    let t = t.into_iter().map(|(i, j, v)| (i, j, v * scale));
    SparseMatrix::from_triplets(n, n, t).expect("positive size")
}

fn round6(v: f64) -> f64 {
    format!("{v:.5e}").parse().expect("formatted float")
}

/// Preconditioner column values used by the PETSc corpora.
pub const CORPUS_PRECONDITIONERS: &[Option<&str>] =
    &[None, Some("jacobi"), Some("ilu(k)[levels=0]"), Some("block_jacobi"), Some("asm")];

/// Linear-solver benchmark corpus over random matrices with heuristic times.
///
/// Features are the thirty extended properties. In parallel corpora each
/// problem also has a processor count; incomplete factorization does not run
/// in parallel, and block Jacobi and additive Schwarz scale best.
pub fn petsc_corpus(rng: &mut impl Rng, n_problems: usize, parallel: bool) -> Vec<RunRecord> {
    let mut runs = Vec::new();
    for p in 0..n_problems {
        let family = FAMILIES[p % FAMILIES.len()];
        let a = family_matrix(rng, family);
        let f = compute_extended_features(&a).expect("square");
        let features: BTreeMap<String, f64> =
            f.entries().into_iter().map(|(k, v)| (k.to_string(), round6(v))).collect();
        let procs = if parallel { [2u32, 4, 8, 16][rng.gen_range(0..4)] } else { 1 };
        let symmetric = f.antisymmetric_frobenius_norm <= 1e-12 * f.frobenius_norm;
        let positive_diag = f.diagonal_sign_changes == 0.0 && f.diagonal_mean > 0.0;
        let dominance = f.diagonal_dominance_fraction;
        let n = f.n_rows;
        let difficulty = 1.0 + 6.0 * (1.0 - dominance) + 0.02 * n.sqrt() * (1.0 + f.bandwidth_upper / n);
        for method in super::LINEAR_METHODS {
            for pc in CORPUS_PRECONDITIONERS {
                let label = match pc {
                    Some(pc) => format!("{method}+{pc}"),
                    None => method.to_string(),
                };
                let config: SolverConfig = label.parse().expect("valid label");
                let (mut ok, method_cost) = match *method {
                    "cg" => (symmetric && positive_diag, 1.0),
                    "cgs" => (dominance > 0.3 || rng.gen_bool(0.3), 0.85),
                    "bicg" => (true, 1.3),
                    "bicgstab" => (dominance > 0.1 || rng.gen_bool(0.5), 0.9),
                    "gmres" => (true, 1.0 + n / 400.0),
                    "fgmres" => (true, 1.1 + n / 400.0),
                    _ => (dominance > 0.2 || rng.gen_bool(0.6), 1.05),
                };
                let pc_name = pc.map(|s| s.split('[').next().unwrap_or(s));
                let (reduction, setup, pc_parallel) = match pc_name {
                    None => (1.0, 0.0, 1.0),
                    Some("jacobi") => (if dominance > 0.5 { 0.6 } else { 0.95 }, 0.2, 1.0),
                    Some("ilu(k)") => (0.3, 3.0, 0.0),
                    Some("block_jacobi") => (0.4 + 0.04 * procs as f64, 2.0, 1.0),
                    _ => (0.35 + 0.02 * procs as f64, 3.0, 1.2),
                };
                if parallel && pc_parallel == 0.0 {
                    ok = false;
                }
                if family == Family::WeakRandom && pc_name.is_none() && rng.gen_bool(0.5) {
                    ok = false;
                }
                let iters = (difficulty * reduction * method_cost * 10.0).max(1.0);
                let work = iters * (f.nnz + 4.0 * n) + setup * f.nnz;
                let speedup = if parallel { (procs as f64).powf(0.8) * pc_parallel } else { 1.0 };
                let noise = (0.15 * standard_normal(rng)).exp();
                let time = round6(work * 1e-7 / speedup * noise + 1e-5);
                runs.push(RunRecord {
                    problem_id: format!("{}{p:03}", if parallel { "par" } else { "seq" }),
                    features: features.clone(),
                    config,
                    converged: ok,
                    time_seconds: time,
                    residual: Some(if ok { round6(10f64.powf(rng.gen_range(-12.0..-8.5))) } else { 1e-3 }),
                    converged_count: None,
                    request: RequestSpec { tolerance: Some(1e-8), processors: Some(procs), ..RequestSpec::default() },
                });
            }
        }
    }
    runs
}

pub const CORPUS_EIGEN_METHODS: &[&str] = &["power", "subspace", "arnoldi", "lanczos", "krylovschur"];

/// Small eigensolver corpus over the request parameters of each problem.
pub fn slepc_corpus(rng: &mut impl Rng, n_problems: usize) -> Vec<RunRecord> {
    let mut runs = Vec::new();
    for p in 0..n_problems {
        let family = FAMILIES[p % FAMILIES.len()];
        let a = family_matrix(rng, family);
        let f = compute_extended_features(&a).expect("square");
        let features: BTreeMap<String, f64> = [
            ("n_rows", f.n_rows),
            ("nnz", f.nnz),
            ("frobenius_norm", round6(f.frobenius_norm)),
            ("antisymmetric_frobenius_norm", round6(f.antisymmetric_frobenius_norm)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let symmetric = f.antisymmetric_frobenius_norm == 0.0;
        let nev = [1u32, 4, 10][rng.gen_range(0..3)];
        let spectrum =
            [Spectrum::LargestMagnitude, Spectrum::SmallestMagnitude, Spectrum::LargestReal][rng.gen_range(0..3)];
        let tolerance: f64 = [1e-4, 1e-8, 1e-10][rng.gen_range(0..3)];
        let processors = [1u32, 4][rng.gen_range(0..2)];
        for method in CORPUS_EIGEN_METHODS {
            let (ok, cost) = match *method {
                "power" => (nev == 1 && spectrum == Spectrum::LargestMagnitude, 0.6),
                "subspace" => (true, 2.5),
                "arnoldi" => (true, 1.2),
                "lanczos" => (symmetric, 0.8),
                _ => (true, 1.0),
            };
            let hard = if spectrum == Spectrum::SmallestMagnitude { 3.0 } else { 1.0 };
            let digits = -tolerance.log10();
            let work = cost * hard * digits * (nev as f64 + 2.0) * (f.nnz + 10.0 * f.n_rows);
            let time = round6(work * 2e-7 / (processors as f64).powf(0.7) * (0.1 * standard_normal(rng)).exp());
            let converged_count = if ok { nev + rng.gen_range(0..2) } else { rng.gen_range(0..nev) };
            runs.push(RunRecord {
                problem_id: format!("eig{p:02}"),
                features: features.clone(),
                config: method.parse().expect("valid label"),
                converged: ok,
                time_seconds: time,
                residual: Some(if ok { round6(tolerance * rng.gen_range(0.01..0.9)) } else { tolerance * 10.0 }),
                converged_count: Some(converged_count),
                request: RequestSpec {
                    n_eigenvalues: Some(nev),
                    spectrum: Some(spectrum),
                    tolerance: Some(tolerance),
                    processors: Some(processors),
                },
            });
        }
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlselect::{derive_labels, read_runs, write_runs, DEFAULT_TIME_RATIO};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn corpora_label_every_problem() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for parallel in [false, true] {
            let runs = petsc_corpus(&mut rng, 10, parallel);
            assert_eq!(runs.len(), 10 * 7 * CORPUS_PRECONDITIONERS.len());
            let r = derive_labels(&runs, 1e-8, DEFAULT_TIME_RATIO).unwrap();
            assert_eq!(r.instances.len(), 10);
            if parallel {
                assert!(r.instances.iter().all(|i| i.best.preconditioner.as_deref() != Some("ilu(k)")));
            }
        }
        let runs = slepc_corpus(&mut rng, 12);
        let r = derive_labels(&runs, 1e-8, DEFAULT_TIME_RATIO).unwrap();
        assert_eq!(r.instances.len(), 12);
    }

    #[test]
    fn corpus_csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let runs = petsc_corpus(&mut rng, 3, true);
        let mut buf = Vec::new();
        write_runs(&runs, &mut buf).unwrap();
        assert_eq!(read_runs(buf.as_slice()).unwrap(), runs);
    }
}
