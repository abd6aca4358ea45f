use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{MatfeatError, Result, SparseMatrix};

/// A named scalar property of a square sparse matrix.
pub trait MatrixFeature: Send + Sync {
    fn name(&self) -> &'static str;
    fn compute(&self, ctx: &FeatureContext<'_>) -> f64;
}

/// Feature backed by a plain function.
pub struct FnFeature {
    name: &'static str,
    f: fn(&FeatureContext<'_>) -> f64,
}

impl FnFeature {
    pub const fn new(name: &'static str, f: fn(&FeatureContext<'_>) -> f64) -> Self {
        Self { name, f }
    }
}

impl MatrixFeature for FnFeature {
    fn name(&self) -> &'static str {
        self.name
    }

    fn compute(&self, ctx: &FeatureContext<'_>) -> f64 {
        (self.f)(ctx)
    }
}

/// Per-call view of a matrix with its transpose built on first use.
pub struct FeatureContext<'a> {
    matrix: &'a SparseMatrix,
    transpose: OnceCell<SparseMatrix>,
}

impl<'a> FeatureContext<'a> {
    pub fn new(matrix: &'a SparseMatrix) -> Self {
        Self { matrix, transpose: OnceCell::new() }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        self.matrix
    }

    pub fn transpose(&self) -> &SparseMatrix {
        self.transpose.get_or_init(|| self.matrix.transpose())
    }

    /// Calls `f(a_ij, a_ji)` for every (i, j) where either entry is stored.
    fn for_each_pair(&self, i: usize, mut f: impl FnMut(usize, f64, f64)) {
        let (ac, av) = self.matrix.row(i);
        let (tc, tv) = self.transpose().row(i);
        let (mut p, mut q) = (0, 0);
        while p < ac.len() || q < tc.len() {
            let cp = ac.get(p).copied().unwrap_or(usize::MAX);
            let cq = tc.get(q).copied().unwrap_or(usize::MAX);
            if cp == cq {
                f(cp, av[p], tv[q]);
                p += 1;
                q += 1;
            } else if cp < cq {
                f(cp, av[p], 0.0);
                p += 1;
            } else {
                f(cq, 0.0, tv[q]);
                q += 1;
            }
        }
    }
}

/// Population variance of each row of `m`, zeros included.
fn row_variances(m: &SparseMatrix) -> impl Iterator<Item = f64> + '_ {
    let n = m.n_cols() as f64;
    (0..m.n_rows()).map(move |i| {
        let (_, vals) = m.row(i);
        let mean = vals.iter().sum::<f64>() / n;
        let stored: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum();
        let zeros = (m.n_cols() - vals.len()) as f64 * mean * mean;
        (stored + zeros) / n
    })
}

fn mean(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    xs.sum::<f64>() / n as f64
}

fn max_of(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(0.0, f64::max)
}

fn row_abs_sums(m: &SparseMatrix) -> impl Iterator<Item = f64> + '_ {
    (0..m.n_rows()).map(move |i| m.row(i).1.iter().map(|v| v.abs()).sum())
}

fn part_frobenius(ctx: &FeatureContext<'_>, sign: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..ctx.matrix.n_rows() {
        ctx.for_each_pair(i, |_, a, b| {
            let x = 0.5 * (a + sign * b);
            acc += x * x;
        });
    }
    acc.sqrt()
}

fn part_infinity(ctx: &FeatureContext<'_>, sign: f64) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..ctx.matrix.n_rows() {
        let mut row = 0.0;
        ctx.for_each_pair(i, |_, a, b| row += (0.5 * (a + sign * b)).abs());
        best = best.max(row);
    }
    best
}

fn diag_variance(d: &[f64]) -> f64 {
    let n = d.len() as f64;
    let mu = d.iter().sum::<f64>() / n;
    d.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n
}

fn row_variance(c: &FeatureContext<'_>) -> f64 {
    mean(row_variances(c.matrix), c.matrix.n_rows())
}
fn column_variance(c: &FeatureContext<'_>) -> f64 {
    mean(row_variances(c.transpose()), c.matrix.n_cols())
}
fn diagonal_variance(c: &FeatureContext<'_>) -> f64 {
    diag_variance(&c.matrix.diagonal())
}
fn nnz(c: &FeatureContext<'_>) -> f64 {
    c.matrix.nnz() as f64
}
fn n_rows(c: &FeatureContext<'_>) -> f64 {
    c.matrix.n_rows() as f64
}
fn frobenius_norm(c: &FeatureContext<'_>) -> f64 {
    c.matrix.triplets().map(|(_, _, v)| v * v).sum::<f64>().sqrt()
}
fn symmetric_frobenius_norm(c: &FeatureContext<'_>) -> f64 {
    part_frobenius(c, 1.0)
}
fn antisymmetric_frobenius_norm(c: &FeatureContext<'_>) -> f64 {
    part_frobenius(c, -1.0)
}
fn one_norm(c: &FeatureContext<'_>) -> f64 {
    max_of(row_abs_sums(c.transpose()))
}
fn infinity_norm(c: &FeatureContext<'_>) -> f64 {
    max_of(row_abs_sums(c.matrix))
}
fn symmetric_infinity_norm(c: &FeatureContext<'_>) -> f64 {
    part_infinity(c, 1.0)
}
fn antisymmetric_infinity_norm(c: &FeatureContext<'_>) -> f64 {
    part_infinity(c, -1.0)
}
fn max_nnz_per_row(c: &FeatureContext<'_>) -> f64 {
    (0..c.matrix.n_rows()).map(|i| c.matrix.row_nnz(i)).max().unwrap_or(0) as f64
}
fn trace(c: &FeatureContext<'_>) -> f64 {
    c.matrix.diagonal().iter().sum()
}
fn absolute_trace(c: &FeatureContext<'_>) -> f64 {
    c.matrix.diagonal().iter().map(|x| x.abs()).sum()
}

fn n_cols(c: &FeatureContext<'_>) -> f64 {
    c.matrix.n_cols() as f64
}
fn min_nnz_per_row(c: &FeatureContext<'_>) -> f64 {
    (0..c.matrix.n_rows()).map(|i| c.matrix.row_nnz(i)).min().unwrap_or(0) as f64
}
fn avg_nnz_per_row(c: &FeatureContext<'_>) -> f64 {
    c.matrix.nnz() as f64 / c.matrix.n_rows() as f64
}
fn nnz_fraction(c: &FeatureContext<'_>) -> f64 {
    c.matrix.nnz() as f64 / (c.matrix.n_rows() as f64 * c.matrix.n_cols() as f64)
}
/// Fraction of stored off-diagonal entries whose mirror is also stored;
/// 1 when there are no off-diagonal entries.
fn structural_symmetry_fraction(c: &FeatureContext<'_>) -> f64 {
    let (mut off, mut matched) = (0usize, 0usize);
    for (i, j, _) in c.matrix.triplets() {
        if i != j {
            off += 1;
            if c.transpose().get(i, j) != 0.0 {
                matched += 1;
            }
        }
    }
    if off == 0 {
        1.0
    } else {
        matched as f64 / off as f64
    }
}
fn value_symmetry_flag(c: &FeatureContext<'_>) -> f64 {
    let t = c.transpose();
    f64::from(u8::from(c.matrix.triplets().all(|(i, j, v)| t.get(i, j) == v) && t.nnz() == c.matrix.nnz()))
}
/// Fraction of rows with |a_ii| >= sum of |a_ij| over j != i.
fn diagonal_dominance_fraction(c: &FeatureContext<'_>) -> f64 {
    let m = c.matrix;
    let dominant = (0..m.n_rows())
        .filter(|&i| {
            let (cols, vals) = m.row(i);
            let (mut diag, mut off) = (0.0f64, 0.0);
            for (&j, v) in cols.iter().zip(vals) {
                if j == i {
                    diag = v.abs();
                } else {
                    off += v.abs();
                }
            }
            diag >= off
        })
        .count();
    dominant as f64 / m.n_rows() as f64
}
fn diagonal_mean(c: &FeatureContext<'_>) -> f64 {
    let d = c.matrix.diagonal();
    d.iter().sum::<f64>() / d.len() as f64
}
/// Number of consecutive diagonal pairs with strictly opposite signs.
fn diagonal_sign_changes(c: &FeatureContext<'_>) -> f64 {
    c.matrix.diagonal().windows(2).filter(|w| w[0] * w[1] < 0.0).count() as f64
}
fn max_abs_entry(c: &FeatureContext<'_>) -> f64 {
    max_of(c.matrix.triplets().map(|(_, _, v)| v.abs()))
}
fn min_abs_nonzero(c: &FeatureContext<'_>) -> f64 {
    c.matrix.triplets().map(|(_, _, v)| v.abs()).reduce(f64::min).unwrap_or(0.0)
}
fn row_variance_max(c: &FeatureContext<'_>) -> f64 {
    max_of(row_variances(c.matrix))
}
fn column_variance_max(c: &FeatureContext<'_>) -> f64 {
    max_of(row_variances(c.transpose()))
}
fn bandwidth_lower(c: &FeatureContext<'_>) -> f64 {
    c.matrix.triplets().filter(|(i, j, _)| i > j).map(|(i, j, _)| i - j).max().unwrap_or(0) as f64
}
fn bandwidth_upper(c: &FeatureContext<'_>) -> f64 {
    c.matrix.triplets().filter(|(i, j, _)| j > i).map(|(i, j, _)| j - i).max().unwrap_or(0) as f64
}

const TABLE1: [FnFeature; 15] = [
    FnFeature::new("row_variance", row_variance),
    FnFeature::new("column_variance", column_variance),
    FnFeature::new("diagonal_variance", diagonal_variance),
    FnFeature::new("nnz", nnz),
    FnFeature::new("n_rows", n_rows),
    FnFeature::new("frobenius_norm", frobenius_norm),
    FnFeature::new("symmetric_frobenius_norm", symmetric_frobenius_norm),
    FnFeature::new("antisymmetric_frobenius_norm", antisymmetric_frobenius_norm),
    FnFeature::new("one_norm", one_norm),
    FnFeature::new("infinity_norm", infinity_norm),
    FnFeature::new("symmetric_infinity_norm", symmetric_infinity_norm),
    FnFeature::new("antisymmetric_infinity_norm", antisymmetric_infinity_norm),
    FnFeature::new("max_nnz_per_row", max_nnz_per_row),
    FnFeature::new("trace", trace),
    FnFeature::new("absolute_trace", absolute_trace),
];

const EXTRA: [FnFeature; 15] = [
    FnFeature::new("n_cols", n_cols),
    FnFeature::new("min_nnz_per_row", min_nnz_per_row),
    FnFeature::new("avg_nnz_per_row", avg_nnz_per_row),
    FnFeature::new("nnz_fraction", nnz_fraction),
    FnFeature::new("structural_symmetry_fraction", structural_symmetry_fraction),
    FnFeature::new("value_symmetry_flag", value_symmetry_flag),
    FnFeature::new("diagonal_dominance_fraction", diagonal_dominance_fraction),
    FnFeature::new("diagonal_mean", diagonal_mean),
    FnFeature::new("diagonal_sign_changes", diagonal_sign_changes),
    FnFeature::new("max_abs_entry", max_abs_entry),
    FnFeature::new("min_abs_nonzero", min_abs_nonzero),
    FnFeature::new("row_variance_max", row_variance_max),
    FnFeature::new("column_variance_max", column_variance_max),
    FnFeature::new("bandwidth_lower", bandwidth_lower),
    FnFeature::new("bandwidth_upper", bandwidth_upper),
];

/// Ordered collection of features, looked up by name.
pub struct FeatureRegistry {
    features: Vec<Box<dyn MatrixFeature>>,
}

impl FeatureRegistry {
    pub fn empty() -> Self {
        Self { features: Vec::new() }
    }

    /// The fifteen reduced-set features.
    pub fn table1() -> Self {
        let mut r = Self::empty();
        for f in TABLE1 {
            r.register(Box::new(f));
        }
        r
    }

    /// All thirty features: the reduced set followed by the extra fifteen.
    pub fn extended() -> Self {
        let mut r = Self::table1();
        for f in EXTRA {
            r.register(Box::new(f));
        }
        r
    }

    /// Adds a feature; a feature with the same name is replaced in place.
    pub fn register(&mut self, feature: Box<dyn MatrixFeature>) {
        match self.features.iter_mut().find(|f| f.name() == feature.name()) {
            Some(slot) => *slot = feature,
            None => self.features.push(feature),
        }
    }

    pub fn get(&self, name: &str) -> Option<&dyn MatrixFeature> {
        self.features.iter().find(|f| f.name() == name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.features.iter().map(|f| f.name()).collect()
    }

    /// Evaluates every feature in registration order.
    pub fn evaluate(&self, matrix: &SparseMatrix) -> Result<Vec<(&'static str, f64)>> {
        require_square(matrix)?;
        let ctx = FeatureContext::new(matrix);
        Ok(self.features.iter().map(|f| (f.name(), f.compute(&ctx))).collect())
    }

    /// Evaluates every feature and records per-feature wall-clock time.
    pub fn evaluate_timed(&self, matrix: &SparseMatrix) -> Result<(Vec<(&'static str, f64)>, FeatureTiming)> {
        require_square(matrix)?;
        let ctx = FeatureContext::new(matrix);
        let start = Instant::now();
        let mut values = Vec::with_capacity(self.features.len());
        let mut per_feature = Vec::with_capacity(self.features.len());
        for f in &self.features {
            let t0 = Instant::now();
            let v = f.compute(&ctx);
            per_feature.push((f.name().to_string(), t0.elapsed().as_secs_f64()));
            values.push((f.name(), v));
        }
        let total_seconds = start.elapsed().as_secs_f64();
        Ok((values, FeatureTiming { per_feature, total_seconds }))
    }
}

fn require_square(m: &SparseMatrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(MatfeatError::NonSquare { n_rows: m.n_rows(), n_cols: m.n_cols() })
    }
}

macro_rules! feature_struct {
    ($(#[$meta:meta])* $name:ident, $names:ident { $($field:ident),* $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
        pub struct $name {
            $(pub $field: f64,)*
        }

        /// Field names in the fixed column order used for CSV output.
        pub const $names: &[&str] = &[$(stringify!($field)),*];

        impl $name {
            pub fn entries(&self) -> Vec<(&'static str, f64)> {
                vec![$((stringify!($field), self.$field)),*]
            }

            fn from_values(values: &[(&'static str, f64)]) -> Self {
                let get = |name: &str| {
                    values.iter().find(|(n, _)| *n == name).map(|(_, v)| *v).expect("registry covers struct")
                };
                Self { $($field: get(stringify!($field)),)* }
            }

            pub fn to_map(&self) -> BTreeMap<String, f64> {
                self.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect()
            }

            pub fn csv_header() -> String {
                $names.join(",")
            }

            pub fn to_csv_row(&self) -> String {
                self.entries().iter().map(|(_, v)| v.to_string()).collect::<Vec<_>>().join(",")
            }
        }
    };
}

feature_struct! {
    /// The fifteen reduced-set matrix properties.
    FeatureVector, TABLE1_NAMES {
        row_variance, column_variance, diagonal_variance, nnz, n_rows,
        frobenius_norm, symmetric_frobenius_norm, antisymmetric_frobenius_norm,
        one_norm, infinity_norm, symmetric_infinity_norm, antisymmetric_infinity_norm,
        max_nnz_per_row, trace, absolute_trace,
    }
}

feature_struct! {
    /// The thirty-property candidate set; a superset of [`FeatureVector`].
    ExtendedFeatureVector, EXTENDED_NAMES {
        row_variance, column_variance, diagonal_variance, nnz, n_rows,
        frobenius_norm, symmetric_frobenius_norm, antisymmetric_frobenius_norm,
        one_norm, infinity_norm, symmetric_infinity_norm, antisymmetric_infinity_norm,
        max_nnz_per_row, trace, absolute_trace,
        n_cols, min_nnz_per_row, avg_nnz_per_row, nnz_fraction,
        structural_symmetry_fraction, value_symmetry_flag, diagonal_dominance_fraction,
        diagonal_mean, diagonal_sign_changes, max_abs_entry, min_abs_nonzero,
        row_variance_max, column_variance_max, bandwidth_lower, bandwidth_upper,
    }
}

impl ExtendedFeatureVector {
    pub fn reduced(&self) -> FeatureVector {
        FeatureVector::from_values(&self.entries())
    }
}

/// Wall-clock seconds per feature and for the whole pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTiming {
    pub per_feature: Vec<(String, f64)>,
    pub total_seconds: f64,
}

impl FeatureTiming {
    pub fn sum_of_parts(&self) -> f64 {
        self.per_feature.iter().map(|(_, t)| t).sum()
    }
}

pub fn compute_features(matrix: &SparseMatrix) -> Result<FeatureVector> {
    Ok(FeatureVector::from_values(&FeatureRegistry::table1().evaluate(matrix)?))
}

pub fn compute_extended_features(matrix: &SparseMatrix) -> Result<ExtendedFeatureVector> {
    Ok(ExtendedFeatureVector::from_values(&FeatureRegistry::extended().evaluate(matrix)?))
}

pub fn measure_features(matrix: &SparseMatrix) -> Result<(FeatureVector, FeatureTiming)> {
    let (values, timing) = FeatureRegistry::table1().evaluate_timed(matrix)?;
    Ok((FeatureVector::from_values(&values), timing))
}
