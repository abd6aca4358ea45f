use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{MlError, Result};

/// Principal components of standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// Features kept after dropping constant columns, in input order.
    pub feature_names: Vec<String>,
    pub dropped: Vec<String>,
    pub mean: Vec<f64>,
    pub std_dev: Vec<f64>,
    /// `components[k][j]` is the loading of feature `j` on component `k`.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalues of the correlation matrix, descending.
    pub explained_variance: Vec<f64>,
    pub selected: Vec<String>,
}

impl PcaResult {
    pub fn total_variance(&self) -> f64 {
        self.explained_variance.iter().sum()
    }

    /// Fraction of the total variance carried by the first `k` components.
    pub fn explained_ratio(&self, k: usize) -> f64 {
        self.explained_variance.iter().take(k).sum::<f64>() / self.total_variance()
    }
}

/// Fits PCA on rows of `samples`, one column per name in `names`.
///
/// Each kept column is standardized to zero mean and unit sample variance, so
/// the eigen decomposition is of the correlation matrix.
pub fn fit_pca(names: &[String], samples: &[Vec<f64>]) -> Result<PcaResult> {
    let n = samples.len();
    if n < 2 {
        return Err(MlError::TooFewSamples(n));
    }
    let p = names.len();
    if let Some(row) = samples.iter().position(|r| r.len() != p) {
        return Err(MlError::RowWidth { row, expected: p, found: samples[row].len() });
    }
    if let Some((i, j)) =
        samples.iter().enumerate().find_map(|(i, r)| r.iter().position(|v| !v.is_finite()).map(|j| (i, j)))
    {
        return Err(MlError::NonFinite { feature: names[j].clone(), problem: format!("row {i}") });
    }

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut mean = Vec::new();
    let mut std_dev = Vec::new();
    for (j, name) in names.iter().enumerate() {
        let m = samples.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = samples.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        if sd <= 1e-12 * m.abs().max(1.0) {
            dropped.push(name.clone());
        } else {
            kept.push(j);
            mean.push(m);
            std_dev.push(sd);
        }
    }
    if kept.is_empty() {
        return Err(MlError::ConstantData);
    }

    let z = DMatrix::from_fn(n, kept.len(), |i, k| (samples[i][kept[k]] - mean[k]) / std_dev[k]);
    let cov = (z.transpose() * &z) / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..kept.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut components = Vec::with_capacity(kept.len());
    let mut explained_variance = Vec::with_capacity(kept.len());
    for &k in &order {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        // fix the sign so the largest-magnitude loading is positive
        let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        explained_variance.push(eig.eigenvalues[k].max(0.0));
    }

    Ok(PcaResult {
        feature_names: kept.iter().map(|&j| names[j].clone()).collect(),
        dropped,
        mean,
        std_dev,
        components,
        explained_variance,
        selected: Vec::new(),
    })
}

/// Picks `k` original features: for each leading component in turn, the
/// not-yet-chosen feature with the largest absolute loading. Equal loadings go
/// to the lexicographically smaller name.
pub fn select_features(pca: &PcaResult, k: usize) -> Result<Vec<String>> {
    let available = pca.feature_names.len();
    if k == 0 || k > available {
        return Err(MlError::InvalidK { k, available });
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for component in pca.components.iter().cycle() {
        if chosen.len() == k {
            break;
        }
        let pick = (0..available).filter(|j| !chosen.contains(j)).max_by(|&a, &b| {
            component[a]
                .abs()
                .total_cmp(&component[b].abs())
                .then_with(|| pca.feature_names[b].cmp(&pca.feature_names[a]))
        });
        chosen.extend(pick);
    }
    Ok(chosen.into_iter().map(|j| pca.feature_names[j].clone()).collect())
}
