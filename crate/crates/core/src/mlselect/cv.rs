use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::classifier::{Classifier, Trainer};
use super::tree::TreeParams;
use super::{LabeledInstance, MlError, Result, SolverConfig};

/// How a prediction is scored against the true best configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    /// Correct when the true best is anywhere in the predicted set.
    BestInPredicted,
    /// Correct only when the predicted best equals the true best.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub fold_sizes: Vec<usize>,
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
}

/// Fraction of `data` the classifier gets right under `scoring`.
pub fn accuracy(model: &dyn Classifier, data: &[LabeledInstance], scoring: Scoring) -> Result<f64> {
    if data.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    let mut hits = 0;
    for d in data {
        let p = model.predict(&d.features)?;
        let ok = match scoring {
            Scoring::BestInPredicted => p.configs.contains(&d.best),
            Scoring::Strict => p.best == d.best,
        };
        hits += usize::from(ok);
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Stratified folds: each label's members are shuffled with a seeded RNG and
/// dealt round-robin, continuing across labels, so fold sizes differ by at
/// most one and every label is spread evenly.
pub fn stratified_folds(data: &[LabeledInstance], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > data.len() {
        return Err(MlError::BadFolds { k, n: data.len() });
    }
    let mut by_label: BTreeMap<&SolverConfig, Vec<usize>> = BTreeMap::new();
    for (i, d) in data.iter().enumerate() {
        by_label.entry(&d.best).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for members in by_label.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[next % k].push(i);
            next += 1;
        }
    }
    Ok(folds)
}

/// k-fold cross-validation with stratified seeded folds.
pub fn cross_validate(
    data: &[LabeledInstance],
    k: usize,
    seed: u64,
    trainer: &dyn Trainer,
    params: &TreeParams,
    scoring: Scoring,
) -> Result<CvReport> {
    let folds = stratified_folds(data, k, seed)?;
    let mut report = cross_validate_folds(data, &folds, trainer, params, scoring)?;
    report.seed = seed;
    Ok(report)
}

/// Cross-validation over caller-supplied folds of indices into `data`.
pub fn cross_validate_folds(
    data: &[LabeledInstance],
    folds: &[Vec<usize>],
    trainer: &dyn Trainer,
    params: &TreeParams,
    scoring: Scoring,
) -> Result<CvReport> {
    if folds.len() < 2 || folds.iter().any(Vec::is_empty) {
        return Err(MlError::BadFolds { k: folds.len(), n: data.len() });
    }
    let mut fold_accuracy = Vec::with_capacity(folds.len());
    for (f, test_idx) in folds.iter().enumerate() {
        let train: Vec<LabeledInstance> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, idx)| idx.iter().map(|&i| data[i].clone()))
            .collect();
        let test: Vec<LabeledInstance> = test_idx.iter().map(|&i| data[i].clone()).collect();
        let model = trainer.train(&train, params)?;
        fold_accuracy.push(accuracy(model.as_ref(), &test, scoring)?);
    }
    let mean_accuracy = fold_accuracy.iter().sum::<f64>() / fold_accuracy.len() as f64;
    Ok(CvReport {
        k: folds.len(),
        seed: 0,
        fold_sizes: folds.iter().map(Vec::len).collect(),
        fold_accuracy,
        mean_accuracy,
    })
}
