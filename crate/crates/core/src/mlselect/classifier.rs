use std::collections::{BTreeMap, BTreeSet};

use super::tree::{induce_tree_with, ClassifierModel, CriterionRegistry, TreeParams};
use super::{LabeledInstance, MlError, Result, SolverConfig};

/// What a classifier returns for one feature vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub best: SolverConfig,
    pub configs: BTreeSet<SolverConfig>,
}

/// A trained model that maps features to solver configurations.
pub trait Classifier: Send + Sync {
    fn kind(&self) -> &'static str;
    fn predict(&self, features: &BTreeMap<String, f64>) -> Result<Prediction>;
}

/// Builds a classifier from labeled data.
pub trait Trainer: Send + Sync {
    fn name(&self) -> &'static str;
    fn train(&self, data: &[LabeledInstance], params: &TreeParams) -> Result<Box<dyn Classifier>>;
}

impl Classifier for ClassifierModel {
    fn kind(&self) -> &'static str {
        "decision_tree"
    }

    fn predict(&self, features: &BTreeMap<String, f64>) -> Result<Prediction> {
        Ok(Prediction { best: self.predict_best(features)?, configs: ClassifierModel::predict(self, features)? })
    }
}

pub struct DecisionTreeTrainer {
    criteria: CriterionRegistry,
}

impl DecisionTreeTrainer {
    pub fn new(criteria: CriterionRegistry) -> Self {
        Self { criteria }
    }
}

impl Default for DecisionTreeTrainer {
    fn default() -> Self {
        Self::new(CriterionRegistry::standard())
    }
}

impl Trainer for DecisionTreeTrainer {
    fn name(&self) -> &'static str {
        "decision_tree"
    }

    fn train(&self, data: &[LabeledInstance], params: &TreeParams) -> Result<Box<dyn Classifier>> {
        Ok(Box::new(induce_tree_with(data, params, &self.criteria)?))
    }
}

/// Baseline that always predicts the most frequent best configuration.
pub struct MajorityTrainer;

struct MajorityModel(Prediction);

impl Classifier for MajorityModel {
    fn kind(&self) -> &'static str {
        "majority"
    }

    fn predict(&self, _: &BTreeMap<String, f64>) -> Result<Prediction> {
        Ok(self.0.clone())
    }
}

impl Trainer for MajorityTrainer {
    fn name(&self) -> &'static str {
        "majority"
    }

    fn train(&self, data: &[LabeledInstance], _: &TreeParams) -> Result<Box<dyn Classifier>> {
        let mut counts: BTreeMap<&SolverConfig, usize> = BTreeMap::new();
        data.iter().for_each(|d| *counts.entry(&d.best).or_default() += 1);
        // BTreeMap order makes the smallest label win ties
        let best = counts
            .iter()
            .fold(None, |acc: Option<(&SolverConfig, usize)>, (c, &n)| match acc {
                Some((_, m)) if m >= n => acc,
                _ => Some((c, n)),
            })
            .ok_or(MlError::EmptyDataset)?
            .0
            .clone();
        Ok(Box::new(MajorityModel(Prediction { configs: BTreeSet::from([best.clone()]), best })))
    }
}

/// Trainers by name.
pub struct TrainerRegistry {
    trainers: Vec<Box<dyn Trainer>>,
}

impl TrainerRegistry {
    pub fn empty() -> Self {
        Self { trainers: Vec::new() }
    }

    /// `decision_tree` and `majority`.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(DecisionTreeTrainer::default()));
        r.register(Box::new(MajorityTrainer));
        r
    }

    pub fn register(&mut self, trainer: Box<dyn Trainer>) {
        self.trainers.retain(|t| t.name() != trainer.name());
        self.trainers.push(trainer);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Trainer> {
        self.trainers
            .iter()
            .find(|t| t.name() == name)
            .map(|t| t.as_ref())
            .ok_or_else(|| MlError::UnknownTrainer(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.trainers.iter().map(|t| t.name()).collect()
    }
}
