//! Solver recommendation from classifiers trained on the bundled benchmark
//! corpora.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use lighthouse_core::data;
use lighthouse_core::matfeat::ExtendedFeatureVector;
use lighthouse_core::mlselect::{
    derive_labels, induce_tree, read_runs, Classifier, ClassifierModel, MlError, RequestSpec, SolverConfig, Spectrum,
    TreeNode, TreeParams, DEFAULT_TIME_RATIO,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Residual tolerance assumed when a request or run names none.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// Processor count assumed for a parallel request that names none.
pub const DEFAULT_PROCESSORS: u32 = 4;

/// Which model answers a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSlot {
    LinearSequential,
    LinearParallel,
    Eigen,
}

impl ModelSlot {
    pub const ALL: [ModelSlot; 3] = [ModelSlot::LinearSequential, ModelSlot::LinearParallel, ModelSlot::Eigen];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelSlot::LinearSequential => "linear_sequential",
            ModelSlot::LinearParallel => "linear_parallel",
            ModelSlot::Eigen => "eigen",
        }
    }

    pub fn corpus(self) -> &'static str {
        match self {
            ModelSlot::LinearSequential => data::PETSC_SEQ_RUNS,
            ModelSlot::LinearParallel => data::PETSC_PAR_RUNS,
            ModelSlot::Eigen => data::SLEPC_RUNS,
        }
    }

    pub fn select(eigen: bool, parallel: bool) -> Self {
        match (eigen, parallel) {
            (true, _) => ModelSlot::Eigen,
            (false, false) => ModelSlot::LinearSequential,
            (false, true) => ModelSlot::LinearParallel,
        }
    }
}

impl fmt::Display for ModelSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Labels a run corpus and grows a decision tree on it.
pub fn train_corpus(csv: &str, params: &TreeParams, tolerance: f64, ratio: f64) -> Result<ClassifierModel, MlError> {
    let runs = read_runs(csv.as_bytes())?;
    let report = derive_labels(&runs, tolerance, ratio)?;
    induce_tree(&report.instances, params)
}

/// Short content hash of a model's serialized form.
pub fn model_digest(model: &ClassifierModel) -> String {
    let digest = Sha256::digest(model.to_json().as_bytes());
    hex::encode(&digest[..8])
}

/// A classifier with the features its decisions read and a version tag.
pub struct TrainedModel {
    pub classifier: Box<dyn Classifier>,
    pub required: BTreeSet<String>,
    pub version: String,
}

impl TrainedModel {
    pub fn from_tree(slot: ModelSlot, model: ClassifierModel) -> Self {
        let required = model
            .nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(feature.clone()),
                TreeNode::Leaf { .. } => None,
            })
            .collect();
        let version = format!("{slot}-{}-{}", model.kind(), model_digest(&model));
        Self { classifier: Box::new(model), required, version }
    }
}

/// What the service answers for one request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub model: ModelSlot,
    pub model_version: String,
    pub best: SolverConfig,
    pub configs: Vec<SolverConfig>,
    /// Command-line options for the best configuration.
    pub options: Vec<String>,
}

#[derive(Debug)]
pub enum RecommendError {
    NoModel(ModelSlot),
    MissingFeatures(Vec<String>),
    Model(MlError),
}

/// One model per slot.
#[derive(Default)]
pub struct Recommender {
    models: BTreeMap<ModelSlot, TrainedModel>,
}

impl Recommender {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Trees trained on the three bundled corpora with default parameters.
    pub fn bundled() -> Result<Self, MlError> {
        let mut r = Self::empty();
        for slot in ModelSlot::ALL {
            let model = train_corpus(slot.corpus(), &TreeParams::default(), DEFAULT_TOLERANCE, DEFAULT_TIME_RATIO)?;
            r.insert(slot, TrainedModel::from_tree(slot, model));
        }
        Ok(r)
    }

    pub fn insert(&mut self, slot: ModelSlot, model: TrainedModel) {
        self.models.insert(slot, model);
    }

    pub fn model(&self, slot: ModelSlot) -> Option<&TrainedModel> {
        self.models.get(&slot)
    }

    pub fn versions(&self) -> BTreeMap<ModelSlot, &str> {
        self.models.iter().map(|(s, m)| (*s, m.version.as_str())).collect()
    }

    pub fn recommend(
        &self,
        slot: ModelSlot,
        features: &BTreeMap<String, f64>,
    ) -> Result<Recommendation, RecommendError> {
        let model = self.models.get(&slot).ok_or(RecommendError::NoModel(slot))?;
        let missing: Vec<String> = model.required.iter().filter(|f| !features.contains_key(*f)).cloned().collect();
        if !missing.is_empty() {
            return Err(RecommendError::MissingFeatures(missing));
        }
        let p = model.classifier.predict(features).map_err(RecommendError::Model)?;
        Ok(Recommendation {
            model: slot,
            model_version: model.version.clone(),
            options: p.best.petsc_options(),
            configs: p.configs.into_iter().collect(),
            best: p.best,
        })
    }
}

/// Request parameters of a recommendation with service defaults applied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RequestOptions {
    #[serde(default)]
    pub eigen: bool,
    #[serde(default)]
    pub parallel: bool,
    pub processors: Option<u32>,
    pub tolerance: Option<f64>,
    pub n_eigenvalues: Option<u32>,
    pub spectrum: Option<Spectrum>,
}

impl RequestOptions {
    pub fn slot(&self) -> ModelSlot {
        ModelSlot::select(self.eigen, self.parallel)
    }

    pub fn spec(&self) -> RequestSpec {
        let processors = if self.parallel { self.processors.unwrap_or(DEFAULT_PROCESSORS) } else { 1 };
        let mut spec = RequestSpec {
            tolerance: Some(self.tolerance.unwrap_or(DEFAULT_TOLERANCE)),
            processors: Some(processors),
            ..RequestSpec::default()
        };
        if self.eigen {
            spec.n_eigenvalues = Some(self.n_eigenvalues.unwrap_or(1));
            spec.spectrum = Some(self.spectrum.unwrap_or(Spectrum::LargestMagnitude));
        }
        spec
    }

    /// `features` plus the request fields it does not already carry.
    pub fn complete(&self, mut features: BTreeMap<String, f64>) -> BTreeMap<String, f64> {
        for (k, v) in self.spec().as_features() {
            features.entry(k).or_insert(v);
        }
        features
    }

    pub fn from_matrix(&self, f: &ExtendedFeatureVector) -> BTreeMap<String, f64> {
        self.complete(f.to_map())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lighthouse_core::matfeat::compute_extended_features;
    use lighthouse_core::mlselect::synth::family_matrix;
    use lighthouse_core::mlselect::synth::FAMILIES;
    use lighthouse_core::mlselect::ProblemKind;
    use rand::SeedableRng;

    #[test]
    fn bundled_models_answer_matrix_features() {
        let r = Recommender::bundled().unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for family in FAMILIES {
            let f = compute_extended_features(&family_matrix(&mut rng, family)).unwrap();
            for opts in [
                RequestOptions::default(),
                RequestOptions { parallel: true, processors: Some(8), ..Default::default() },
                RequestOptions { eigen: true, n_eigenvalues: Some(3), ..Default::default() },
            ] {
                let rec = r.recommend(opts.slot(), &opts.from_matrix(&f)).unwrap();
                assert!(rec.configs.contains(&rec.best));
                let kind = if opts.eigen { ProblemKind::Eigen } else { ProblemKind::Linear };
                assert_eq!(rec.best.kind(), kind);
                assert!(!rec.options.is_empty());
            }
        }
    }

    #[test]
    fn missing_features_are_listed() {
        let r = Recommender::bundled().unwrap();
        match r.recommend(ModelSlot::LinearSequential, &BTreeMap::new()) {
            Err(RecommendError::MissingFeatures(m)) => assert!(!m.is_empty()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn versions_follow_content() {
        let a = train_corpus(data::SLEPC_RUNS, &TreeParams::default(), DEFAULT_TOLERANCE, DEFAULT_TIME_RATIO).unwrap();
        let b = train_corpus(data::SLEPC_RUNS, &TreeParams::default(), DEFAULT_TOLERANCE, DEFAULT_TIME_RATIO).unwrap();
        assert_eq!(model_digest(&a), model_digest(&b));
        let shallow = TreeParams { max_depth: Some(1), ..TreeParams::default() };
        let c = train_corpus(data::SLEPC_RUNS, &shallow, DEFAULT_TOLERANCE, DEFAULT_TIME_RATIO).unwrap();
        assert_ne!(model_digest(&a), model_digest(&c));
    }
}
