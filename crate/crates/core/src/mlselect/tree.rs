use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{LabeledInstance, MlError, Result, SolverConfig};
use crate::taxonomy::{flatten_tree, AnswerOption, DecisionTree, Node, PathTable, Question};

/// Current model serialization format.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Node impurity measure used to score candidate splits.
pub trait SplitCriterion: Send + Sync {
    fn name(&self) -> &'static str;
    /// Impurity of a node with the given class counts summing to `total`.
    fn impurity(&self, counts: &[usize], total: usize) -> f64;
}

/// Shannon entropy in bits; splits then maximize information gain.
pub struct Entropy;

impl SplitCriterion for Entropy {
    fn name(&self) -> &'static str {
        "entropy"
    }

    fn impurity(&self, counts: &[usize], total: usize) -> f64 {
        if total == 0 {
            return 0.0;
        }
        let n = total as f64;
        counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 / n).map(|p| -p * p.log2()).sum()
    }
}

pub struct Gini;

impl SplitCriterion for Gini {
    fn name(&self) -> &'static str {
        "gini"
    }

    fn impurity(&self, counts: &[usize], total: usize) -> f64 {
        if total == 0 {
            return 0.0;
        }
        let n = total as f64;
        1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
    }
}

/// Split criteria by name.
pub struct CriterionRegistry {
    criteria: Vec<Box<dyn SplitCriterion>>,
}

impl CriterionRegistry {
    pub fn empty() -> Self {
        Self { criteria: Vec::new() }
    }

    /// `entropy` and `gini`.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Entropy));
        r.register(Box::new(Gini));
        r
    }

    /// Adds a criterion, replacing any with the same name.
    pub fn register(&mut self, criterion: Box<dyn SplitCriterion>) {
        self.criteria.retain(|c| c.name() != criterion.name());
        self.criteria.push(criterion);
    }

    pub fn get(&self, name: &str) -> Result<&dyn SplitCriterion> {
        self.criteria
            .iter()
            .find(|c| c.name() == name)
            .map(|c| c.as_ref())
            .ok_or_else(|| MlError::UnknownCriterion(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.criteria.iter().map(|c| c.name()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Leaves predict the majority best configuration only.
    Best,
    /// Leaves also carry every near-best configuration of their members.
    NearBest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
    pub min_leaf_size: usize,
    pub target: Target,
    pub criterion: String,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: None, min_leaf_size: 1, target: Target::NearBest, criterion: "entropy".into() }
    }
}

/// Tree node; children are indices into [`ClassifierModel::nodes`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Split { feature: String, threshold: f64, le: usize, gt: usize },
    Leaf { best: SolverConfig, configs: BTreeSet<SolverConfig>, samples: usize },
}

/// A trained binary decision tree. Internal nodes test `feature <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub format_version: u32,
    pub features: Vec<String>,
    pub params: TreeParams,
    pub depth: usize,
    pub leaf_count: usize,
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
}

impl ClassifierModel {
    fn leaf_index(&self, features: &BTreeMap<String, f64>) -> Result<usize> {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { .. } => return Ok(i),
                TreeNode::Split { feature, threshold, le, gt } => {
                    let x = *features.get(feature).ok_or_else(|| MlError::MissingFeature(feature.clone()))?;
                    if !x.is_finite() {
                        return Err(MlError::NonFinite { feature: feature.clone(), problem: "query".into() });
                    }
                    i = if x <= *threshold { *le } else { *gt };
                }
            }
        }
    }

    fn leaf(&self, features: &BTreeMap<String, f64>) -> Result<(&SolverConfig, &BTreeSet<SolverConfig>)> {
        match &self.nodes[self.leaf_index(features)?] {
            TreeNode::Leaf { best, configs, .. } => Ok((best, configs)),
            TreeNode::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    /// Configurations of the leaf reached by `features`.
    pub fn predict(&self, features: &BTreeMap<String, f64>) -> Result<BTreeSet<SolverConfig>> {
        Ok(self.leaf(features)?.1.clone())
    }

    /// Majority best configuration of the reached leaf.
    pub fn predict_best(&self, features: &BTreeMap<String, f64>) -> Result<SolverConfig> {
        Ok(self.leaf(features)?.0.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(MlError::ModelVersion(model.format_version));
        }
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let bad = |why: &str| Err(MlError::BadModel(why.to_string()));
        if self.nodes.is_empty() {
            return bad("no nodes");
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for node in &self.nodes {
            match node {
                TreeNode::Split { threshold, le, gt, .. } => {
                    if !threshold.is_finite() {
                        return bad("non-finite threshold");
                    }
                    for &c in [le, gt] {
                        if c == 0 || c >= self.nodes.len() {
                            return bad("child index out of range");
                        }
                        parents[c] += 1;
                    }
                }
                TreeNode::Leaf { configs, best, .. } => {
                    if configs.is_empty() || !configs.contains(best) {
                        return bad("leaf payload must contain its best configuration");
                    }
                }
            }
        }
        if parents[1..].iter().any(|&p| p != 1) {
            return bad("every non-root node needs exactly one parent");
        }
        Ok(())
    }

    /// Question tree form: one two-option question per split, with option keys
    /// `le:<threshold>` and `gt:<threshold>`; leaves carry configuration labels.
    pub fn to_decision_tree(&self) -> (DecisionTree, Vec<Question>) {
        let mut nodes = BTreeMap::new();
        let mut questions = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let node_ref = format!("n{i}");
            match node {
                TreeNode::Leaf { configs, .. } => {
                    nodes.insert(node_ref, Node::Leaf { leaf: configs.iter().map(|c| c.to_string()).collect() });
                }
                TreeNode::Split { feature, threshold, le, gt } => {
                    let qid = format!("q{i}");
                    let (k_le, k_gt) = (format!("le:{threshold}"), format!("gt:{threshold}"));
                    questions.push(Question {
                        id: qid.clone(),
                        text: format!("Is {feature} <= {threshold}?"),
                        facet: feature.clone(),
                        options: vec![
                            AnswerOption { key: k_le.clone(), text: format!("{feature} <= {threshold}") },
                            AnswerOption { key: k_gt.clone(), text: format!("{feature} > {threshold}") },
                        ],
                    });
                    let edges = BTreeMap::from([(k_le, format!("n{le}")), (k_gt, format!("n{gt}"))]);
                    nodes.insert(node_ref, Node::Internal { question: qid, edges });
                }
            }
        }
        (DecisionTree { root: "n0".into(), nodes }, questions)
    }

    /// Indented text rendering, one line per node.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![(0usize, 0usize, String::new())];
        while let Some((i, depth, prefix)) = stack.pop() {
            let pad = "|   ".repeat(depth);
            match &self.nodes[i] {
                TreeNode::Leaf { configs, samples, .. } => {
                    let labels: Vec<String> = configs.iter().map(|c| c.to_string()).collect();
                    let _ = writeln!(out, "{pad}{prefix}{} ({samples})", labels.join(", "));
                }
                TreeNode::Split { feature, threshold, le, gt } => {
                    if !prefix.is_empty() {
                        let _ = writeln!(out, "{pad}{prefix}");
                    }
                    let d = depth + usize::from(!prefix.is_empty());
                    stack.push((*gt, d, format!("{feature} > {threshold}: ")));
                    stack.push((*le, d, format!("{feature} <= {threshold}: ")));
                }
            }
        }
        out
    }
}

/// Flattens the model to a path table, one row per leaf.
pub fn export_model(model: &ClassifierModel) -> PathTable {
    let (tree, questions) = model.to_decision_tree();
    let index: HashMap<&str, &Question> = questions.iter().map(|q| (q.id.as_str(), q)).collect();
    flatten_tree(&tree, &|id| index.get(id).copied())
}

/// Finds the exported row whose threshold answers all hold for `features`.
pub fn lookup_exported(table: &PathTable, features: &BTreeMap<String, f64>) -> Result<BTreeSet<SolverConfig>> {
    let holds = |facet: &str, key: &str| {
        let Some(&x) = features.get(facet) else { return false };
        match key.split_once(':') {
            Some(("le", t)) => t.parse::<f64>().is_ok_and(|t| x <= t),
            Some(("gt", t)) => t.parse::<f64>().is_ok_and(|t| x > t),
            _ => false,
        }
    };
    match table.find_row(holds) {
        Some(row) => row.result.iter().map(|s| s.parse()).collect(),
        None => match table.facets.iter().find(|f| !features.contains_key(*f)) {
            Some(f) => Err(MlError::MissingFeature(f.clone())),
            None => Err(MlError::NoMatchingRow),
        },
    }
}

/// Grows a tree with the standard criteria.
pub fn induce_tree(data: &[LabeledInstance], params: &TreeParams) -> Result<ClassifierModel> {
    induce_tree_with(data, params, &CriterionRegistry::standard())
}

/// Greedy top-down induction on the `best` label.
///
/// Splits are `feature <= t` with `t` a midpoint between consecutive distinct
/// values. The split with the largest impurity decrease wins; ties keep the
/// first candidate in (feature name, threshold) order. An impure node is split
/// even when no candidate decreases impurity, so conflict-free data is fit
/// exactly when depth is unlimited.
pub fn induce_tree_with(
    data: &[LabeledInstance],
    params: &TreeParams,
    criteria: &CriterionRegistry,
) -> Result<ClassifierModel> {
    if data.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    let criterion = criteria.get(&params.criterion)?;
    let min_leaf = params.min_leaf_size.max(1);

    let features: Vec<String> = {
        let set: BTreeSet<&String> = data.iter().flat_map(|d| d.features.keys()).collect();
        set.into_iter().cloned().collect()
    };
    let mut x = vec![vec![0.0; data.len()]; features.len()];
    for (i, d) in data.iter().enumerate() {
        for (f, name) in features.iter().enumerate() {
            let v = *d.features.get(name).ok_or_else(|| MlError::MissingFeature(name.clone()))?;
            if !v.is_finite() {
                return Err(MlError::NonFinite { feature: name.clone(), problem: d.problem_id.clone() });
            }
            x[f][i] = v;
        }
    }
    let classes: Vec<&SolverConfig> = {
        let set: BTreeSet<&SolverConfig> = data.iter().map(|d| &d.best).collect();
        set.into_iter().collect()
    };
    let y: Vec<usize> = data.iter().map(|d| classes.binary_search(&&d.best).expect("class listed")).collect();

    let mut nodes: Vec<Option<TreeNode>> = vec![None];
    let mut depth_max = 0;
    let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, (0..data.len()).collect(), 0)];
    while let Some((slot, idx, depth)) = stack.pop() {
        depth_max = depth_max.max(depth);
        let mut counts = vec![0usize; classes.len()];
        idx.iter().for_each(|&i| counts[y[i]] += 1);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_ok = params.max_depth.is_none_or(|m| depth < m);
        let split = if pure || !depth_ok || idx.len() < 2 * min_leaf {
            None
        } else {
            best_split(&x, &y, &idx, &counts, classes.len(), min_leaf, criterion)
        };
        match split {
            Some((f, threshold)) => {
                let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[f][i] <= threshold);
                let (le, gt) = (nodes.len(), nodes.len() + 1);
                nodes.push(None);
                nodes.push(None);
                nodes[slot] = Some(TreeNode::Split { feature: features[f].clone(), threshold, le, gt });
                stack.push((gt, right, depth + 1));
                stack.push((le, left, depth + 1));
            }
            None => {
                // majority with ties to the smallest label
                let top = (0..classes.len()).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).unwrap_or(0);
                let best = classes[top].clone();
                let mut configs = BTreeSet::from([best.clone()]);
                if params.target == Target::NearBest {
                    configs.extend(idx.iter().flat_map(|&i| data[i].near_best.iter().cloned()));
                }
                nodes[slot] = Some(TreeNode::Leaf { best, configs, samples: idx.len() });
            }
        }
    }
    let nodes: Vec<TreeNode> = nodes.into_iter().map(|n| n.expect("every slot filled")).collect();
    let leaf_count = nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count();
    Ok(ClassifierModel {
        format_version: MODEL_FORMAT_VERSION,
        features,
        params: params.clone(),
        depth: depth_max,
        leaf_count,
        nodes,
    })
}

fn best_split(
    x: &[Vec<f64>],
    y: &[usize],
    idx: &[usize],
    counts: &[usize],
    n_classes: usize,
    min_leaf: usize,
    criterion: &dyn SplitCriterion,
) -> Option<(usize, f64)> {
    let n = idx.len();
    let parent = criterion.impurity(counts, n);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = idx.to_vec();
    for (f, column) in x.iter().enumerate() {
        order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
        let mut left = vec![0usize; n_classes];
        for pos in 0..n - 1 {
            left[y[order[pos]]] += 1;
            let (lo, hi) = (column[order[pos]], column[order[pos + 1]]);
            let n_left = pos + 1;
            if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let right: Vec<usize> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
            let weighted = (n_left as f64 * criterion.impurity(&left, n_left)
                + (n - n_left) as f64 * criterion.impurity(&right, n - n_left))
                / n as f64;
            let gain = parent - weighted;
            if best.is_none_or(|(g, _, _)| gain > g + 1e-12) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some((gain, f, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
