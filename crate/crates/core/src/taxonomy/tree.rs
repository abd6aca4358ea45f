use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{Question, Result, TaxonomyError};

/// A node of a question tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Internal { question: String, edges: BTreeMap<String, String> },
    Leaf { leaf: Vec<String> },
}

/// Question tree: internal nodes ask a question, edges are labeled by option
/// keys, leaves carry a payload (routine ids or class labels).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: String,
    pub nodes: BTreeMap<String, Node>,
}

impl DecisionTree {
    pub fn node(&self, node_ref: &str) -> Option<&Node> {
        self.nodes.get(node_ref)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.values().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Checks the structural invariants against a question lookup.
    pub fn validate<'q>(&self, questions: &dyn Fn(&str) -> Option<&'q Question>) -> Result<()> {
        if !self.nodes.contains_key(&self.root) {
            return Err(TaxonomyError::MissingRoot(self.root.clone()));
        }
        for (node_ref, node) in &self.nodes {
            match node {
                Node::Leaf { leaf } if leaf.is_empty() => return Err(TaxonomyError::EmptyLeaf(node_ref.clone())),
                Node::Leaf { .. } => {}
                Node::Internal { question, edges } => {
                    let q = questions(question).ok_or_else(|| TaxonomyError::UnknownQuestion {
                        node: node_ref.clone(),
                        question: question.clone(),
                    })?;
                    if edges.is_empty() {
                        return Err(TaxonomyError::NoEdges(node_ref.clone()));
                    }
                    for (option, target) in edges {
                        if q.option(option).is_none() {
                            return Err(TaxonomyError::InvalidEdge {
                                node: node_ref.clone(),
                                question: question.clone(),
                                option: option.clone(),
                            });
                        }
                        if !self.nodes.contains_key(target) {
                            return Err(TaxonomyError::DanglingNode { from: node_ref.clone(), to: target.clone() });
                        }
                    }
                }
            }
        }

        // iterative DFS: gray = on the current path, black = finished
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Gray,
            Black,
        }
        let mut marks: HashMap<&str, Mark> = HashMap::new();
        let mut stack: Vec<(&str, bool)> = vec![(self.root.as_str(), false)];
        while let Some((node_ref, exiting)) = stack.pop() {
            if exiting {
                marks.insert(node_ref, Mark::Black);
                continue;
            }
            match marks.get(node_ref) {
                Some(Mark::Gray) => return Err(TaxonomyError::Cyclic(node_ref.to_string())),
                Some(Mark::Black) => return Err(TaxonomyError::SharedNode(node_ref.to_string())),
                None => {}
            }
            marks.insert(node_ref, Mark::Gray);
            stack.push((node_ref, true));
            if let Node::Internal { edges, .. } = &self.nodes[node_ref] {
                for target in edges.values() {
                    match marks.get(target.as_str()) {
                        Some(Mark::Gray) => return Err(TaxonomyError::Cyclic(target.clone())),
                        Some(Mark::Black) => return Err(TaxonomyError::SharedNode(target.clone())),
                        None => stack.push((target, false)),
                    }
                }
            }
        }
        if let Some(orphan) = self.nodes.keys().find(|k| !marks.contains_key(k.as_str())) {
            return Err(TaxonomyError::Unreachable(orphan.clone()));
        }
        Ok(())
    }

    /// Union of leaf payloads below every node.
    pub fn subtree_payloads(&self) -> HashMap<String, BTreeSet<String>> {
        let mut out: HashMap<String, BTreeSet<String>> = HashMap::new();
        let mut stack: Vec<(&str, bool)> = vec![(self.root.as_str(), false)];
        while let Some((node_ref, exiting)) = stack.pop() {
            match &self.nodes[node_ref] {
                Node::Leaf { leaf } => {
                    out.insert(node_ref.to_string(), leaf.iter().cloned().collect());
                }
                Node::Internal { edges, .. } if exiting => {
                    let set = edges.values().flat_map(|t| out[t].iter().cloned()).collect();
                    out.insert(node_ref.to_string(), set);
                }
                Node::Internal { edges, .. } => {
                    stack.push((node_ref, true));
                    stack.extend(edges.values().map(|t| (t.as_str(), false)));
                }
            }
        }
        out
    }

    /// Follows `answers` (option keys) from the root and returns the leaf payload.
    pub fn traverse<S: AsRef<str>>(&self, answers: &[S]) -> Result<&[String]> {
        let mut current = &self.nodes[&self.root];
        let mut answers = answers.iter();
        loop {
            match current {
                Node::Leaf { leaf } => {
                    return if answers.next().is_some() { Err(TaxonomyError::NoRow) } else { Ok(leaf) };
                }
                Node::Internal { edges, .. } => {
                    let Some(a) = answers.next() else {
                        return Err(TaxonomyError::IncompletePath(0));
                    };
                    let target = edges.get(a.as_ref()).ok_or_else(|| TaxonomyError::InvalidOption {
                        given: a.as_ref().to_string(),
                        valid: edges.keys().cloned().collect(),
                    })?;
                    current = &self.nodes[target];
                }
            }
        }
    }
}

/// One root-to-leaf path: the (facet, option) pairs along it and the leaf payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub answers: Vec<(String, String)>,
    pub result: Vec<String>,
}

/// Relational form of a question tree, one row per leaf in depth-first order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTable {
    /// Facets in order of first appearance.
    pub facets: Vec<String>,
    pub rows: Vec<PathRow>,
}

/// Flattens a tree depth-first; children are visited in option declaration order.
pub fn flatten_tree<'q>(tree: &DecisionTree, questions: &dyn Fn(&str) -> Option<&'q Question>) -> PathTable {
    let mut facets: Vec<String> = Vec::new();
    let mut rows = Vec::new();
    let mut stack: Vec<(&str, Vec<(String, String)>)> = vec![(tree.root.as_str(), Vec::new())];
    while let Some((node_ref, path)) = stack.pop() {
        match &tree.nodes[node_ref] {
            Node::Leaf { leaf } => rows.push(PathRow { answers: path, result: leaf.clone() }),
            Node::Internal { question, edges } => {
                let q = questions(question).expect("validated tree");
                if !facets.contains(&q.facet) {
                    facets.push(q.facet.clone());
                }
                let ordered: Vec<(&str, &str)> =
                    q.options.iter().filter_map(|o| edges.get(&o.key).map(|t| (o.key.as_str(), t.as_str()))).collect();
                // reversed so the first option is popped first
                for (key, target) in ordered.into_iter().rev() {
                    let mut next = path.clone();
                    next.push((q.facet.clone(), key.to_string()));
                    stack.push((target, next));
                }
            }
        }
    }
    PathTable { facets, rows }
}

/// Finds the row whose answers equal `answers` exactly.
pub fn lookup_path<'t>(table: &'t PathTable, answers: &[(String, String)]) -> Result<&'t [String]> {
    if let Some(row) = table.rows.iter().find(|r| r.answers == answers) {
        return Ok(&row.result);
    }
    let is_prefix =
        table.rows.iter().any(|r| r.answers.len() > answers.len() && r.answers[..answers.len()] == *answers);
    if is_prefix {
        Err(TaxonomyError::IncompletePath(answers.len()))
    } else {
        Err(TaxonomyError::NoRow)
    }
}

impl PathTable {
    /// First row whose answers all satisfy `accept`.
    pub fn find_row(&self, mut accept: impl FnMut(&str, &str) -> bool) -> Option<&PathRow> {
        self.rows.iter().find(|r| r.answers.iter().all(|(f, k)| accept(f, k)))
    }

    /// CSV with one column per facet plus `result`. A facet answered more than
    /// once on a path has its options joined by ` & `; results are joined by `;`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = self.facets.iter().map(String::as_str).collect();
        header.push("result");
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut rec: Vec<String> = self
                .facets
                .iter()
                .map(|f| {
                    row.answers
                        .iter()
                        .filter(|(rf, _)| rf == f)
                        .map(|(_, k)| k.as_str())
                        .collect::<Vec<_>>()
                        .join(" & ")
                })
                .collect();
            rec.push(row.result.join(";"));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}
