//! Routine ontology and guided-search question trees.
//!
//! A taxonomy document is JSON with three top-level collections:
//! `routines` (library subroutines with their classification facets and
//! parameter lists), `questions` (multiple-choice questions, each tied to a
//! facet), and `trees` (one question tree per library). Guided search walks a
//! tree from the root, one answered question at a time, until a leaf names
//! the matching routines.

mod session;
mod tree;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use session::{GuidedSession, SessionView, COMPLETION_MESSAGE};
pub use tree::{flatten_tree, lookup_path, DecisionTree, Node, PathRow, PathTable};

/// Current taxonomy document format version.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("malformed taxonomy document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported taxonomy format version {0}")]
    UnsupportedVersion(u32),
    #[error("empty taxonomy")]
    Empty,
    #[error("duplicate routine id `{0}`")]
    DuplicateRoutine(String),
    #[error("routine `{routine}` declares parameter `{name}` twice")]
    DuplicateParameter { routine: String, name: String },
    #[error("duplicate question id `{0}`")]
    DuplicateQuestion(String),
    #[error("question `{0}` needs at least two options with distinct keys")]
    BadQuestionOptions(String),
    #[error("duplicate tree for library {0}")]
    DuplicateTree(Library),
    #[error("tree root `{0}` is not a node of the tree")]
    MissingRoot(String),
    #[error("node `{node}` refers to unknown question `{question}`")]
    UnknownQuestion { node: String, question: String },
    #[error("node `{from}` has an edge to missing node `{to}`")]
    DanglingNode { from: String, to: String },
    #[error("node `{node}`: `{option}` is not an option of question `{question}`")]
    InvalidEdge { node: String, question: String, option: String },
    #[error("node `{0}` has no outgoing edges")]
    NoEdges(String),
    #[error("leaf `{0}` has an empty payload")]
    EmptyLeaf(String),
    #[error("cyclic tree: node `{0}` is its own ancestor")]
    Cyclic(String),
    #[error("node `{0}` has more than one parent")]
    SharedNode(String),
    #[error("node `{0}` is not reachable from the root")]
    Unreachable(String),
    #[error("leaf `{node}` names unknown routine `{routine}`")]
    UnknownLeafRoutine { node: String, routine: String },
    #[error("routine `{routine}`: {facet} value `{value}` is not offered by any {library} question")]
    FacetNotOffered { routine: String, library: Library, facet: String, value: String },
    #[error("unknown library `{0}`")]
    UnknownLibrary(String),
    #[error("no guided-search tree loaded for {0}")]
    NoTree(Library),
    #[error("unknown routine `{0}`")]
    UnknownRoutine(String),
    #[error("invalid option `{given}`; valid options are: {}", valid.join(", "))]
    InvalidOption { given: String, valid: Vec<String> },
    #[error("guided search is already finished")]
    Finished,
    #[error("already at the first question")]
    AtRoot,
    #[error("incomplete path: {0} answer(s) given, more are needed to reach a result")]
    IncompletePath(usize),
    #[error("no row matches the given answers")]
    NoRow,
}

pub type Result<T, E = TaxonomyError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Library {
    #[serde(rename = "LAPACK")]
    Lapack,
    #[serde(rename = "PETSc")]
    Petsc,
    #[serde(rename = "SLEPc")]
    Slepc,
}

impl Library {
    pub const ALL: [Library; 3] = [Library::Lapack, Library::Petsc, Library::Slepc];

    pub fn as_str(self) -> &'static str {
        match self {
            Library::Lapack => "LAPACK",
            Library::Petsc => "PETSc",
            Library::Slepc => "SLEPc",
        }
    }
}

impl fmt::Display for Library {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Library {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self> {
        Library::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| TaxonomyError::UnknownLibrary(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Single,
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarField {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Integer,
    RealScalar,
    ComplexScalar,
    #[serde(rename = "array_1d")]
    Array1d,
    #[serde(rename = "array_2d")]
    Array2d,
    Character,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intent {
    In,
    Out,
    Inout,
}

impl Intent {
    pub fn as_str(self) -> &'static str {
        match self {
            Intent::In => "in",
            Intent::Out => "out",
            Intent::Inout => "inout",
        }
    }
}

/// Element type of an array parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementType {
    Integer,
    Real,
    Complex,
    Character,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub kind: ParamKind,
    pub intent: Intent,
    pub description: String,
    /// Array element type; defaults to the routine's own scalar type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<ElementType>,
    /// Array extents as expressions over other parameters, e.g. `["LDAB", "N"]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dims: Vec<String>,
    /// Suggested initial value for scalar inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl ParameterSpec {
    pub fn is_array(&self) -> bool {
        matches!(self.kind, ParamKind::Array1d | ParamKind::Array2d)
    }

    /// Element type after applying the routine default.
    pub fn element_type(&self, routine: &RoutineRecord) -> ElementType {
        match self.kind {
            ParamKind::Integer => ElementType::Integer,
            ParamKind::Character => ElementType::Character,
            ParamKind::RealScalar => ElementType::Real,
            ParamKind::ComplexScalar => ElementType::Complex,
            ParamKind::Array1d | ParamKind::Array2d => self.element.unwrap_or(match routine.scalar_field {
                ScalarField::Real => ElementType::Real,
                ScalarField::Complex => ElementType::Complex,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutineRecord {
    pub id: String,
    pub library: Library,
    pub name: String,
    pub precision: Precision,
    pub scalar_field: ScalarField,
    pub problem_class: String,
    pub matrix_type: String,
    pub storage: String,
    pub description: String,
    pub documentation: String,
    pub parameters: Vec<ParameterSpec>,
}

impl RoutineRecord {
    /// Value of a named facet, if the routine carries it.
    pub fn facet(&self, facet: &str) -> Option<&str> {
        Some(match facet {
            "problem_class" => &self.problem_class,
            "matrix_type" => &self.matrix_type,
            "storage" => &self.storage,
            "precision" => match self.precision {
                Precision::Single => "single",
                Precision::Double => "double",
            },
            "scalar_field" => match self.scalar_field {
                ScalarField::Real => "real",
                ScalarField::Complex => "complex",
            },
            _ => return None,
        })
    }
}

/// Facets carried by every routine record.
pub const ROUTINE_FACETS: [&str; 5] = ["problem_class", "matrix_type", "storage", "precision", "scalar_field"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub key: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub facet: String,
    pub options: Vec<AnswerOption>,
}

impl Question {
    pub fn option(&self, key: &str) -> Option<&AnswerOption> {
        self.options.iter().find(|o| o.key == key)
    }

    fn validate(&self) -> Result<()> {
        let keys: BTreeSet<&str> = self.options.iter().map(|o| o.key.as_str()).collect();
        if self.options.len() < 2 || keys.len() != self.options.len() {
            return Err(TaxonomyError::BadQuestionOptions(self.id.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TreeEntry {
    library: Library,
    #[serde(flatten)]
    tree: DecisionTree,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Document {
    version: u32,
    routines: Vec<RoutineRecord>,
    questions: Vec<Question>,
    trees: Vec<TreeEntry>,
}

/// Documentation record for one routine.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoutineDoc<'a> {
    pub id: &'a str,
    pub library: Library,
    pub name: &'a str,
    pub description: &'a str,
    pub documentation: &'a str,
    pub parameters: &'a [ParameterSpec],
}

/// Conjunctive facet filter; an empty list accepts any value.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FacetFilter {
    #[serde(default)]
    pub library: Option<Library>,
    #[serde(default)]
    pub problem_class: Vec<String>,
    #[serde(default)]
    pub matrix_type: Vec<String>,
    #[serde(default)]
    pub storage: Vec<String>,
    #[serde(default)]
    pub precision: Vec<String>,
    #[serde(default)]
    pub scalar_field: Vec<String>,
}

impl FacetFilter {
    pub fn accepts(&self, r: &RoutineRecord) -> bool {
        if self.library.is_some_and(|l| l != r.library) {
            return false;
        }
        let lists = [
            ("problem_class", &self.problem_class),
            ("matrix_type", &self.matrix_type),
            ("storage", &self.storage),
            ("precision", &self.precision),
            ("scalar_field", &self.scalar_field),
        ];
        lists.iter().all(|(facet, allowed)| {
            allowed.is_empty() || r.facet(facet).is_some_and(|v| allowed.iter().any(|a| a == v))
        })
    }
}

/// Immutable, validated routine taxonomy.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    routines: Vec<RoutineRecord>,
    by_id: HashMap<String, usize>,
    questions: Vec<Question>,
    question_index: BTreeMap<String, usize>,
    trees: BTreeMap<Library, DecisionTree>,
    /// Union of leaf payloads below each node, per library.
    candidates: BTreeMap<Library, HashMap<String, BTreeSet<String>>>,
}

impl Taxonomy {
    /// Parses and validates a taxonomy document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text)?;
        Self::from_document(doc)
    }

    /// The bundled full LAPACK taxonomy.
    pub fn bundled() -> Self {
        Self::from_json(crate::data::LAPACK_TAXONOMY).expect("bundled taxonomy is valid")
    }

    fn from_document(doc: Document) -> Result<Self> {
        if doc.version != FORMAT_VERSION {
            return Err(TaxonomyError::UnsupportedVersion(doc.version));
        }
        if doc.routines.is_empty() {
            return Err(TaxonomyError::Empty);
        }
        let mut by_id = HashMap::new();
        for (i, r) in doc.routines.iter().enumerate() {
            if by_id.insert(r.id.clone(), i).is_some() {
                return Err(TaxonomyError::DuplicateRoutine(r.id.clone()));
            }
            let mut names = BTreeSet::new();
            for p in &r.parameters {
                if !names.insert(p.name.as_str()) {
                    return Err(TaxonomyError::DuplicateParameter { routine: r.id.clone(), name: p.name.clone() });
                }
            }
        }
        let mut question_index = BTreeMap::new();
        for (i, q) in doc.questions.iter().enumerate() {
            q.validate()?;
            if question_index.insert(q.id.clone(), i).is_some() {
                return Err(TaxonomyError::DuplicateQuestion(q.id.clone()));
            }
        }
        let lookup = |id: &str| question_index.get(id).map(|&i| &doc.questions[i]);

        let mut trees = BTreeMap::new();
        let mut candidates = BTreeMap::new();
        for entry in doc.trees {
            entry.tree.validate(&lookup)?;
            for (node_ref, node) in &entry.tree.nodes {
                if let Node::Leaf { leaf } = node {
                    if let Some(missing) = leaf.iter().find(|id| !by_id.contains_key(*id)) {
                        return Err(TaxonomyError::UnknownLeafRoutine {
                            node: node_ref.clone(),
                            routine: missing.clone(),
                        });
                    }
                }
            }
            candidates.insert(entry.library, entry.tree.subtree_payloads());
            if trees.insert(entry.library, entry.tree).is_some() {
                return Err(TaxonomyError::DuplicateTree(entry.library));
            }
        }

        // every routine facet value must be selectable in its library's tree
        for (library, tree) in &trees {
            let mut offered: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
            for node in tree.nodes.values() {
                if let Node::Internal { question, .. } = node {
                    let q = lookup(question).expect("validated");
                    offered.entry(q.facet.as_str()).or_default().extend(q.options.iter().map(|o| o.key.as_str()));
                }
            }
            for r in doc.routines.iter().filter(|r| r.library == *library) {
                for facet in ROUTINE_FACETS {
                    let (Some(keys), Some(value)) = (offered.get(facet), r.facet(facet)) else {
                        continue;
                    };
                    if !keys.contains(value) {
                        return Err(TaxonomyError::FacetNotOffered {
                            routine: r.id.clone(),
                            library: *library,
                            facet: facet.to_string(),
                            value: value.to_string(),
                        });
                    }
                }
            }
        }

        Ok(Self { routines: doc.routines, by_id, questions: doc.questions, question_index, trees, candidates })
    }

    /// Serializes back to the document format.
    pub fn to_json(&self) -> String {
        let doc = Document {
            version: FORMAT_VERSION,
            routines: self.routines.clone(),
            questions: self.questions.clone(),
            trees: self.trees.iter().map(|(l, t)| TreeEntry { library: *l, tree: t.clone() }).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("taxonomy serializes")
    }

    pub fn routines(&self) -> &[RoutineRecord] {
        &self.routines
    }

    pub fn routine(&self, id: &str) -> Result<&RoutineRecord> {
        self.by_id.get(id).map(|&i| &self.routines[i]).ok_or_else(|| TaxonomyError::UnknownRoutine(id.to_string()))
    }

    pub fn question(&self, id: &str) -> Option<&Question> {
        self.question_index.get(id).map(|&i| &self.questions[i])
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    /// Libraries that have routines or a guided-search tree.
    pub fn libraries(&self) -> Vec<Library> {
        let mut libs: BTreeSet<Library> = self.routines.iter().map(|r| r.library).collect();
        libs.extend(self.trees.keys().copied());
        libs.into_iter().collect()
    }

    pub fn tree(&self, library: Library) -> Result<&DecisionTree> {
        self.trees.get(&library).ok_or(TaxonomyError::NoTree(library))
    }

    pub fn has_tree(&self, library: Library) -> bool {
        self.trees.contains_key(&library)
    }

    pub(crate) fn candidates_at(&self, library: Library, node: &str) -> BTreeSet<String> {
        self.candidates.get(&library).and_then(|m| m.get(node)).cloned().unwrap_or_default()
    }

    /// Path table of a library's question tree.
    pub fn path_table(&self, library: Library) -> Result<PathTable> {
        let tree = self.tree(library)?;
        Ok(flatten_tree(tree, &|id| self.question(id)))
    }

    /// Documentation for a routine.
    pub fn routine_doc(&self, id: &str) -> Result<RoutineDoc<'_>> {
        let r = self.routine(id)?;
        Ok(RoutineDoc {
            id: &r.id,
            library: r.library,
            name: &r.name,
            description: &r.description,
            documentation: &r.documentation,
            parameters: &r.parameters,
        })
    }

    /// Advanced search: routines satisfying every facet constraint, in document order.
    pub fn filter(&self, filter: &FacetFilter) -> Vec<&RoutineRecord> {
        self.routines.iter().filter(|r| filter.accepts(r)).collect()
    }

    /// Starts a guided search at the root of `library`'s tree.
    pub fn start_session(&self, library: Library, session_id: impl Into<String>) -> Result<GuidedSession> {
        GuidedSession::start(self, library, session_id.into())
    }
}
