//! Keyword search over routine records.
//!
//! Text is lowercased and split on anything that is not a letter or digit;
//! stop words are dropped. Query tokens only count when they are vocabulary
//! words or routine names, which keeps filler words from widening results.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::RoutineRecord;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("no routines to index")]
    NoRoutines,
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("unknown search mode `{0}`; expected `all` or `any`")]
    UnknownMode(String),
}

pub type Result<T, E = SearchError> = std::result::Result<T, E>;

/// Weight of a token hit in each routine field.
pub const NAME_WEIGHT: u32 = 3;
pub const DESCRIPTION_WEIGHT: u32 = 2;
pub const DOCUMENTATION_WEIGHT: u32 = 1;
/// Maximum number of autocomplete suggestions.
pub const SUGGESTION_CAP: usize = 10;
/// Largest accepted edit distance for spelling correction.
pub const MAX_EDIT_DISTANCE: usize = 2;

pub const STOP_WORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "has", "i", "if", "in", "into", "is", "it", "its",
    "my", "of", "on", "or", "so", "than", "that", "the", "then", "this", "to", "want", "was", "were", "what", "when",
    "where", "which", "with", "would",
];

/// Lowercases, splits on non-alphanumerics and drops stop words.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOP_WORDS.contains(&t.as_str()))
        .collect()
}

fn normalize_phrase(text: &str) -> String {
    tokenize(text).join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    All,
    Any,
}

impl FromStr for Mode {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(Mode::All),
            "any" => Ok(Mode::Any),
            _ => Err(SearchError::UnknownMode(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub id: String,
    pub name: String,
    pub description: String,
    pub score: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    id: String,
    name: String,
    description: String,
}

/// Inverted index with a vocabulary filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchIndex {
    entries: Vec<Entry>,
    /// token -> entry index -> summed field weight
    postings: BTreeMap<String, BTreeMap<usize, u32>>,
    /// Normalized vocabulary terms and phrases.
    terms: BTreeSet<String>,
    /// Single words of the vocabulary, the query-side filter.
    words: BTreeSet<String>,
    /// Lowercased routine names.
    names: BTreeSet<String>,
}

/// Parses a vocabulary file: one term or phrase per line, `#` comments.
pub fn parse_vocabulary(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(normalize_phrase)
        .filter(|t| !t.is_empty())
        .collect()
}

impl SearchIndex {
    pub fn build(routines: &[RoutineRecord], vocabulary: &str) -> Result<Self> {
        if routines.is_empty() {
            return Err(SearchError::NoRoutines);
        }
        let terms = parse_vocabulary(vocabulary);
        if terms.is_empty() {
            return Err(SearchError::EmptyVocabulary);
        }
        let words = terms.iter().flat_map(|t| t.split(' ')).map(str::to_string).collect();
        let mut entries: Vec<Entry> = routines
            .iter()
            .map(|r| Entry { id: r.id.clone(), name: r.name.clone(), description: r.description.clone() })
            .collect();
        entries.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.id.cmp(&b.id)));
        let mut postings: BTreeMap<String, BTreeMap<usize, u32>> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            let r = routines.iter().find(|r| r.id == e.id).expect("same routines");
            for (text, weight) in
                [(&r.name, NAME_WEIGHT), (&r.description, DESCRIPTION_WEIGHT), (&r.documentation, DOCUMENTATION_WEIGHT)]
            {
                let field: BTreeSet<String> = tokenize(text).into_iter().collect();
                for token in field {
                    *postings.entry(token).or_default().entry(i).or_default() += weight;
                }
            }
        }
        let names = entries.iter().map(|e| e.name.to_lowercase()).collect();
        Ok(Self { entries, postings, terms, words, names })
    }

    /// Query tokens that take part in matching, deduplicated in input order.
    pub fn query_terms(&self, text: &str) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in tokenize(text) {
            if (self.words.contains(&t) || self.names.contains(&t)) && !out.contains(&t) {
                out.push(t);
            }
        }
        out
    }

    /// Routines matching every (`All`) or some (`Any`) query term, by
    /// descending weighted hits, then name.
    pub fn query(&self, text: &str, mode: Mode) -> Vec<SearchHit> {
        let terms = self.query_terms(text);
        if terms.is_empty() {
            return Vec::new();
        }
        let mut scores: BTreeMap<usize, (usize, u32)> = BTreeMap::new();
        for t in &terms {
            for (&i, &w) in self.postings.get(t).into_iter().flatten() {
                let s = scores.entry(i).or_default();
                s.0 += 1;
                s.1 += w;
            }
        }
        let mut hits: Vec<(usize, u32)> = scores
            .into_iter()
            .filter(|(_, (n, _))| mode == Mode::Any || *n == terms.len())
            .map(|(i, (_, w))| (i, w))
            .collect();
        // entries are sorted by name, so index order breaks score ties by name
        hits.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        hits.into_iter()
            .map(|(i, score)| {
                let e = &self.entries[i];
                SearchHit { id: e.id.clone(), name: e.name.clone(), description: e.description.clone(), score }
            })
            .collect()
    }

    /// Vocabulary terms and routine names starting with `prefix`, ignoring case.
    pub fn autocomplete(&self, prefix: &str) -> Vec<String> {
        let p = prefix.trim().to_lowercase();
        if p.is_empty() {
            return Vec::new();
        }
        let mut out: Vec<String> = self
            .terms
            .iter()
            .filter(|t| t.starts_with(&p))
            .cloned()
            .chain(self.entries.iter().filter(|e| e.name.to_lowercase().starts_with(&p)).map(|e| e.name.clone()))
            .collect();
        out.sort_by(|a, b| a.to_lowercase().cmp(&b.to_lowercase()).then_with(|| a.cmp(b)));
        out.dedup();
        out.truncate(SUGGESTION_CAP);
        out
    }

    /// How often a word occurs across the indexed routines.
    pub fn frequency(&self, word: &str) -> usize {
        self.postings.get(word).map_or(0, BTreeMap::len)
    }

    /// Nearest vocabulary word within [`MAX_EDIT_DISTANCE`] by
    /// Damerau-Levenshtein distance. Ties go to the more frequent word, then
    /// the lexicographically smaller one.
    pub fn spell_correct(&self, token: &str) -> Option<String> {
        let t = token.trim().to_lowercase();
        if t.is_empty() {
            return None;
        }
        if self.words.contains(&t) {
            return Some(t);
        }
        self.words
            .iter()
            .map(|w| (strsim::damerau_levenshtein(&t, w), w))
            .filter(|(d, _)| *d <= MAX_EDIT_DISTANCE)
            .min_by(|(da, a), (db, b)| {
                da.cmp(db).then_with(|| self.frequency(b).cmp(&self.frequency(a))).then_with(|| a.cmp(b))
            })
            .map(|(_, w)| w.clone())
    }

    /// The query with misspelled words replaced, or `None` if nothing changed.
    pub fn correct_query(&self, text: &str) -> Option<String> {
        let mut changed = false;
        let words: Vec<String> = tokenize(text)
            .into_iter()
            .map(|t| {
                if self.words.contains(&t) || self.names.contains(&t) {
                    return t;
                }
                match self.spell_correct(&t) {
                    Some(c) => {
                        changed = true;
                        c
                    }
                    None => t,
                }
            })
            .collect();
        changed.then(|| words.join(" "))
    }

    pub fn contains_token(&self, token: &str) -> bool {
        self.postings.contains_key(token)
    }

    pub fn vocabulary(&self) -> &BTreeSet<String> {
        &self.terms
    }
}

/// Builds an index over `routines` filtered by `vocabulary` text.
pub fn build_index(routines: &[RoutineRecord], vocabulary: &str) -> Result<SearchIndex> {
    SearchIndex::build(routines, vocabulary)
}
