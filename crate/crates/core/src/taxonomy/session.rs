use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{AnswerOption, Library, Node, Result, Taxonomy, TaxonomyError};

/// Shown once a guided search reaches a leaf.
pub const COMPLETION_MESSAGE: &str = "End of guided search! Check out the result.";

/// State of one guided search. Sessions are plain values; every step returns
/// a new session and leaves the old one untouched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuidedSession {
    pub session_id: String,
    pub library: Library,
    pub current: String,
    /// (question id, option key) pairs in answer order.
    pub history: Vec<(String, String)>,
    pub candidates: BTreeSet<String>,
    pub finished: bool,
}

/// What a client needs to render the current step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionView {
    pub session_id: String,
    pub library: Library,
    pub question_id: Option<String>,
    pub question: Option<String>,
    pub options: Vec<AnswerOption>,
    pub candidates: Vec<String>,
    pub history: Vec<(String, String)>,
    pub finished: bool,
    pub message: Option<&'static str>,
}

impl GuidedSession {
    pub(super) fn start(tax: &Taxonomy, library: Library, session_id: String) -> Result<Self> {
        let tree = tax.tree(library)?;
        Ok(Self::at(tax, library, session_id, tree.root.clone(), Vec::new()))
    }

    fn at(
        tax: &Taxonomy,
        library: Library,
        session_id: String,
        current: String,
        history: Vec<(String, String)>,
    ) -> Self {
        let finished = matches!(tax.tree(library).ok().and_then(|t| t.node(&current)), Some(Node::Leaf { .. }));
        let candidates = tax.candidates_at(library, &current);
        Self { session_id, library, current, history, candidates, finished }
    }

    /// Options offered at the current node, in declaration order.
    pub fn options<'t>(&self, tax: &'t Taxonomy) -> Vec<&'t AnswerOption> {
        let Ok(tree) = tax.tree(self.library) else { return Vec::new() };
        match tree.node(&self.current) {
            Some(Node::Internal { question, edges }) => tax
                .question(question)
                .map(|q| q.options.iter().filter(|o| edges.contains_key(&o.key)).collect())
                .unwrap_or_default(),
            _ => Vec::new(),
        }
    }

    /// Answers the current question with `option_key`.
    pub fn answer(&self, tax: &Taxonomy, option_key: &str) -> Result<Self> {
        if self.finished {
            return Err(TaxonomyError::Finished);
        }
        let tree = tax.tree(self.library)?;
        let Some(Node::Internal { question, edges }) = tree.node(&self.current) else {
            return Err(TaxonomyError::Finished);
        };
        let Some(next) = edges.get(option_key) else {
            return Err(TaxonomyError::InvalidOption {
                given: option_key.to_string(),
                valid: self.options(tax).into_iter().map(|o| o.key.clone()).collect(),
            });
        };
        let mut history = self.history.clone();
        history.push((question.clone(), option_key.to_string()));
        Ok(Self::at(tax, self.library, self.session_id.clone(), next.clone(), history))
    }

    /// Undoes the last answer.
    pub fn back(&self, tax: &Taxonomy) -> Result<Self> {
        if self.history.is_empty() {
            return Err(TaxonomyError::AtRoot);
        }
        let keep = &self.history[..self.history.len() - 1];
        let mut s = Self::start(tax, self.library, self.session_id.clone())?;
        for (_, key) in keep {
            s = s.answer(tax, key)?;
        }
        Ok(s)
    }

    pub fn view(&self, tax: &Taxonomy) -> SessionView {
        let question = match tax.tree(self.library).ok().and_then(|t| t.node(&self.current)) {
            Some(Node::Internal { question, .. }) => tax.question(question),
            _ => None,
        };
        SessionView {
            session_id: self.session_id.clone(),
            library: self.library,
            question_id: question.map(|q| q.id.clone()),
            question: question.map(|q| q.text.clone()),
            options: self.options(tax).into_iter().cloned().collect(),
            candidates: self.candidates.iter().cloned().collect(),
            history: self.history.clone(),
            finished: self.finished,
            message: self.finished.then_some(COMPLETION_MESSAGE),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRANSCRIPT: [&str; 6] = ["linear_solve", "ax_b", "real", "general", "band", "double"];

    fn small() -> Taxonomy {
        Taxonomy::from_json(crate::data::LAPACK_TAXONOMY_SMALL).unwrap()
    }

    #[test]
    fn start_covers_all_routines() {
        let t = small();
        let s = t.start_session(Library::Lapack, "s").unwrap();
        assert_eq!(s.candidates.len(), 12);
        assert!(!s.finished);
        assert_eq!(s.view(&t).question.as_deref(), Some("Which of the following functions do you wish to execute?"));
        assert!(matches!(t.start_session(Library::Slepc, "s"), Err(TaxonomyError::NoTree(Library::Slepc))));
    }

    #[test]
    fn dgbsv_transcript() {
        for t in [small(), Taxonomy::bundled()] {
            let mut s = t.start_session(Library::Lapack, "s").unwrap();
            let expected_questions = [
                "Which of the following functions do you wish to execute?",
                "What form of the linear system do you want to solve?",
                "Are there complex numbers in your matrix?",
                "What is the type of your matrix?",
                "How is your matrix stored?",
                "Would you like to use single or double precision?",
            ];
            let expected_texts =
                ["Solve a system of linear equations only", "AX = B", "No", "general", "band", "double"];
            for ((key, qtext), otext) in TRANSCRIPT.iter().zip(expected_questions).zip(expected_texts) {
                let view = s.view(&t);
                assert_eq!(view.question.as_deref(), Some(qtext));
                assert_eq!(view.options.iter().find(|o| o.key == *key).unwrap().text, otext);
                let next = s.answer(&t, key).unwrap();
                assert!(next.candidates.is_subset(&s.candidates));
                s = next;
            }
            assert!(s.finished);
            assert_eq!(s.candidates.iter().collect::<Vec<_>>(), ["DGBSV"]);
            assert_eq!(s.view(&t).message, Some(COMPLETION_MESSAGE));
            assert!(matches!(s.answer(&t, "double"), Err(TaxonomyError::Finished)));
        }
    }

    #[test]
    fn first_answer_narrows_strictly() {
        let t = small();
        let s = t.start_session(Library::Lapack, "s").unwrap();
        let next = s.answer(&t, "linear_solve").unwrap();
        assert!(next.candidates.len() < s.candidates.len());
    }

    #[test]
    fn invalid_option_lists_valid_ones() {
        let t = small();
        let s = t.start_session(Library::Lapack, "s").unwrap();
        let err = s.answer(&t, "purple").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("purple") && msg.contains("linear_solve") && msg.contains("linear_solve_expert"), "{msg}");
    }

    #[test]
    fn back_inverts_answer() {
        let t = small();
        let start = t.start_session(Library::Lapack, "s").unwrap();
        assert!(matches!(start.back(&t), Err(TaxonomyError::AtRoot)));
        let mut s = start.clone();
        for key in TRANSCRIPT {
            s = s.answer(&t, key).unwrap();
        }
        for _ in TRANSCRIPT {
            s = s.back(&t).unwrap();
        }
        assert_eq!(s, start);

        let a = start.answer(&t, "linear_solve").unwrap();
        let again = a.back(&t).unwrap().answer(&t, "linear_solve").unwrap();
        assert_eq!(a, again);
    }
}
