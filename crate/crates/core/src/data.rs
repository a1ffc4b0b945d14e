//! Dataset loading, validation, and label transformations.
//!
//! All on-disk formats are line-oriented JSONL (UTF-8, LF):
//!
//! - pair dataset: `{"id": str, "text_a": str, "text_b": str, "label": str?, "score": int?}`
//! - QA dataset: `{"question_id": str, "question": str, "answer_id": str, "answer": str, "score": int?}`
//!   (one line per answer; answers are grouped by `question_id` at load)
//! - predictions: `{"id": str, "label": str}`
//!
//! Loaders are strict: malformed lines, duplicate ids, out-of-range scores, and
//! labels outside the declared domain are hard errors reported with line numbers.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Valid range of gold reference scores.
pub const SCORE_MIN: u8 = 1;
pub const SCORE_MAX: u8 = 4;

/// One text pair: premise/hypothesis, question/question, or question/answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextPairExample {
    pub id: String,
    pub text_a: String,
    pub text_b: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<u8>,
}

/// One retrieved answer candidate with its position in the upstream ranking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerCandidate {
    pub answer_id: String,
    pub answer_text: String,
    /// 1-based position in the upstream retrieval order.
    pub original_rank: usize,
    /// Gold reference score in 1..=4, when distributed with the dataset.
    pub gold_score: Option<u8>,
}

/// A question together with its ordered candidate answers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaQuestion {
    question_id: String,
    question_text: String,
    answers: Vec<AnswerCandidate>,
}

impl QaQuestion {
    /// Builds a question, enforcing a non-empty answer list, unique answer ids,
    /// and contiguous 1-based original ranks.
    pub fn new(
        question_id: impl Into<String>,
        question_text: impl Into<String>,
        answers: Vec<AnswerCandidate>,
    ) -> Result<Self> {
        let question_id = question_id.into();
        let question_text = question_text.into();
        if answers.is_empty() {
            return Err(Error::invalid(format!(
                "question {question_id:?} has zero answers"
            )));
        }
        let mut seen = HashSet::new();
        for (i, a) in answers.iter().enumerate() {
            if !seen.insert(a.answer_id.clone()) {
                return Err(Error::invalid(format!(
                    "question {question_id:?}: duplicate answer id {:?}",
                    a.answer_id
                )));
            }
            if a.original_rank != i + 1 {
                return Err(Error::invalid(format!(
                    "question {question_id:?}: answer {:?} has original_rank {} at position {}",
                    a.answer_id,
                    a.original_rank,
                    i + 1
                )));
            }
        }
        Ok(QaQuestion {
            question_id,
            question_text,
            answers,
        })
    }

    pub fn question_id(&self) -> &str {
        &self.question_id
    }

    pub fn question_text(&self) -> &str {
        &self.question_text
    }

    pub fn answers(&self) -> &[AnswerCandidate] {
        &self.answers
    }
}

/// Which task a label domain belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskTag {
    Nli,
    Rqe,
    Qa,
}

/// An ordered list of admissible labels. Where order matters (bucketed
/// re-ranking, the positive class for precision) it runs high to low.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDomain {
    pub task: TaskTag,
    pub labels: Vec<String>,
}

impl LabelDomain {
    pub fn new(task: TaskTag, labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("label domain must not be empty"));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::invalid(format!("duplicate label {l:?} in domain")));
            }
        }
        Ok(LabelDomain { task, labels })
    }

    /// Three-way inference labels.
    pub fn nli() -> Self {
        LabelDomain {
            task: TaskTag::Nli,
            labels: vec![
                "entailment".to_string(),
                "neutral".to_string(),
                "contradiction".to_string(),
            ],
        }
    }

    /// Binary question-entailment labels.
    pub fn rqe() -> Self {
        LabelDomain {
            task: TaskTag::Rqe,
            labels: vec!["yes".to_string(), "no".to_string()],
        }
    }

    /// Binarized reference scores, positive first.
    pub fn qa_binary() -> Self {
        LabelDomain {
            task: TaskTag::Qa,
            labels: vec!["1".to_string(), "0".to_string()],
        }
    }

    /// Graded reference scores, best first.
    pub fn qa_graded() -> Self {
        LabelDomain {
            task: TaskTag::Qa,
            labels: vec![
                "4".to_string(),
                "3".to_string(),
                "2".to_string(),
                "1".to_string(),
            ],
        }
    }

    /// Derived relevance markings for QA metrics, positive first.
    pub fn qa_yes_no() -> Self {
        LabelDomain {
            task: TaskTag::Qa,
            labels: vec!["yes".to_string(), "no".to_string()],
        }
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    /// Position of `label` in the domain order (0 = highest).
    pub fn rank(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// The positive class: the first label in the domain order.
    pub fn positive(&self) -> &str {
        &self.labels[0]
    }
}

/// Externally produced per-example labels, validated against a domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    domain: LabelDomain,
    entries: BTreeMap<String, String>,
}

impl PredictionSet {
    pub fn new(domain: LabelDomain) -> Self {
        PredictionSet {
            domain,
            entries: BTreeMap::new(),
        }
    }

    /// Inserts one prediction. Duplicate ids and out-of-domain labels are errors.
    pub fn insert(&mut self, id: impl Into<String>, label: impl Into<String>) -> Result<()> {
        let id = id.into();
        let label = label.into();
        if !self.domain.contains(&label) {
            return Err(Error::invalid(format!(
                "label {:?} for id {:?} is outside the domain {:?}",
                label, id, self.domain.labels
            )));
        }
        if self.entries.contains_key(&id) {
            return Err(Error::invalid(format!("duplicate example id {id:?}")));
        }
        self.entries.insert(id, label);
        Ok(())
    }

    pub fn domain(&self) -> &LabelDomain {
        &self.domain
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.entries.get(id).map(String::as_str)
    }

    /// Entries in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when both sets hold exactly the same example ids.
    pub fn same_ids(&self, other: &PredictionSet) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.keys().zip(other.entries.keys()).all(|(a, b)| a == b)
    }
}

fn check_score(score: Option<u8>) -> std::result::Result<(), String> {
    if let Some(s) = score {
        if !(SCORE_MIN..=SCORE_MAX).contains(&s) {
            return Err(format!("score out of range: {s} (expected 1..=4)"));
        }
    }
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = Vec::new();
    for line in reader.lines() {
        lines.push(line.map_err(|e| Error::io(path, e))?);
    }
    Ok(lines)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPairRecord {
    id: String,
    text_a: String,
    text_b: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    score: Option<i64>,
}

/// Loads a pair dataset, validating labels against `domain` and scores against 1..=4.
pub fn load_pair_dataset(path: &Path, domain: &LabelDomain) -> Result<Vec<TextPairExample>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in read_lines(path)?.iter().enumerate() {
        let lineno = lineno + 1;
        let raw: RawPairRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, lineno, format!("malformed record: {e}")))?;
        if raw.id.trim().is_empty() {
            return Err(Error::parse(path, lineno, "empty id"));
        }
        if raw.text_a.trim().is_empty() || raw.text_b.trim().is_empty() {
            return Err(Error::parse(path, lineno, "empty text field"));
        }
        if !seen.insert(raw.id.clone()) {
            return Err(Error::parse(
                path,
                lineno,
                format!("duplicate example id {:?}", raw.id),
            ));
        }
        if let Some(l) = &raw.label {
            if !domain.contains(l) {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("label {:?} outside domain {:?}", l, domain.labels),
                ));
            }
        }
        let score = match raw.score {
            None => None,
            Some(s) => {
                if !(SCORE_MIN as i64..=SCORE_MAX as i64).contains(&s) {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("score out of range: {s} (expected 1..=4)"),
                    ));
                }
                Some(s as u8)
            }
        };
        out.push(TextPairExample {
            id: raw.id,
            text_a: raw.text_a,
            text_b: raw.text_b,
            label: raw.label,
            score,
        });
    }
    Ok(out)
}

/// Writes a pair dataset in the JSONL schema accepted by [`load_pair_dataset`].
pub fn save_pair_dataset(path: &Path, pairs: &[TextPairExample]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in pairs {
        serde_json::to_writer(&mut w, p)
            .map_err(|e| Error::invalid(format!("serialize {:?}: {e}", p.id)))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQaRecord {
    question_id: String,
    question: String,
    answer_id: String,
    answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<i64>,
}

/// Loads a QA dataset: one line per answer, grouped by `question_id` in
/// encounter order, with `original_rank` assigned from input order starting at 1.
pub fn load_qa_dataset(path: &Path) -> Result<Vec<QaQuestion>> {
    // (question_text, answers), keyed by question id, in encounter order.
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, (String, Vec<AnswerCandidate>)> = HashMap::new();
    let mut seen_pairs = HashSet::new();

    for (lineno, line) in read_lines(path)?.iter().enumerate() {
        let lineno = lineno + 1;
        let raw: RawQaRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, lineno, format!("malformed record: {e}")))?;
        if raw.question_id.trim().is_empty() || raw.answer_id.trim().is_empty() {
            return Err(Error::parse(path, lineno, "empty id"));
        }
        if raw.question.trim().is_empty() || raw.answer.trim().is_empty() {
            return Err(Error::parse(path, lineno, "empty text field"));
        }
        if !seen_pairs.insert((raw.question_id.clone(), raw.answer_id.clone())) {
            return Err(Error::parse(
                path,
                lineno,
                format!(
                    "duplicate (question_id, answer_id) = ({:?}, {:?})",
                    raw.question_id, raw.answer_id
                ),
            ));
        }
        let score = match raw.score {
            None => None,
            Some(s) => {
                if !(SCORE_MIN as i64..=SCORE_MAX as i64).contains(&s) {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("score out of range: {s} (expected 1..=4)"),
                    ));
                }
                Some(s as u8)
            }
        };
        let entry = grouped
            .entry(raw.question_id.clone())
            .or_insert_with(|| {
                order.push(raw.question_id.clone());
                (raw.question.clone(), Vec::new())
            });
        if entry.0 != raw.question {
            return Err(Error::parse(
                path,
                lineno,
                format!(
                    "question text for {:?} differs from an earlier line",
                    raw.question_id
                ),
            ));
        }
        let rank = entry.1.len() + 1;
        entry.1.push(AnswerCandidate {
            answer_id: raw.answer_id,
            answer_text: raw.answer,
            original_rank: rank,
            gold_score: score,
        });
    }

    order
        .into_iter()
        .map(|qid| {
            let (text, answers) = grouped.remove(&qid).expect("grouped entry exists");
            QaQuestion::new(qid, text, answers)
        })
        .collect()
}

/// Writes a QA dataset in the JSONL schema accepted by [`load_qa_dataset`].
pub fn save_qa_dataset(path: &Path, questions: &[QaQuestion]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for q in questions {
        for a in q.answers() {
            let raw = RawQaRecord {
                question_id: q.question_id().to_string(),
                question: q.question_text().to_string(),
                answer_id: a.answer_id.clone(),
                answer: a.answer_text.clone(),
                score: a.gold_score.map(i64::from),
            };
            serde_json::to_writer(&mut w, &raw)
                .map_err(|e| Error::invalid(format!("serialize {:?}: {e}", a.answer_id)))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Converts each question with N answers into N (question, answer) pairs.
///
/// Pair ids are `question_id + "#" + answer_id`; gold reference scores carry over.
pub fn flatten_qa_to_pairs(questions: &[QaQuestion]) -> Vec<TextPairExample> {
    questions
        .iter()
        .flat_map(|q| {
            q.answers().iter().map(|a| TextPairExample {
                id: format!("{}#{}", q.question_id(), a.answer_id),
                text_a: q.question_text().to_string(),
                text_b: a.answer_text.clone(),
                label: None,
                score: a.gold_score,
            })
        })
        .collect()
}

/// Maps reference scores {3,4} to 1 and {1,2} to 0, leaving other fields intact.
///
/// Every input pair must carry a score in 1..=4; missing or already-binarized
/// scores are errors, so applying this twice to the same data fails loudly.
pub fn binarize_reference_scores(pairs: &[TextPairExample]) -> Result<Vec<TextPairExample>> {
    pairs
        .iter()
        .map(|p| {
            let score = p.score.ok_or_else(|| {
                Error::invalid(format!("pair {:?} has no reference score", p.id))
            })?;
            check_score(Some(score))
                .map_err(|msg| Error::invalid(format!("pair {:?}: {msg}", p.id)))?;
            let binary = if score >= 3 { 1 } else { 0 };
            Ok(TextPairExample {
                score: Some(binary),
                ..p.clone()
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPredictionRecord {
    id: String,
    label: String,
}

/// Loads a prediction file, validating each label against `domain`.
/// Duplicate example ids are errors, never last-wins.
pub fn load_predictions(path: &Path, domain: &LabelDomain) -> Result<PredictionSet> {
    let mut set = PredictionSet::new(domain.clone());
    for (lineno, line) in read_lines(path)?.iter().enumerate() {
        let lineno = lineno + 1;
        let raw: RawPredictionRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, lineno, format!("malformed record: {e}")))?;
        set.insert(raw.id, raw.label)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
    }
    Ok(set)
}

/// Writes predictions as JSONL `{"id", "label"}` lines in ascending id order.
pub fn save_predictions(path: &Path, set: &PredictionSet) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (id, label) in set.iter() {
        let raw = RawPredictionRecord {
            id: id.to_string(),
            label: label.to_string(),
        };
        serde_json::to_writer(&mut w, &raw)
            .map_err(|e| Error::invalid(format!("serialize {id:?}: {e}")))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
