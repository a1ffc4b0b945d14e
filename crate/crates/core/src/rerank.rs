//! Bucketed answer re-ranking: partition a question's answers by predicted
//! label, concatenate buckets from best label to worst, and order each bucket
//! by descending BM25 score with ties broken by the upstream retrieval order.

use serde::{Deserialize, Serialize};

use crate::bm25::{tokenize, Bm25Index, Bm25Params};
use crate::data::{LabelDomain, PredictionSet, QaQuestion};
use crate::error::{Error, Result};

/// Predicted-label domain used when writing and re-reading rankings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    /// Labels in {1, 0}: 1 = relevant.
    Binary,
    /// Labels in {4, 3, 2, 1}: graded reference scores, 4 best.
    Graded,
}

impl LabelMode {
    pub fn domain(self) -> LabelDomain {
        match self {
            LabelMode::Binary => LabelDomain::qa_binary(),
            LabelMode::Graded => LabelDomain::qa_graded(),
        }
    }

    /// Maps a predicted label to its relevance marking: graded {4,3} and
    /// binary {1} are "yes", the rest "no".
    pub fn yes_no_marking(self, label: &str) -> Result<&'static str> {
        let yes = match self {
            LabelMode::Binary => matches!(label, "1"),
            LabelMode::Graded => matches!(label, "3" | "4"),
        };
        if !self.domain().contains(label) {
            return Err(Error::invalid(format!(
                "label {label:?} outside the {self:?} domain"
            )));
        }
        Ok(if yes { "yes" } else { "no" })
    }
}

impl std::str::FromStr for LabelMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(LabelMode::Binary),
            "graded" => Ok(LabelMode::Graded),
            other => Err(Error::invalid(format!(
                "unknown label mode {other:?} (expected \"binary\" or \"graded\")"
            ))),
        }
    }
}

impl std::fmt::Display for LabelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LabelMode::Binary => "binary",
            LabelMode::Graded => "graded",
        })
    }
}

/// One re-ranked answer with the inputs that placed it there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub answer_id: String,
    pub label: String,
    pub bm25: f64,
}

/// The final ordering of one question's answers; position is 1-based rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub question_id: String,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn answer_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.answer_id.as_str())
    }
}

/// Re-ranks with BM25 scores computed from `index`, which must hold exactly
/// this question's answers in their original order.
pub fn rerank_bucketed(
    question: &QaQuestion,
    predictions: &PredictionSet,
    label_order: &[String],
    index: &Bm25Index,
) -> Result<RankedList> {
    if index.num_docs() != question.answers().len() {
        return Err(Error::invalid(format!(
            "index holds {} documents but question {:?} has {} answers",
            index.num_docs(),
            question.question_id(),
            question.answers().len()
        )));
    }
    let query = tokenize(question.question_text());
    let scores: Vec<f64> = index.score_all(&query).into_iter().map(|(_, s)| s).collect();
    rerank_with_scores(question, predictions, label_order, &scores)
}

/// Re-ranks from precomputed per-answer BM25 scores (parallel to
/// `question.answers()`). This is the ordering core shared by all runs.
pub fn rerank_with_scores(
    question: &QaQuestion,
    predictions: &PredictionSet,
    label_order: &[String],
    scores: &[f64],
) -> Result<RankedList> {
    if scores.len() != question.answers().len() {
        return Err(Error::invalid(format!(
            "{} scores for {} answers of question {:?}",
            scores.len(),
            question.answers().len(),
            question.question_id()
        )));
    }
    let mut rows: Vec<(usize, &str, f64, usize)> = Vec::with_capacity(scores.len());
    for (answer, &score) in question.answers().iter().zip(scores) {
        if !score.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite BM25 score for answer {:?}",
                answer.answer_id
            )));
        }
        let pair_id = format!("{}#{}", question.question_id(), answer.answer_id);
        let label = predictions.get(&pair_id).ok_or_else(|| {
            Error::invalid(format!("missing prediction for {pair_id:?}"))
        })?;
        let bucket = label_order.iter().position(|l| l == label).ok_or_else(|| {
            Error::invalid(format!(
                "predicted label {:?} for {:?} not in label order {:?}",
                label, pair_id, label_order
            ))
        })?;
        rows.push((bucket, label, score, answer.original_rank));
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&i, &j| {
        let (bi, _, si, ri) = rows[i];
        let (bj, _, sj, rj) = rows[j];
        bi.cmp(&bj)
            .then(sj.partial_cmp(&si).expect("scores are finite"))
            .then(ri.cmp(&rj))
    });
    let entries = order
        .into_iter()
        .map(|i| RankedEntry {
            answer_id: question.answers()[i].answer_id.clone(),
            label: rows[i].1.to_string(),
            bm25: rows[i].2,
        })
        .collect();
    Ok(RankedList {
        question_id: question.question_id().to_string(),
        entries,
    })
}

/// Builds the per-question BM25 index over the question's own answers.
pub fn question_index(question: &QaQuestion, params: Bm25Params) -> Result<Bm25Index> {
    let docs: Vec<Vec<String>> = question
        .answers()
        .iter()
        .map(|a| tokenize(&a.answer_text))
        .collect();
    Bm25Index::build(&docs, params)
}

/// Binary-label run: relevant answers (label 1) first, each bucket by BM25.
pub fn rerank_run1(question: &QaQuestion, predictions: &PredictionSet) -> Result<RankedList> {
    let index = question_index(question, Bm25Params::default())?;
    rerank_bucketed(
        question,
        predictions,
        &LabelMode::Binary.domain().labels,
        &index,
    )
}

/// Graded-label run: buckets 4, 3, 2, 1 in order, each by BM25. Also returns
/// the derived yes/no markings ({3,4} -> yes) used for accuracy and precision.
pub fn rerank_run2(
    question: &QaQuestion,
    predictions: &PredictionSet,
) -> Result<(RankedList, PredictionSet)> {
    let index = question_index(question, Bm25Params::default())?;
    let ranked = rerank_bucketed(
        question,
        predictions,
        &LabelMode::Graded.domain().labels,
        &index,
    )?;
    let mut markings = PredictionSet::new(LabelDomain::qa_yes_no());
    for entry in &ranked.entries {
        let pair_id = format!("{}#{}", question.question_id(), entry.answer_id);
        markings.insert(pair_id, LabelMode::Graded.yes_no_marking(&entry.label)?)?;
    }
    Ok((ranked, markings))
}
