//! Okapi BM25 scoring over small per-question answer collections.
//!
//! The IDF uses the non-negative log(1 + (N - n + 0.5)/(n + 0.5)) form, so
//! scores never go negative on the tiny collections this toolkit ranks.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

/// Term-frequency saturation (`k1`) and length normalization (`b`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Bm25Params {
    /// Validates `k1 >= 0` and `b` in `[0, 1]`.
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        if !k1.is_finite() || k1 < 0.0 {
            return Err(Error::invalid(format!("bm25 k1 must be >= 0, got {k1}")));
        }
        if !b.is_finite() || !(0.0..=1.0).contains(&b) {
            return Err(Error::invalid(format!("bm25 b must be in [0, 1], got {b}")));
        }
        Ok(Bm25Params { k1, b })
    }
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// Lowercases and splits on maximal runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Collection statistics for BM25 scoring. Immutable after build.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    doc_lengths: Vec<usize>,
    term_counts: Vec<HashMap<String, usize>>,
    avg_doc_length: f64,
    doc_freq: HashMap<String, usize>,
    params: Bm25Params,
}

impl Bm25Index {
    /// Builds collection statistics over tokenized documents.
    pub fn build(docs: &[Vec<String>], params: Bm25Params) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::invalid("cannot build a BM25 index over an empty collection"));
        }
        let doc_lengths: Vec<usize> = docs.iter().map(Vec::len).collect();
        let avg_doc_length = doc_lengths.iter().sum::<usize>() as f64 / docs.len() as f64;
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        let mut term_counts = Vec::with_capacity(docs.len());
        for doc in docs {
            let mut counts: HashMap<String, usize> = HashMap::new();
            for tok in doc {
                *counts.entry(tok.clone()).or_insert(0) += 1;
            }
            for term in counts.keys() {
                *doc_freq.entry(term.clone()).or_insert(0) += 1;
            }
            term_counts.push(counts);
        }
        Ok(Bm25Index {
            doc_lengths,
            term_counts,
            avg_doc_length,
            doc_freq,
            params,
        })
    }

    pub fn num_docs(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn doc_length(&self, doc_index: usize) -> usize {
        self.doc_lengths[doc_index]
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    /// Number of documents containing `term` (0 when absent from the collection).
    pub fn doc_freq(&self, term: &str) -> usize {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    /// log(1 + (N - n + 0.5) / (n + 0.5)); strictly positive for any n <= N.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_freq(term) as f64;
        let big_n = self.num_docs() as f64;
        (1.0 + (big_n - n + 0.5) / (n + 0.5)).ln()
    }

    /// BM25 score of document `doc_index` against `query`.
    ///
    /// Sums over distinct query terms; query-term multiplicity is ignored and
    /// terms absent from the document contribute zero.
    pub fn score(&self, query: &[String], doc_index: usize) -> Result<f64> {
        if doc_index >= self.num_docs() {
            return Err(Error::invalid(format!(
                "doc_index {doc_index} out of range for a {}-document collection",
                self.num_docs()
            )));
        }
        let counts = &self.term_counts[doc_index];
        let dl = self.doc_lengths[doc_index] as f64;
        let Bm25Params { k1, b } = self.params;
        let mut seen: HashSet<&str> = HashSet::new();
        let mut total = 0.0;
        for term in query {
            if !seen.insert(term.as_str()) {
                continue;
            }
            let tf = counts.get(term).copied().unwrap_or(0) as f64;
            if tf == 0.0 {
                continue;
            }
            // tf > 0 implies a non-empty document, so avg_doc_length > 0 here.
            let norm = 1.0 - b + b * dl / self.avg_doc_length;
            total += self.idf(term) * tf * (k1 + 1.0) / (tf + k1 * norm);
        }
        Ok(total)
    }

    /// Scores every document against `query`, in document order.
    pub fn score_all(&self, query: &[String]) -> Vec<(usize, f64)> {
        (0..self.num_docs())
            .map(|d| (d, self.score(query, d).expect("doc index in range")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn fixed_corpus() -> Vec<Vec<String>> {
        vec![toks(&["a", "b"]), toks(&["a", "a", "b"]), toks(&["c"])]
    }

    #[test]
    fn tokenize_splits_on_non_alphanumeric() {
        assert_eq!(tokenize("Aspirin, 81mg?"), toks(&["aspirin", "81mg"]));
    }

    #[test]
    fn tokenize_empty_string() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_lowercases() {
        assert_eq!(tokenize("A a A"), toks(&["a", "a", "a"]));
    }

    #[test]
    fn build_counts_statistics() {
        let idx = Bm25Index::build(&fixed_corpus(), Bm25Params::default()).unwrap();
        assert_eq!(idx.num_docs(), 3);
        assert_eq!(idx.avg_doc_length(), 2.0);
        assert_eq!(idx.doc_freq("a"), 2);
        assert_eq!(idx.doc_freq("b"), 2);
        assert_eq!(idx.doc_freq("c"), 1);
        assert_eq!(idx.doc_freq("zzz"), 0);
    }

    #[test]
    fn build_allows_empty_documents() {
        let idx = Bm25Index::build(&[vec![], toks(&["a"])], Bm25Params::default()).unwrap();
        assert_eq!(idx.doc_length(0), 0);
        assert_eq!(idx.doc_length(1), 1);
        assert_eq!(idx.avg_doc_length(), 0.5);
    }

    #[test]
    fn build_single_doc_avgdl() {
        let idx = Bm25Index::build(&[toks(&["x", "y", "z"])], Bm25Params::default()).unwrap();
        assert_eq!(idx.avg_doc_length(), 3.0);
    }

    #[test]
    fn build_empty_collection_is_error() {
        assert!(Bm25Index::build(&[], Bm25Params::default()).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(Bm25Params::new(-0.1, 0.5).is_err());
        assert!(Bm25Params::new(1.2, 1.5).is_err());
        assert!(Bm25Params::new(0.0, 0.0).is_ok());
    }

    #[test]
    fn score_unknown_terms_is_zero() {
        let idx = Bm25Index::build(&fixed_corpus(), Bm25Params::default()).unwrap();
        assert_eq!(idx.score(&toks(&["zzz", "qqq"]), 0).unwrap(), 0.0);
    }

    #[test]
    fn score_fixed_corpus_matches_hand_computed_values() {
        // Hand-evaluated: idf(a) = ln(1 + (3-2+0.5)/(2+0.5)) = ln(1.6);
        // doc0: tf 1, dl 2 -> idf * 2.2/2.2; doc1: tf 2, dl 3 -> idf * 4.4/3.65.
        let idx = Bm25Index::build(&fixed_corpus(), Bm25Params::default()).unwrap();
        let q = toks(&["a"]);
        let s0 = idx.score(&q, 0).unwrap();
        let s1 = idx.score(&q, 1).unwrap();
        let s2 = idx.score(&q, 2).unwrap();
        assert!((s0 - 0.47000362924573563).abs() < 1e-15, "s0 = {s0}");
        assert!((s1 - 0.5665797174469143).abs() < 1e-15, "s1 = {s1}");
        assert_eq!(s2, 0.0);
        assert!(s1 > s0 && s0 > s2);
    }

    #[test]
    fn duplicated_query_terms_do_not_change_score() {
        let idx = Bm25Index::build(&fixed_corpus(), Bm25Params::default()).unwrap();
        let once = idx.score(&toks(&["a"]), 1).unwrap();
        let twice = idx.score(&toks(&["a", "a"]), 1).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn score_out_of_range_doc_is_error() {
        let idx = Bm25Index::build(&fixed_corpus(), Bm25Params::default()).unwrap();
        assert!(idx.score(&toks(&["a"]), 3).is_err());
    }

    #[test]
    fn score_all_matches_score_elementwise() {
        let idx = Bm25Index::build(&fixed_corpus(), Bm25Params::default()).unwrap();
        let q = toks(&["a", "c"]);
        let all = idx.score_all(&q);
        assert_eq!(all.len(), 3);
        for (d, s) in all {
            assert_eq!(s, idx.score(&q, d).unwrap());
        }
    }

    #[test]
    fn score_all_empty_query_is_all_zero() {
        let idx = Bm25Index::build(&fixed_corpus(), Bm25Params::default()).unwrap();
        assert!(idx.score_all(&[]).iter().all(|&(_, s)| s == 0.0));
    }

    #[test]
    fn tf_monotonicity_fixed_length() {
        let docs = vec![toks(&["a", "x", "y"]), toks(&["a", "a", "y"]), toks(&["a", "a", "a"])];
        let idx = Bm25Index::build(&docs, Bm25Params::default()).unwrap();
        let q = toks(&["a"]);
        let s: Vec<f64> = (0..3).map(|d| idx.score(&q, d).unwrap()).collect();
        assert!(s[0] < s[1] && s[1] < s[2], "{s:?}");
    }

    #[test]
    fn b_zero_disables_length_normalization() {
        let docs = vec![toks(&["a"]), toks(&["a", "x", "y", "z"])];
        let idx = Bm25Index::build(&docs, Bm25Params::new(1.2, 0.0).unwrap()).unwrap();
        let q = toks(&["a"]);
        let s0 = idx.score(&q, 0).unwrap();
        let s1 = idx.score(&q, 1).unwrap();
        assert_eq!(s0, s1);
    }

    /// Literal re-evaluation of the BM25 formula, kept independent of the
    /// implementation above.
    pub(crate) fn oracle_score(docs: &[Vec<String>], params: Bm25Params, query: &[String], d: usize) -> f64 {
        let n_docs = docs.len() as f64;
        let avgdl = docs.iter().map(|x| x.len()).sum::<usize>() as f64 / n_docs;
        let mut distinct: Vec<&String> = Vec::new();
        for t in query {
            if !distinct.contains(&t) {
                distinct.push(t);
            }
        }
        let mut total = 0.0;
        for t in distinct {
            let tf = docs[d].iter().filter(|w| *w == t).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let n_t = docs.iter().filter(|doc| doc.contains(t)).count() as f64;
            let idf = (1.0 + (n_docs - n_t + 0.5) / (n_t + 0.5)).ln();
            let dl = docs[d].len() as f64;
            total += idf * (tf * (params.k1 + 1.0))
                / (tf + params.k1 * (1.0 - params.b + params.b * dl / avgdl));
        }
        total
    }

    fn arb_doc() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 0..=4)
            .prop_map(|v| v.into_iter().map(str::to_string).collect())
    }

    proptest! {
        #[test]
        fn scores_match_oracle_and_are_non_negative(
            docs in prop::collection::vec(arb_doc(), 1..=4),
            query in prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), 0..=4),
            k1 in 0.0f64..3.0,
            b in 0.0f64..=1.0,
        ) {
            let query: Vec<String> = query.into_iter().map(str::to_string).collect();
            let params = Bm25Params::new(k1, b).unwrap();
            let idx = Bm25Index::build(&docs, params).unwrap();
            for d in 0..docs.len() {
                let got = idx.score(&query, d).unwrap();
                let want = oracle_score(&docs, params, &query, d);
                prop_assert!(got >= 0.0);
                let denom = want.abs().max(1.0);
                prop_assert!((got - want).abs() / denom < 1e-12, "got {got}, want {want}");
            }
        }
    }
}
