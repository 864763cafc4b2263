//! BM25 retrieval over a sentence collection.
//!
//! Each sentence is one document. Scores use the Lucene-style IDF
//! `ln(1 + (N - df + 0.5) / (df + 0.5))` and the usual saturation term
//! `tf·(k1+1) / (tf + k1·(1 - b + b·len/avg_len))`.

mod cache;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{self, term_set, tokenize, CorpusStats, TermSet, Token, TokenizerConfig};

pub use cache::{decode_index, encode_index, read_index, write_index, CACHE_MAGIC, CACHE_VERSION};

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub idx: usize,
    pub text: String,
    pub tokens: Vec<Token>,
    pub terms: TermSet,
}

impl Sentence {
    pub fn new(idx: usize, text: impl Into<String>, cfg: &TokenizerConfig) -> Self {
        let text = text.into();
        let tokens = tokenize(&text, cfg);
        Self::from_tokens(idx, text, tokens)
    }

    pub fn from_tokens(idx: usize, text: String, tokens: Vec<Token>) -> Self {
        let terms = term_set(&tokens);
        Self {
            idx,
            text,
            tokens,
            terms,
        }
    }

    /// Token count.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tf(&self, term: &str) -> u32 {
        self.tokens.iter().filter(|t| t.as_str() == term).count() as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub q_terms: TermSet,
    pub a_terms: TermSet,
    pub all_tokens: Vec<Token>,
    /// Distinct terms of `all_tokens` in first-occurrence order, with counts.
    term_counts: Vec<(Token, u32)>,
}

impl Query {
    pub fn new(q_terms: TermSet, a_terms: TermSet, all_tokens: Vec<Token>) -> Self {
        let mut term_counts: Vec<(Token, u32)> = Vec::new();
        let mut pos: HashMap<&str, usize> = HashMap::new();
        for t in &all_tokens {
            match pos.get(t.as_str()) {
                Some(&i) => term_counts[i].1 += 1,
                None => {
                    pos.insert(t.as_str(), term_counts.len());
                    term_counts.push((t.clone(), 1));
                }
            }
        }
        Self {
            q_terms,
            a_terms,
            all_tokens,
            term_counts,
        }
    }

    /// Query terms in first-occurrence order with their multiplicity in
    /// `all_tokens`. With `unique_query_terms` every multiplicity is 1.
    pub fn weighted_terms<'q>(
        &'q self,
        params: &Bm25Params,
    ) -> impl Iterator<Item = (&'q Token, u32)> + 'q {
        let unique = params.unique_query_terms;
        self.term_counts
            .iter()
            .map(move |(t, c)| (t, if unique { 1 } else { *c }))
    }
}

pub fn form_query(question: &str, answer: &str, cfg: &TokenizerConfig) -> Result<Query> {
    if question.trim().is_empty() {
        return Err(Error::EmptyQuestion);
    }
    let q_tokens = tokenize(question, cfg);
    let a_tokens = tokenize(answer, cfg);
    let q_terms = term_set(&q_tokens);
    let a_terms = term_set(&a_tokens);
    let mut all_tokens = q_tokens;
    all_tokens.extend(a_tokens);
    Ok(Query::new(q_terms, a_terms, all_tokens))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    /// Count each distinct query term once, regardless of repetition.
    pub unique_query_terms: bool,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: 1.2,
            b: 0.75,
            unique_query_terms: true,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(Error::Config(format!(
                "bm25 k1 must be >= 0, got {}",
                self.k1
            )));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!(
                "bm25 b must lie in [0, 1], got {}",
                self.b
            )));
        }
        Ok(())
    }

    #[inline]
    fn term_weight(&self, idf: f64, tf: u32, len: usize, avg_len: f64) -> f64 {
        let tf = tf as f64;
        let norm = self.k1 * (1.0 - self.b + self.b * len as f64 / avg_len);
        idf * tf * (self.k1 + 1.0) / (tf + norm)
    }
}

pub fn bm25_score(query: &Query, sent: &Sentence, stats: &CorpusStats, params: &Bm25Params) -> f64 {
    let mut score = 0.0;
    for (term, mult) in query.weighted_terms(params) {
        let tf = sent.tf(term);
        if tf == 0 {
            continue;
        }
        let w = params.term_weight(stats.idf(term), tf, sent.len(), stats.avg_len);
        score += w * mult as f64;
    }
    score
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    /// Position of the sentence in [`Index::sentences`].
    pub pos: u32,
    pub tf: u32,
}

/// Inverted index over a sentence collection.
#[derive(Debug, Clone)]
pub struct Index {
    pub tokenizer: TokenizerConfig,
    pub postings: HashMap<Token, Vec<Posting>>,
    pub stats: CorpusStats,
    /// Sorted by ascending `idx`.
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, Copy)]
pub struct Retrieved<'a> {
    pub sentence: &'a Sentence,
    pub score: f64,
}

pub fn build_index(sentences: Vec<Sentence>, tokenizer: TokenizerConfig) -> Result<Index> {
    let mut sentences = sentences;
    sentences.sort_by_key(|s| s.idx);
    if let Some(w) = sentences.windows(2).find(|w| w[0].idx == w[1].idx) {
        return Err(Error::InvalidData(format!(
            "duplicate sentence index {}",
            w[0].idx
        )));
    }
    let stats = text::build_stats(&sentences)?;
    let mut postings: HashMap<Token, Vec<Posting>> = HashMap::new();
    for (pos, s) in sentences.iter().enumerate() {
        let mut tf: HashMap<&Token, u32> = HashMap::new();
        for t in &s.tokens {
            *tf.entry(t).or_insert(0) += 1;
        }
        for (t, c) in tf {
            postings.entry(t.clone()).or_default().push(Posting {
                pos: pos as u32,
                tf: c,
            });
        }
    }
    Ok(Index {
        tokenizer,
        postings,
        stats,
        sentences,
    })
}

impl Index {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentence(&self, idx: usize) -> Option<&Sentence> {
        self.sentences
            .binary_search_by_key(&idx, |s| s.idx)
            .ok()
            .map(|p| &self.sentences[p])
    }

    /// BM25 scores of every sentence with a positive score, keyed by
    /// position. Contributions are accumulated in the same term order as
    /// [`bm25_score`], so the values are bit-identical to direct scoring.
    pub fn score_all(&self, query: &Query, params: &Bm25Params) -> HashMap<u32, f64> {
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for (term, mult) in query.weighted_terms(params) {
            let Some(list) = self.postings.get(term.as_str()) else {
                continue;
            };
            let idf = self.stats.idf(term);
            for p in list {
                let len = self.sentences[p.pos as usize].len();
                let w = params.term_weight(idf, p.tf, len, self.stats.avg_len);
                *acc.entry(p.pos).or_insert(0.0) += w * mult as f64;
            }
        }
        acc
    }
}

/// Top `n` sentences by descending BM25, ties by ascending sentence index.
/// Sentences scoring zero are never returned.
pub fn retrieve_top_n<'a>(
    query: &Query,
    index: &'a Index,
    n: usize,
    params: &Bm25Params,
) -> Vec<Retrieved<'a>> {
    let mut hits: Vec<Retrieved<'a>> = index
        .score_all(query, params)
        .into_iter()
        .filter(|&(_, s)| s > 0.0)
        .map(|(pos, score)| Retrieved {
            sentence: &index.sentences[pos as usize],
            score,
        })
        .collect();
    sort_ranked(&mut hits);
    hits.truncate(n);
    hits
}

pub(crate) fn sort_ranked(hits: &mut [Retrieved<'_>]) {
    hits.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.sentence.idx.cmp(&b.sentence.idx))
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> TokenizerConfig {
        TokenizerConfig::default()
    }

    fn sents(texts: &[&str]) -> Vec<Sentence> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Sentence::new(i, *t, &cfg()))
            .collect()
    }

    /// Formula evaluated term by term with no shared helpers.
    fn oracle_bm25(
        query_terms: &[&str],
        doc: &[&str],
        corpus: &[Vec<&str>],
        k1: f64,
        b: f64,
    ) -> f64 {
        let n = corpus.len() as f64;
        let avg = corpus.iter().map(|d| d.len()).sum::<usize>() as f64 / n;
        let mut seen: Vec<&str> = Vec::new();
        let mut total = 0.0;
        for &t in query_terms {
            if seen.contains(&t) {
                continue;
            }
            seen.push(t);
            let df = corpus.iter().filter(|d| d.contains(&t)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let tf = doc.iter().filter(|&&w| w == t).count() as f64;
            total += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * doc.len() as f64 / avg));
        }
        total
    }

    #[test]
    fn form_query_examples() {
        let q = form_query("Which organ?", "liver", &cfg()).unwrap();
        assert_eq!(q.q_terms.len(), 2);
        assert!(q.q_terms.contains("which") && q.q_terms.contains("organ"));
        assert!(q.a_terms.contains("liver") && q.a_terms.len() == 1);
        assert_eq!(q.all_tokens.len(), 3);

        let q = form_query("Which organ?", "", &cfg()).unwrap();
        assert!(q.a_terms.is_empty());

        let q = form_query("the liver organ", "liver", &cfg()).unwrap();
        assert!(q.q_terms.contains("liver") && q.a_terms.contains("liver"));
        assert_eq!(q.weighted_terms(&Bm25Params::default()).count(), 3);

        assert!(matches!(
            form_query("  ", "x", &cfg()),
            Err(Error::EmptyQuestion)
        ));
    }

    #[test]
    fn bm25_no_overlap_is_zero() {
        let s = sents(&["a b", "c d"]);
        let stats = text::build_stats(&s).unwrap();
        let q = form_query("x y", "z", &cfg()).unwrap();
        assert_eq!(bm25_score(&q, &s[0], &stats, &Bm25Params::default()), 0.0);
    }

    #[test]
    fn bm25_unit_tf_at_average_length_is_idf() {
        // Both sentences have length 2, so len == avg_len and tf = 1 gives a
        // saturation factor of exactly (1 + k1) / (1 + k1) = 1.
        let s = sents(&["alpha beta", "gamma delta"]);
        let stats = text::build_stats(&s).unwrap();
        let q = form_query("alpha", "", &cfg()).unwrap();
        let got = bm25_score(&q, &s[0], &stats, &Bm25Params::default());
        let want = (1.0f64 + 1.5 / 1.5).ln();
        assert!(((got - want) / want).abs() <= 1e-9, "{got} vs {want}");
    }

    #[test]
    fn bm25_matches_oracle_on_small_corpus() {
        let texts = [
            "the liver and the pancreas",
            "colon colon esophagus",
            "digestive system consists of liver",
            "stomach",
            "small intestine and large intestine of the digestive system",
        ];
        let s = sents(&texts);
        let stats = text::build_stats(&s).unwrap();
        let q = form_query("liver esophagus digestive the colon", "system", &cfg()).unwrap();
        let corpus: Vec<Vec<&str>> = texts.iter().map(|t| t.split(' ').collect()).collect();
        let qt = ["liver", "esophagus", "digestive", "the", "colon", "system"];
        for (i, sent) in s.iter().enumerate() {
            let got = bm25_score(&q, sent, &stats, &Bm25Params::default());
            let want = oracle_bm25(&qt, &corpus[i], &corpus, 1.2, 0.75);
            assert!(
                (got - want).abs() <= 1e-9 * want.max(1.0),
                "sentence {i}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn repeated_query_terms_weighted_when_configured() {
        let s = sents(&["a b", "c d"]);
        let stats = text::build_stats(&s).unwrap();
        let q = form_query("a a", "a", &cfg()).unwrap();
        let uniq = bm25_score(&q, &s[0], &stats, &Bm25Params::default());
        let mult = bm25_score(
            &q,
            &s[0],
            &stats,
            &Bm25Params {
                unique_query_terms: false,
                ..Default::default()
            },
        );
        assert!((mult - 3.0 * uniq).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(Bm25Params::default().validate().is_ok());
        assert!(Bm25Params {
            k1: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(Bm25Params {
            b: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn index_postings_match_counts() {
        let idx = build_index(sents(&["a b a", "b c", "c c c"]), cfg()).unwrap();
        assert_eq!(idx.postings["a"], vec![Posting { pos: 0, tf: 2 }]);
        assert_eq!(
            idx.postings["c"],
            vec![Posting { pos: 1, tf: 1 }, Posting { pos: 2, tf: 3 }]
        );
        for (t, list) in &idx.postings {
            assert_eq!(idx.stats.df(t) as usize, list.len());
            assert!(list.windows(2).all(|w| w[0].pos < w[1].pos));
        }
        assert!(build_index(vec![], cfg()).is_err());
    }

    #[test]
    fn duplicate_texts_keep_their_own_index() {
        let idx = build_index(sents(&["same text", "same text"]), cfg()).unwrap();
        let q = form_query("same", "", &cfg()).unwrap();
        let top = retrieve_top_n(&q, &idx, 5, &Bm25Params::default());
        assert_eq!(top.len(), 2);
        assert_eq!(top[0].score, top[1].score);
        assert_eq!((top[0].sentence.idx, top[1].sentence.idx), (0, 1));
    }

    #[test]
    fn duplicate_idx_rejected() {
        let mut s = sents(&["a", "b"]);
        s[1].idx = 0;
        assert!(build_index(s, cfg()).is_err());
    }

    #[test]
    fn top_one_and_zero_scores_excluded() {
        let idx = build_index(sents(&["x y", "liver liver organ", "liver"]), cfg()).unwrap();
        let q = form_query("which organ", "liver", &cfg()).unwrap();
        let top = retrieve_top_n(&q, &idx, 1, &Bm25Params::default());
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].sentence.idx, 1);
        let all = retrieve_top_n(&q, &idx, 10, &Bm25Params::default());
        assert_eq!(all.len(), 2);
    }

    fn linear_top_n(q: &Query, idx: &Index, n: usize) -> Vec<(usize, f64)> {
        let p = Bm25Params::default();
        let mut all: Vec<(usize, f64)> = idx
            .sentences
            .iter()
            .map(|s| (s.idx, bm25_score(q, s, &idx.stats, &p)))
            .filter(|&(_, sc)| sc > 0.0)
            .collect();
        all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        all.truncate(n);
        all
    }

    #[test]
    fn large_corpus_top_n_equals_linear_scan() {
        use std::fmt::Write;
        // Deterministic pseudo-random corpus of 10k sentences.
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let mut sentences = Vec::new();
        for i in 0..10_000 {
            let mut t = String::new();
            for _ in 0..(3 + next() % 10) {
                write!(t, "w{} ", next() % 500).unwrap();
            }
            sentences.push(Sentence::new(i, t, &cfg()));
        }
        let idx = build_index(sentences, cfg()).unwrap();
        for qi in 0..5 {
            let q = form_query(
                &format!("w{} w{} w{}", qi, qi * 7 + 3, qi * 31 + 11),
                "w499",
                &cfg(),
            )
            .unwrap();
            let got: Vec<(usize, f64)> = retrieve_top_n(&q, &idx, 20, &Bm25Params::default())
                .iter()
                .map(|r| (r.sentence.idx, r.score))
                .collect();
            assert_eq!(got, linear_top_n(&q, &idx, 20));
        }
    }

    fn corpus_strategy() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec("[a-h]{1,2}( [a-h]{1,2}){0,8}", 1..40)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn index_scores_identical_to_linear_scan(docs in corpus_strategy(), q in "[a-h]{1,2}( [a-h]{1,2}){0,4}", n in 1usize..30) {
            let texts: Vec<&str> = docs.iter().map(String::as_str).collect();
            let idx = build_index(sents(&texts), cfg()).unwrap();
            let query = form_query(&q, "", &cfg()).unwrap();
            let got: Vec<(usize, f64)> = retrieve_top_n(&query, &idx, n, &Bm25Params::default())
                .iter().map(|r| (r.sentence.idx, r.score)).collect();
            prop_assert_eq!(got, linear_top_n(&query, &idx, n));
        }

        #[test]
        fn removing_query_term_never_increases_score(doc in "[a-e]( [a-e]){0,8}", q in "[a-e]( [a-e]){1,5}") {
            let s = sents(&[doc.as_str(), "a b c d e", "z"]);
            let stats = text::build_stats(&s).unwrap();
            let full = form_query(&q, "", &cfg()).unwrap();
            let shorter: Vec<&str> = q.split(' ').skip(1).collect();
            let sub = form_query(&format!("x {}", shorter.join(" ")), "", &cfg()).unwrap();
            let p = Bm25Params::default();
            let full_score = bm25_score(&full, &s[0], &stats, &p);
            prop_assert!(full_score >= 0.0);
            prop_assert!(bm25_score(&sub, &s[0], &stats, &p) <= full_score + 1e-12);
        }

        // A new sentence shifts N and the average length, so scores move; it
        // never enters the results, and without length normalization a
        // one-term query keeps its order.
        #[test]
        fn unrelated_sentence_never_ranks(docs in corpus_strategy(), extra in "[u-z]{1,2}( [u-z]{1,2}){0,8}", q in "[a-h]{1,2}( [a-h]{1,2}){0,4}", n in 1usize..30) {
            let mut texts: Vec<&str> = docs.iter().map(String::as_str).collect();
            let before = build_index(sents(&texts), cfg()).unwrap();
            texts.push(&extra);
            let after = build_index(sents(&texts), cfg()).unwrap();
            let added = texts.len() - 1;
            let query = form_query(&q, "", &cfg()).unwrap();
            let ids = |idx: &Index, p: &Bm25Params| -> Vec<usize> {
                retrieve_top_n(&query, idx, n, p).iter().map(|r| r.sentence.idx).collect()
            };
            prop_assert!(!ids(&after, &Bm25Params::default()).contains(&added));

            let single = form_query(q.split(' ').next().unwrap(), "", &cfg()).unwrap();
            let flat = Bm25Params { b: 0.0, ..Bm25Params::default() };
            let top = |idx: &Index| -> Vec<usize> {
                retrieve_top_n(&single, idx, n, &flat).iter().map(|r| r.sentence.idx).collect()
            };
            prop_assert_eq!(top(&before), top(&after));
        }
    }
}
