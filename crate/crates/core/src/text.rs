//! Tokenization, term sets and collection statistics.
//!
//! Pipeline: (optional) Unicode lowercase → split on every non-alphanumeric
//! character → drop tokens shorter than `min_token_len` → drop stopwords.
//! No stemming is applied.

use std::borrow::Borrow;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::Sentence;

/// A single normalized term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(String);

impl Token {
    /// Wraps an already-normalized term. The caller guarantees the string is
    /// non-empty and purely alphanumeric.
    pub(crate) fn from_normalized(s: String) -> Self {
        Token(s)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl Deref for Token {
    type Target = str;

    fn deref(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Token {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Set of unique terms of a text, kept in sorted order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TermSet(BTreeSet<Token>);

impl TermSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.0.contains(term)
    }

    pub fn insert(&mut self, token: Token) -> bool {
        self.0.insert(token)
    }

    /// Terms in ascending lexical order.
    pub fn iter(&self) -> impl Iterator<Item = &Token> + Clone {
        self.0.iter()
    }

    /// `|self ∩ other|` by a merge over both sorted sequences.
    pub fn intersection_len(&self, other: &TermSet) -> usize {
        let (mut a, mut b) = (self.0.iter(), other.0.iter());
        let (mut x, mut y) = (a.next(), b.next());
        let mut count = 0;
        while let (Some(p), Some(q)) = (x, y) {
            match p.cmp(q) {
                std::cmp::Ordering::Less => x = a.next(),
                std::cmp::Ordering::Greater => y = b.next(),
                std::cmp::Ordering::Equal => {
                    count += 1;
                    x = a.next();
                    y = b.next();
                }
            }
        }
        count
    }
}

impl FromIterator<Token> for TermSet {
    fn from_iter<I: IntoIterator<Item = Token>>(iter: I) -> Self {
        TermSet(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a TermSet {
    type Item = &'a Token;
    type IntoIter = std::collections::btree_set::Iter<'a, Token>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub stopwords: BTreeSet<String>,
    pub min_token_len: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            stopwords: BTreeSet::new(),
            min_token_len: 1,
        }
    }
}

impl TokenizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_token_len == 0 {
            return Err(Error::Config("min_token_len must be at least 1".into()));
        }
        Ok(())
    }

    /// Replaces the stopword list. Entries are normalized with the same case
    /// folding as tokens so that lookups compare like with like.
    pub fn with_stopwords<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.stopwords = words
            .into_iter()
            .map(|w| {
                if self.lowercase {
                    w.as_ref().to_lowercase()
                } else {
                    w.as_ref().to_string()
                }
            })
            .collect();
        self
    }
}

/// Parses a stopword list: one term per line, surrounding whitespace ignored,
/// blank lines skipped.
pub fn parse_stopwords(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn tokenize(text: &str, cfg: &TokenizerConfig) -> Vec<Token> {
    let mut out = Vec::new();
    for piece in text.split(|c: char| !c.is_alphanumeric()) {
        if piece.is_empty() {
            continue;
        }
        let surface = if cfg.lowercase {
            piece.to_lowercase()
        } else {
            piece.to_string()
        };
        // Lowercasing can in rare cases emit non-alphanumeric marks
        // (e.g. combining dots), so split once more to keep tokens clean.
        for part in surface.split(|c: char| !c.is_alphanumeric()) {
            if part.is_empty() || part.chars().count() < cfg.min_token_len {
                continue;
            }
            if cfg.stopwords.contains(part) {
                continue;
            }
            out.push(Token(part.to_string()));
        }
    }
    out
}

pub fn term_set(tokens: &[Token]) -> TermSet {
    tokens.iter().cloned().collect()
}

/// Document statistics of a sentence collection, one sentence per document.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub n_docs: usize,
    pub doc_freq: HashMap<Token, u32>,
    pub avg_len: f64,
}

impl CorpusStats {
    pub fn df(&self, term: &str) -> u32 {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    pub fn idf(&self, term: &str) -> f64 {
        idf_from_counts(self.n_docs, self.df(term))
    }
}

/// BM25 inverse document frequency, `ln(1 + (N - df + 0.5) / (df + 0.5))`.
pub fn idf_from_counts(n_docs: usize, df: u32) -> f64 {
    let n = n_docs as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

pub fn idf(term: &str, stats: &CorpusStats) -> f64 {
    stats.idf(term)
}

/// Builds statistics over `sentences`.
///
/// Fails when the collection is empty or contains no tokens at all, since
/// the mean sentence length would then be zero.
pub fn build_stats(sentences: &[Sentence]) -> Result<CorpusStats> {
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut doc_freq: HashMap<Token, u32> = HashMap::new();
    let mut total_len = 0usize;
    for s in sentences {
        total_len += s.len();
        for t in s.terms.iter() {
            *doc_freq.entry(t.clone()).or_insert(0) += 1;
        }
    }
    if total_len == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(CorpusStats {
        n_docs: sentences.len(),
        doc_freq,
        avg_len: total_len as f64 / sentences.len() as f64,
    })
}
