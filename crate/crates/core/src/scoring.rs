//! Relevance, overlap and coverage of a justification set, and the combined
//! score `S = R / (ε + O) · (ε + C(A)) · (ε + C(Q))`.
//!
//! Everything here scores a set from scratch. The selector has its own
//! incremental path and is tested against these functions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::retrieval::{bm25_score, Bm25Params, Query, Sentence};
use crate::text::{CorpusStats, TermSet};

/// Components removed from the combined score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    /// Coverage counts each covered term with weight 1 instead of its IDF.
    pub no_idf: bool,
    pub no_c_answer: bool,
    pub no_c_question: bool,
    pub no_overlap: bool,
    /// Score is the mean BM25 alone; overrides every other flag.
    pub r_only: bool,
}

impl Ablation {
    pub const NAMES: [&'static str; 5] = [
        "no_idf",
        "no_c_answer",
        "no_c_question",
        "no_overlap",
        "r_only",
    ];

    pub fn full() -> Self {
        Self::default()
    }

    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut a = Self::default();
        for name in names {
            match name.trim() {
                "" | "none" | "full" => {}
                "no_idf" => a.no_idf = true,
                "no_c_answer" => a.no_c_answer = true,
                "no_c_question" => a.no_c_question = true,
                "no_overlap" => a.no_overlap = true,
                "r_only" => a.r_only = true,
                other => {
                    return Err(Error::Config(format!(
                        "unknown ablation {other:?} (expected one of {})",
                        Self::NAMES.join(", ")
                    )))
                }
            }
        }
        Ok(a)
    }

    /// Stable label, e.g. `full` or `no_idf+no_overlap`.
    pub fn label(&self) -> String {
        let on = [
            self.no_idf,
            self.no_c_answer,
            self.no_c_question,
            self.no_overlap,
            self.r_only,
        ];
        let names: Vec<&str> = Self::NAMES
            .iter()
            .zip(on)
            .filter(|(_, f)| *f)
            .map(|(n, _)| *n)
            .collect();
        if names.is_empty() {
            "full".into()
        } else {
            names.join("+")
        }
    }
}

/// How the pairwise overlap sum is normalized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapPairs {
    /// Sum over ordered pairs divided by C(|S|, 2); range [0, 2].
    #[default]
    Ordered,
    /// Half of the ordered-pair value; range [0, 1].
    Unordered,
}

#[derive(Debug, Clone, Default)]
pub enum Matcher {
    #[default]
    Exact,
    /// Terms also match when both have vectors with cosine above `threshold`.
    Alignment {
        threshold: f64,
        table: Arc<EmbeddingTable>,
    },
}

impl Matcher {
    pub fn alignment(table: Arc<EmbeddingTable>, threshold: f64) -> Self {
        Matcher::Alignment { threshold, table }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Matcher::Exact)
    }

    pub fn matches(&self, a: &str, b: &str) -> bool {
        if a == b {
            return true;
        }
        match self {
            Matcher::Exact => false,
            Matcher::Alignment { threshold, table } => {
                table.cosine(a, b).is_some_and(|c| c > *threshold)
            }
        }
    }

    /// Number of terms of `a` matched by at least one term of `b`. For the
    /// exact matcher this is `|a ∩ b|`.
    pub fn soft_intersection(&self, a: &TermSet, b: &TermSet) -> usize {
        match self {
            Matcher::Exact => a.intersection_len(b),
            Matcher::Alignment { .. } => a
                .iter()
                .filter(|x| b.contains(x) || b.iter().any(|y| self.matches(x, y)))
                .count(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RoccConfig {
    pub epsilon: f64,
    pub ablation: Ablation,
    pub matcher: Matcher,
    pub overlap_pairs: OverlapPairs,
}

impl Default for RoccConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            ablation: Ablation::default(),
            matcher: Matcher::Exact,
            overlap_pairs: OverlapPairs::Ordered,
        }
    }
}

impl RoccConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if let Matcher::Alignment { threshold, .. } = &self.matcher {
            if !threshold.is_finite() {
                return Err(Error::Config("alignment threshold must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn with_ablation(&self, ablation: Ablation) -> Self {
        Self {
            ablation,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub r: f64,
    pub o: f64,
    pub c_q: f64,
    pub c_a: f64,
    pub s: f64,
}

/// Combines the components under the active ablation mask. Removed factors
/// are dropped from the product, not zeroed.
#[inline]
pub fn combine(r: f64, o: f64, c_a: f64, c_q: f64, epsilon: f64, ablation: &Ablation) -> f64 {
    if ablation.r_only {
        return r;
    }
    let mut s = r;
    if !ablation.no_overlap {
        s /= epsilon + o;
    }
    if !ablation.no_c_answer {
        s *= epsilon + c_a;
    }
    if !ablation.no_c_question {
        s *= epsilon + c_q;
    }
    s
}

/// Mean BM25 of the set members.
pub fn relevance(
    set: &[&Sentence],
    query: &Query,
    stats: &CorpusStats,
    params: &Bm25Params,
) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let sum: f64 = set
        .iter()
        .map(|s| bm25_score(query, s, stats, params))
        .sum();
    Ok(sum / set.len() as f64)
}

/// Pairwise overlap term of one ordered pair.
pub fn pair_overlap(a: &TermSet, b: &TermSet, matcher: &Matcher) -> f64 {
    let denom = a.len().max(b.len());
    if denom == 0 {
        return 0.0;
    }
    matcher.soft_intersection(a, b) as f64 / denom as f64
}

/// Normalized pairwise overlap; 0 for sets with fewer than two members.
pub fn overlap(set: &[&Sentence], cfg: &RoccConfig) -> f64 {
    let k = set.len();
    if k < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (i, a) in set.iter().enumerate() {
        for (j, b) in set.iter().enumerate() {
            if i != j {
                sum += pair_overlap(&a.terms, &b.terms, &cfg.matcher);
            }
        }
    }
    let pairs = (k * (k - 1) / 2) as f64;
    match cfg.overlap_pairs {
        OverlapPairs::Ordered => sum / pairs,
        OverlapPairs::Unordered => sum / pairs / 2.0,
    }
}

/// IDF-weighted fraction of `x_terms` matched by any sentence of the set.
pub fn coverage(
    x_terms: &TermSet,
    set: &[&Sentence],
    stats: &CorpusStats,
    cfg: &RoccConfig,
) -> f64 {
    if cfg.ablation.no_idf {
        coverage_weighted(x_terms, set, &cfg.matcher, |_| 1.0)
    } else {
        coverage_weighted(x_terms, set, &cfg.matcher, |t| stats.idf(t))
    }
}

/// Sum of `weight(x)` over covered terms of `x_terms`, in ascending term
/// order, divided by `|x_terms|`. Returns 0 for an empty `x_terms`.
pub fn coverage_weighted(
    x_terms: &TermSet,
    set: &[&Sentence],
    matcher: &Matcher,
    weight: impl Fn(&str) -> f64,
) -> f64 {
    if x_terms.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for x in x_terms.iter() {
        let covered = set.iter().any(|s| {
            s.terms.contains(x)
                || (!matcher.is_exact() && s.terms.iter().any(|t| matcher.matches(x, t)))
        });
        if covered {
            total += weight(x);
        }
    }
    total / x_terms.len() as f64
}

pub fn rocc_score(
    set: &[&Sentence],
    query: &Query,
    stats: &CorpusStats,
    params: &Bm25Params,
    cfg: &RoccConfig,
) -> Result<ScoreBreakdown> {
    let r = relevance(set, query, stats, params)?;
    let o = overlap(set, cfg);
    let c_q = coverage(&query.q_terms, set, stats, cfg);
    let c_a = coverage(&query.a_terms, set, stats, cfg);
    let s = combine(r, o, c_a, c_q, cfg.epsilon, &cfg.ablation);
    Ok(ScoreBreakdown { r, o, c_q, c_a, s })
}
