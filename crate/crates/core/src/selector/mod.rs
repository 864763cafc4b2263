//! Candidate set enumeration and selection.
//!
//! Sets are ranked by combined score. Scores within a relative
//! [`TIE_TOLERANCE`] are tied; ties go to the smaller set, then to the
//! lexicographically smaller vector of sentence indices.

mod combinations;
mod engine;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::{Bm25Params, Query, Sentence};
use crate::scoring::{RoccConfig, ScoreBreakdown};
use crate::text::CorpusStats;

pub use combinations::{binomial, count_sets, enumerate_sets, Combinations};
pub use engine::{ranks_ahead, Prepared, Scored, TIE_TOLERANCE};

use engine::Tracker;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SelectionMode {
    /// Fixed set size.
    Parametric { k: usize },
    /// Global best across every size in `k_values`.
    Auto { k_values: Vec<usize> },
}

impl SelectionMode {
    pub fn sizes(&self) -> Vec<usize> {
        match self {
            SelectionMode::Parametric { k } => vec![*k],
            SelectionMode::Auto { k_values } => {
                let mut v = k_values.clone();
                v.sort_unstable();
                v.dedup();
                v
            }
        }
    }
}

/// Output order of the chosen sentences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalOrder {
    /// Ascending original index (passage mode).
    #[default]
    ByIndex,
    /// Descending individual BM25, ties by ascending index (KB mode).
    ByScore,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Engine {
    /// Depth-first enumeration with running sums and bitmask unions.
    #[default]
    Incremental,
    /// Every set enumerated and scored independently.
    Naive,
    /// Approximate beam search keeping `width` sets per size.
    Beam { width: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    /// Number of retrieved candidates in KB mode.
    pub n: usize,
    pub mode: SelectionMode,
    /// Output order; `None` uses the mode's default (by index for passages,
    /// by score for knowledge-base retrieval).
    pub final_order: Option<FinalOrder>,
    pub engine: Engine,
    /// Number of runner-up sets reported besides the winner.
    pub top_m: usize,
    /// Permit k = 1.
    pub allow_singletons: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            n: 20,
            mode: SelectionMode::Auto {
                k_values: (2..=6).collect(),
            },
            final_order: None,
            engine: Engine::Incremental,
            top_m: 0,
            allow_singletons: false,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        let sizes = self.mode.sizes();
        if sizes.is_empty() {
            return Err(Error::Config("no set sizes given".into()));
        }
        let min_k = if self.allow_singletons { 1 } else { 2 };
        for k in sizes {
            if k < min_k || k > self.n {
                return Err(Error::Config(format!(
                    "set size {k} outside [{min_k}, n = {}]",
                    self.n
                )));
            }
        }
        if let Engine::Beam { width: 0 } = self.engine {
            return Err(Error::Config("beam width must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JustificationSet {
    /// Strictly increasing sentence indices.
    pub member_idxs: Vec<usize>,
    pub k: usize,
    pub breakdown: ScoreBreakdown,
    /// Individual BM25 of each member, aligned with `member_idxs`.
    pub member_bm25: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub best: JustificationSet,
    pub runners_up: Vec<JustificationSet>,
    pub sets_scored: u64,
}

/// Runs selection over `candidates` with the given search settings.
#[derive(Debug, Clone, Copy)]
pub struct Selector<'a> {
    pub bm25: &'a Bm25Params,
    pub rocc: &'a RoccConfig,
    pub engine: Engine,
    pub top_m: usize,
    pub allow_singletons: bool,
}

impl<'a> Selector<'a> {
    pub fn new(bm25: &'a Bm25Params, rocc: &'a RoccConfig) -> Self {
        Self {
            bm25,
            rocc,
            engine: Engine::Incremental,
            top_m: 0,
            allow_singletons: false,
        }
    }

    pub fn from_config(bm25: &'a Bm25Params, rocc: &'a RoccConfig, cfg: &SelectionConfig) -> Self {
        Self {
            bm25,
            rocc,
            engine: cfg.engine,
            top_m: cfg.top_m,
            allow_singletons: cfg.allow_singletons,
        }
    }

    pub fn parametric(
        &self,
        query: &Query,
        candidates: &[&Sentence],
        stats: &CorpusStats,
        k: usize,
    ) -> Result<Selection> {
        self.select(query, candidates, stats, &[k])
    }

    pub fn auto(
        &self,
        query: &Query,
        candidates: &[&Sentence],
        stats: &CorpusStats,
        k_values: &[usize],
    ) -> Result<Selection> {
        let mut sizes = k_values.to_vec();
        sizes.sort_unstable();
        sizes.dedup();
        self.select(query, candidates, stats, &sizes)
    }

    pub fn run(
        &self,
        query: &Query,
        candidates: &[&Sentence],
        stats: &CorpusStats,
        mode: &SelectionMode,
    ) -> Result<Selection> {
        self.select(query, candidates, stats, &mode.sizes())
    }

    fn select(
        &self,
        query: &Query,
        candidates: &[&Sentence],
        stats: &CorpusStats,
        sizes: &[usize],
    ) -> Result<Selection> {
        self.rocc.validate()?;
        let n = candidates.len();
        if sizes.is_empty() {
            return Err(Error::Config("no set sizes given".into()));
        }
        let min_k = if self.allow_singletons { 1 } else { 2 };
        for &k in sizes {
            if k < min_k || k > n {
                return Err(Error::InfeasibleK { k, n });
            }
        }
        let mut sorted: Vec<&Sentence> = candidates.to_vec();
        sorted.sort_by_key(|s| s.idx);
        if let Some(w) = sorted.windows(2).find(|w| w[0].idx == w[1].idx) {
            return Err(Error::InvalidData(format!(
                "duplicate candidate index {}",
                w[0].idx
            )));
        }

        let mut tracker = Tracker::new(self.top_m);
        let prep = Prepared::new(query, &sorted, stats, self.bm25, self.rocc);
        match self.engine {
            Engine::Incremental => engine::search_incremental(&prep, sizes, &mut tracker),
            Engine::Naive => engine::search_naive(&prep, sizes, &mut tracker)?,
            Engine::Beam { width } => engine::search_beam(&prep, sizes, width, &mut tracker),
        }
        let (best, runners, scored) = tracker.finish();
        let to_set = |s: Scored| JustificationSet {
            member_idxs: s.members.iter().map(|&p| sorted[p].idx).collect(),
            k: s.members.len(),
            member_bm25: s.members.iter().map(|&p| prep.bm25[p]).collect(),
            breakdown: s.breakdown,
        };
        let best = best.ok_or(Error::EmptySet)?;
        Ok(Selection {
            best: to_set(best),
            runners_up: runners.into_iter().map(to_set).collect(),
            sets_scored: scored,
        })
    }
}

/// Best set of exactly `k` candidates.
pub fn select_parametric(
    query: &Query,
    candidates: &[&Sentence],
    stats: &CorpusStats,
    k: usize,
    bm25: &Bm25Params,
    rocc: &RoccConfig,
) -> Result<JustificationSet> {
    Ok(Selector::new(bm25, rocc)
        .parametric(query, candidates, stats, k)?
        .best)
}

/// Best set across all sizes in `k_values`.
pub fn select_auto(
    query: &Query,
    candidates: &[&Sentence],
    stats: &CorpusStats,
    k_values: &[usize],
    bm25: &Bm25Params,
    rocc: &RoccConfig,
) -> Result<JustificationSet> {
    Ok(Selector::new(bm25, rocc)
        .auto(query, candidates, stats, k_values)?
        .best)
}

/// Chosen sentences in output order.
pub fn finalize<'a>(
    set: &JustificationSet,
    candidates: &[&'a Sentence],
    order: FinalOrder,
) -> Result<Vec<&'a Sentence>> {
    let mut picked: Vec<(&'a Sentence, f64)> = Vec::with_capacity(set.k);
    for (pos, &idx) in set.member_idxs.iter().enumerate() {
        let s = candidates
            .iter()
            .find(|s| s.idx == idx)
            .ok_or_else(|| Error::InvalidData(format!("set member {idx} is not a candidate")))?;
        picked.push((s, set.member_bm25.get(pos).copied().unwrap_or(0.0)));
    }
    match order {
        FinalOrder::ByIndex => picked.sort_by_key(|(s, _)| s.idx),
        FinalOrder::ByScore => {
            picked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.idx.cmp(&b.0.idx)))
        }
    }
    Ok(picked.into_iter().map(|(s, _)| s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::form_query;
    use crate::scoring::rocc_score;
    use crate::text::{build_stats, TokenizerConfig};

    fn setup(texts: &[&str]) -> (Vec<Sentence>, CorpusStats) {
        let tok = TokenizerConfig::default();
        let s: Vec<Sentence> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Sentence::new(i, *t, &tok))
            .collect();
        let stats = build_stats(&s).unwrap();
        (s, stats)
    }

    fn brute_force(
        q: &Query,
        cands: &[&Sentence],
        stats: &CorpusStats,
        sizes: &[usize],
    ) -> Vec<usize> {
        let p = Bm25Params::default();
        let cfg = RoccConfig::default();
        let mut best: Option<Scored> = None;
        for &k in sizes {
            for combo in enumerate_sets(cands.len(), k).unwrap() {
                let set: Vec<&Sentence> = combo.iter().map(|&i| cands[i]).collect();
                let b = rocc_score(&set, q, stats, &p, &cfg).unwrap();
                if best
                    .as_ref()
                    .is_none_or(|cur| ranks_ahead(b.s, &combo, cur))
                {
                    best = Some(Scored {
                        members: combo,
                        breakdown: b,
                    });
                }
            }
        }
        best.unwrap().members
    }

    const TEXTS: [&str; 8] = [
        "the liver makes bile for digestion",
        "the pancreas releases enzymes",
        "bile helps digestion of fats in the small intestine",
        "the colon absorbs water",
        "the esophagus moves food to the stomach",
        "digestion happens in the digestive system",
        "the liver and pancreas are digestive organs",
        "weather is sunny today",
    ];

    #[test]
    fn parametric_matches_brute_force() {
        let (s, stats) = setup(&TEXTS);
        let refs: Vec<&Sentence> = s.iter().collect();
        let q = form_query(
            "which organs help digestion of fats",
            "liver and small intestine",
            &TokenizerConfig::default(),
        )
        .unwrap();
        let p = Bm25Params::default();
        let cfg = RoccConfig::default();
        let got = select_parametric(&q, &refs, &stats, 3, &p, &cfg).unwrap();
        assert_eq!(got.member_idxs, brute_force(&q, &refs, &stats, &[3]));
        assert_eq!(got.k, 3);
        let auto = select_auto(&q, &refs, &stats, &[2, 3, 4], &p, &cfg).unwrap();
        assert_eq!(auto.member_idxs, brute_force(&q, &refs, &stats, &[2, 3, 4]));
        let single = select_auto(&q, &refs, &stats, &[3], &p, &cfg).unwrap();
        assert_eq!(single, got);
    }

    #[test]
    fn engines_agree() {
        let (s, stats) = setup(&TEXTS);
        let refs: Vec<&Sentence> = s.iter().collect();
        let q = form_query(
            "what does the liver do",
            "makes bile",
            &TokenizerConfig::default(),
        )
        .unwrap();
        let p = Bm25Params::default();
        let cfg = RoccConfig::default();
        let mut sel = Selector::new(&p, &cfg);
        sel.top_m = 3;
        let inc = sel.auto(&q, &refs, &stats, &[2, 3, 4, 5]).unwrap();
        sel.engine = Engine::Naive;
        let naive = sel.auto(&q, &refs, &stats, &[2, 3, 4, 5]).unwrap();
        assert_eq!(inc.best.member_idxs, naive.best.member_idxs);
        assert_eq!(inc.sets_scored, count_sets(8, &[2, 3, 4, 5]));
        assert_eq!(inc.runners_up.len(), 3);
        let a: Vec<_> = inc.runners_up.iter().map(|r| &r.member_idxs).collect();
        let b: Vec<_> = naive.runners_up.iter().map(|r| &r.member_idxs).collect();
        assert_eq!(a, b);
        assert!(inc
            .runners_up
            .windows(2)
            .all(|w| w[0].breakdown.s >= w[1].breakdown.s));
        assert!(inc.runners_up[0].breakdown.s <= inc.best.breakdown.s * (1.0 + 1e-12));
        // Beam with a wide beam covers everything.
        sel.engine = Engine::Beam { width: 10_000 };
        let beam = sel.auto(&q, &refs, &stats, &[2, 3, 4, 5]).unwrap();
        assert_eq!(beam.best.member_idxs, inc.best.member_idxs);
    }

    #[test]
    fn full_set_when_k_equals_n() {
        let (s, stats) = setup(&TEXTS[..4]);
        let refs: Vec<&Sentence> = s.iter().collect();
        let q = form_query("liver", "bile", &TokenizerConfig::default()).unwrap();
        let got = select_parametric(
            &q,
            &refs,
            &stats,
            4,
            &Bm25Params::default(),
            &RoccConfig::default(),
        )
        .unwrap();
        assert_eq!(got.member_idxs, vec![0, 1, 2, 3]);
    }

    #[test]
    fn identical_scores_prefer_smaller_indices() {
        // Three identical sentences: every pair scores the same.
        let (s, stats) = setup(&["liver bile", "liver bile", "liver bile"]);
        let refs: Vec<&Sentence> = s.iter().collect();
        let q = form_query("liver", "bile", &TokenizerConfig::default()).unwrap();
        let got = select_parametric(
            &q,
            &refs,
            &stats,
            2,
            &Bm25Params::default(),
            &RoccConfig::default(),
        )
        .unwrap();
        assert_eq!(got.member_idxs, vec![0, 1]);
    }

    #[test]
    fn infeasible_sizes_rejected() {
        let (s, stats) = setup(&TEXTS[..3]);
        let refs: Vec<&Sentence> = s.iter().collect();
        let q = form_query("liver", "bile", &TokenizerConfig::default()).unwrap();
        let p = Bm25Params::default();
        let cfg = RoccConfig::default();
        assert!(matches!(
            select_parametric(&q, &refs, &stats, 4, &p, &cfg),
            Err(Error::InfeasibleK { k: 4, n: 3 })
        ));
        assert!(select_parametric(&q, &refs, &stats, 1, &p, &cfg).is_err());
        let mut sel = Selector::new(&p, &cfg);
        sel.allow_singletons = true;
        assert_eq!(sel.parametric(&q, &refs, &stats, 1).unwrap().best.k, 1);
    }

    #[test]
    fn candidate_order_does_not_matter() {
        let (s, stats) = setup(&TEXTS);
        let mut refs: Vec<&Sentence> = s.iter().collect();
        let q = form_query(
            "which organs help digestion",
            "liver",
            &TokenizerConfig::default(),
        )
        .unwrap();
        let p = Bm25Params::default();
        let cfg = RoccConfig::default();
        let a = select_auto(&q, &refs, &stats, &[2, 3], &p, &cfg).unwrap();
        refs.reverse();
        let b = select_auto(&q, &refs, &stats, &[2, 3], &p, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn finalize_orders() {
        let (s, _) = setup(&TEXTS);
        let refs: Vec<&Sentence> = s.iter().collect();
        let set = JustificationSet {
            member_idxs: vec![2, 7],
            k: 2,
            breakdown: ScoreBreakdown {
                r: 0.0,
                o: 0.0,
                c_q: 0.0,
                c_a: 0.0,
                s: 0.0,
            },
            member_bm25: vec![1.0, 3.0],
        };
        let by_idx: Vec<usize> = finalize(&set, &refs, FinalOrder::ByIndex)
            .unwrap()
            .iter()
            .map(|s| s.idx)
            .collect();
        assert_eq!(by_idx, vec![2, 7]);
        let by_score: Vec<usize> = finalize(&set, &refs, FinalOrder::ByScore)
            .unwrap()
            .iter()
            .map(|s| s.idx)
            .collect();
        assert_eq!(by_score, vec![7, 2]);
        let single = JustificationSet {
            member_idxs: vec![4],
            k: 1,
            member_bm25: vec![0.5],
            ..set.clone()
        };
        assert_eq!(
            finalize(&single, &refs, FinalOrder::ByIndex).unwrap()[0].idx,
            4
        );
        let bad = JustificationSet {
            member_idxs: vec![99],
            k: 1,
            member_bm25: vec![0.0],
            ..set
        };
        assert!(finalize(&bad, &refs, FinalOrder::ByIndex).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SelectionConfig::default().validate().is_ok());
        let bad = SelectionConfig {
            mode: SelectionMode::Parametric { k: 1 },
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let big = SelectionConfig {
            mode: SelectionMode::Parametric { k: 21 },
            ..Default::default()
        };
        assert!(big.validate().is_err());
    }
}
