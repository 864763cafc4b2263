//! Exhaustive set scoring.
//!
//! [`Prepared`] caches everything that depends on single sentences or
//! sentence pairs: per-sentence BM25, the symmetric pairwise overlap matrix
//! and, for question and answer separately, a bitmask of the terms each
//! sentence covers. A depth-first walk over combinations then keeps running
//! BM25 and overlap sums plus one coverage union per depth, so extending a
//! set by one sentence costs O(k) rather than rescoring it.

use crate::error::Result;
use crate::retrieval::{bm25_score, Bm25Params, Query, Sentence};
use crate::scoring::{combine, pair_overlap, OverlapPairs, RoccConfig, ScoreBreakdown};
use crate::text::{CorpusStats, TermSet};

use super::combinations::enumerate_sets;

/// Relative score difference below which two sets count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Coverage bitmasks over the terms of one text (question or answer).
#[derive(Debug, Clone)]
pub(crate) struct CoverTable {
    words: usize,
    /// `n × words`, row per sentence.
    masks: Vec<u64>,
    /// Weight per term position, ascending term order.
    weights: Vec<f64>,
    n_terms: usize,
}

impl CoverTable {
    fn build(
        x_terms: &TermSet,
        candidates: &[&Sentence],
        stats: &CorpusStats,
        cfg: &RoccConfig,
    ) -> Self {
        let n_terms = x_terms.len();
        let words = n_terms.div_ceil(64).max(1);
        let mut masks = vec![0u64; candidates.len() * words];
        let weights = x_terms
            .iter()
            .map(|t| {
                if cfg.ablation.no_idf {
                    1.0
                } else {
                    stats.idf(t)
                }
            })
            .collect();
        for (i, s) in candidates.iter().enumerate() {
            for (bit, x) in x_terms.iter().enumerate() {
                let covered = s.terms.contains(x)
                    || (!cfg.matcher.is_exact()
                        && s.terms.iter().any(|t| cfg.matcher.matches(x, t)));
                if covered {
                    masks[i * words + bit / 64] |= 1 << (bit % 64);
                }
            }
        }
        Self {
            words,
            masks,
            weights,
            n_terms,
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[u64] {
        &self.masks[i * self.words..(i + 1) * self.words]
    }

    /// Weighted coverage of a union mask, summed in ascending term order.
    #[inline]
    fn value(&self, union: &[u64]) -> f64 {
        if self.n_terms == 0 {
            return 0.0;
        }
        let mut total = 0.0;
        for (w, &word) in union.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                total += self.weights[w * 64 + b];
                bits &= bits - 1;
            }
        }
        total / self.n_terms as f64
    }
}

/// Per-question cache for scoring sets of `candidates`.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub(crate) n: usize,
    pub(crate) bm25: Vec<f64>,
    /// `ov(i, j) + ov(j, i)`, row-major `n × n`.
    pair: Vec<f64>,
    q: CoverTable,
    a: CoverTable,
    epsilon: f64,
    cfg: RoccConfig,
}

impl Prepared {
    pub fn new(
        query: &Query,
        candidates: &[&Sentence],
        stats: &CorpusStats,
        params: &Bm25Params,
        cfg: &RoccConfig,
    ) -> Self {
        let n = candidates.len();
        let bm25 = candidates
            .iter()
            .map(|s| bm25_score(query, s, stats, params))
            .collect();
        let mut pair = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = pair_overlap(&candidates[i].terms, &candidates[j].terms, &cfg.matcher)
                    + pair_overlap(&candidates[j].terms, &candidates[i].terms, &cfg.matcher);
                pair[i * n + j] = v;
                pair[j * n + i] = v;
            }
        }
        Self {
            n,
            bm25,
            pair,
            q: CoverTable::build(&query.q_terms, candidates, stats, cfg),
            a: CoverTable::build(&query.a_terms, candidates, stats, cfg),
            epsilon: cfg.epsilon,
            cfg: cfg.clone(),
        }
    }

    #[inline]
    fn overlap_value(&self, sum: f64, k: usize) -> f64 {
        if k < 2 {
            return 0.0;
        }
        let pairs = (k * (k - 1) / 2) as f64;
        match self.cfg.overlap_pairs {
            OverlapPairs::Ordered => sum / pairs,
            OverlapPairs::Unordered => sum / pairs / 2.0,
        }
    }

    /// Scores one set (candidate positions) without incremental state.
    pub fn score_members(&self, members: &[usize]) -> ScoreBreakdown {
        let k = members.len();
        let mut bm = 0.0;
        let mut ov = 0.0;
        let mut uq = vec![0u64; self.q.words];
        let mut ua = vec![0u64; self.a.words];
        for (pos, &m) in members.iter().enumerate() {
            bm += self.bm25[m];
            for &p in &members[..pos] {
                ov += self.pair[p * self.n + m];
            }
            for (u, r) in uq.iter_mut().zip(self.q.row(m)) {
                *u |= r;
            }
            for (u, r) in ua.iter_mut().zip(self.a.row(m)) {
                *u |= r;
            }
        }
        self.breakdown(bm, ov, k, &uq, &ua)
    }

    #[inline]
    fn breakdown(
        &self,
        bm25_sum: f64,
        ov_sum: f64,
        k: usize,
        uq: &[u64],
        ua: &[u64],
    ) -> ScoreBreakdown {
        let r = bm25_sum / k as f64;
        let o = self.overlap_value(ov_sum, k);
        let c_q = self.q.value(uq);
        let c_a = self.a.value(ua);
        let s = combine(r, o, c_a, c_q, self.epsilon, &self.cfg.ablation);
        ScoreBreakdown { r, o, c_q, c_a, s }
    }
}

/// A scored set of candidate positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub members: Vec<usize>,
    pub breakdown: ScoreBreakdown,
}

/// `true` when (`score`, `members`) ranks strictly ahead of `other`: a higher
/// score beyond the tie tolerance, or a tie resolved by smaller size and then
/// lexicographically smaller members.
pub fn ranks_ahead(score: f64, members: &[usize], other: &Scored) -> bool {
    let best = other.breakdown.s;
    let tol = TIE_TOLERANCE * score.abs().max(best.abs());
    if score > best + tol {
        return true;
    }
    if score < best - tol {
        return false;
    }
    (members.len(), members) < (other.members.len(), other.members.as_slice())
}

/// Keeps the winner and, optionally, the best `top_m` other sets.
#[derive(Debug)]
pub(crate) struct Tracker {
    pub best: Option<Scored>,
    pub runners: Vec<Scored>,
    top_m: usize,
    pub scored: u64,
}

fn exact_order(a: &Scored, b: &Scored) -> std::cmp::Ordering {
    b.breakdown
        .s
        .total_cmp(&a.breakdown.s)
        .then(a.members.len().cmp(&b.members.len()))
        .then(a.members.cmp(&b.members))
}

impl Tracker {
    pub fn new(top_m: usize) -> Self {
        Self {
            best: None,
            runners: Vec::new(),
            top_m,
            scored: 0,
        }
    }

    #[inline]
    pub fn offer(&mut self, members: &[usize], breakdown: ScoreBreakdown) {
        self.scored += 1;
        let s = breakdown.s;
        let is_best = match &self.best {
            None => true,
            Some(b) => ranks_ahead(s, members, b),
        };
        let keep_runner = self.top_m > 0
            && (self.runners.len() <= self.top_m
                || self
                    .runners
                    .last()
                    .is_some_and(|last| s >= last.breakdown.s));
        if !is_best && !keep_runner {
            return;
        }
        let entry = Scored {
            members: members.to_vec(),
            breakdown,
        };
        if keep_runner {
            let pos = self
                .runners
                .binary_search_by(|probe| exact_order(probe, &entry))
                .unwrap_or_else(|p| p);
            self.runners.insert(pos, entry.clone());
            self.runners.truncate(self.top_m + 1);
        }
        if is_best {
            self.best = Some(entry);
        }
    }

    /// Runners-up ranked by score, excluding the winner.
    pub fn finish(mut self) -> (Option<Scored>, Vec<Scored>, u64) {
        if let Some(best) = &self.best {
            self.runners.retain(|r| r.members != best.members);
        }
        self.runners.truncate(self.top_m);
        (self.best, self.runners, self.scored)
    }
}

/// Depth-first exhaustive search over every set whose size is in `sizes`.
pub(crate) fn search_incremental(prep: &Prepared, sizes: &[usize], tracker: &mut Tracker) {
    let n = prep.n;
    let Some(&k_max) = sizes.iter().max() else {
        return;
    };
    let k_min = *sizes.iter().min().unwrap();
    if k_min > n || k_max == 0 {
        return;
    }
    let k_max = k_max.min(n);
    let mut want = vec![false; k_max + 1];
    for &k in sizes {
        if k <= k_max {
            want[k] = true;
        }
    }

    let (qw, aw) = (prep.q.words, prep.a.words);
    let mut st = DfsState {
        members: Vec::with_capacity(k_max),
        bm25: vec![0.0; k_max + 1],
        ov: vec![0.0; k_max + 1],
        uq: vec![0u64; (k_max + 1) * qw],
        ua: vec![0u64; (k_max + 1) * aw],
    };
    descend(prep, &want, k_min, k_max, 0, 0, &mut st, tracker);
}

struct DfsState {
    members: Vec<usize>,
    /// Running sums indexed by depth (number of members).
    bm25: Vec<f64>,
    ov: Vec<f64>,
    uq: Vec<u64>,
    ua: Vec<u64>,
}

#[allow(clippy::too_many_arguments)]
fn descend(
    prep: &Prepared,
    want: &[bool],
    k_min: usize,
    k_max: usize,
    start: usize,
    depth: usize,
    st: &mut DfsState,
    tracker: &mut Tracker,
) {
    let n = prep.n;
    let (qw, aw) = (prep.q.words, prep.a.words);
    let next_depth = depth + 1;
    for i in start..n {
        // Not enough candidates left to reach the smallest wanted size.
        if next_depth + (n - i - 1) < k_min {
            break;
        }
        let mut ov = st.ov[depth];
        for &p in &st.members {
            ov += prep.pair[p * n + i];
        }
        st.ov[next_depth] = ov;
        st.bm25[next_depth] = st.bm25[depth] + prep.bm25[i];
        {
            let (prev, cur) = st.uq.split_at_mut(next_depth * qw);
            let prev = &prev[depth * qw..];
            for ((c, p), r) in cur[..qw].iter_mut().zip(prev).zip(prep.q.row(i)) {
                *c = p | r;
            }
            let (prev, cur) = st.ua.split_at_mut(next_depth * aw);
            let prev = &prev[depth * aw..];
            for ((c, p), r) in cur[..aw].iter_mut().zip(prev).zip(prep.a.row(i)) {
                *c = p | r;
            }
        }
        st.members.push(i);
        if want[next_depth] {
            let b = prep.breakdown(
                st.bm25[next_depth],
                st.ov[next_depth],
                next_depth,
                &st.uq[next_depth * qw..(next_depth + 1) * qw],
                &st.ua[next_depth * aw..(next_depth + 1) * aw],
            );
            tracker.offer(&st.members, b);
        }
        if next_depth < k_max {
            descend(prep, want, k_min, k_max, i + 1, next_depth, st, tracker);
        }
        st.members.pop();
    }
}

/// Enumerates every set and scores each one independently from the cached
/// per-sentence and per-pair values, with no state shared between sets.
pub(crate) fn search_naive(prep: &Prepared, sizes: &[usize], tracker: &mut Tracker) -> Result<()> {
    for &k in sizes {
        for combo in enumerate_sets(prep.n, k)? {
            tracker.offer(&combo, prep.score_members(&combo));
        }
    }
    Ok(())
}

/// Beam search: keeps the `width` best sets of each size and grows them by
/// one candidate at a time. Approximate; off unless requested.
pub(crate) fn search_beam(prep: &Prepared, sizes: &[usize], width: usize, tracker: &mut Tracker) {
    let n = prep.n;
    let Some(&k_max) = sizes.iter().max() else {
        return;
    };
    let k_max = k_max.min(n);
    let mut frontier: Vec<Scored> = (0..n)
        .map(|i| Scored {
            members: vec![i],
            breakdown: prep.score_members(&[i]),
        })
        .collect();
    for k in 1..=k_max {
        if k > 1 {
            let mut next: Vec<Scored> = Vec::new();
            for parent in &frontier {
                let last = *parent.members.last().unwrap();
                for i in last + 1..n {
                    let mut members = parent.members.clone();
                    members.push(i);
                    let breakdown = prep.score_members(&members);
                    next.push(Scored { members, breakdown });
                }
            }
            frontier = next;
        }
        frontier.sort_by(exact_order);
        frontier.truncate(width.max(1));
        if sizes.contains(&k) {
            for s in &frontier {
                tracker.offer(&s.members, s.breakdown);
            }
        }
        if frontier.is_empty() {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::form_query;
    use crate::scoring::rocc_score;
    use crate::text::{build_stats, TokenizerConfig};

    #[test]
    fn tie_rule() {
        let other = Scored {
            members: vec![0, 2],
            breakdown: ScoreBreakdown {
                r: 1.0,
                o: 0.0,
                c_q: 0.0,
                c_a: 0.0,
                s: 1.0,
            },
        };
        assert!(ranks_ahead(1.0, &[0, 1], &other));
        assert!(!ranks_ahead(1.0, &[1, 2], &other));
        assert!(!ranks_ahead(1.0 + 1e-15, &[1, 2], &other));
        assert!(ranks_ahead(1.0001, &[1, 2], &other));
        assert!(!ranks_ahead(1.0, &[0, 1, 2], &other));
    }

    #[test]
    fn incremental_matches_direct_member_scoring() {
        let tok = TokenizerConfig::default();
        let texts = ["a b c", "b c d", "x y a", "q r s t", "a q", "b"];
        let sents: Vec<Sentence> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Sentence::new(i, *t, &tok))
            .collect();
        let refs: Vec<&Sentence> = sents.iter().collect();
        let stats = build_stats(&sents).unwrap();
        let q = form_query("a b q", "x d", &tok).unwrap();
        let cfg = RoccConfig::default();
        let p = Bm25Params::default();
        let prep = Prepared::new(&q, &refs, &stats, &p, &cfg);
        for k in 1..=texts.len() {
            for combo in enumerate_sets(texts.len(), k).unwrap() {
                let set: Vec<&Sentence> = combo.iter().map(|&i| refs[i]).collect();
                let want = rocc_score(&set, &q, &stats, &p, &cfg).unwrap();
                let got = prep.score_members(&combo);
                for (g, w) in [
                    (got.r, want.r),
                    (got.o, want.o),
                    (got.c_q, want.c_q),
                    (got.c_a, want.c_a),
                    (got.s, want.s),
                ] {
                    assert!(
                        (g - w).abs() <= 1e-9 * w.abs().max(1e-12),
                        "{combo:?}: {g} vs {w}"
                    );
                }
            }
        }
    }
}
