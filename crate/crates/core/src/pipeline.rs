//! End-to-end selection for dataset instances, and the JSONL records it
//! produces.
//!
//! A selection file starts with a header record carrying the tool version and
//! the resolved configuration, followed by one `selection` or `error` record
//! per instance, in input order.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datasets::QAInstance;
use crate::error::{Error, Result};
use crate::eval::Prediction;
use crate::retrieval::{
    bm25_score, form_query, retrieve_top_n, Bm25Params, Index, Query, Sentence,
};
use crate::scoring::{rocc_score, RoccConfig, ScoreBreakdown};
use crate::selector::{
    finalize, FinalOrder, JustificationSet, SelectionConfig, SelectionMode, Selector,
};
use crate::text::{build_stats, CorpusStats, TokenizerConfig};

pub const TOOL_NAME: &str = "rocc";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// How the justification set is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Combinatorial search over candidate sets.
    #[default]
    Rocc,
    /// The top-k candidates by individual BM25 (parametric mode only).
    Bm25,
    /// The top-k candidates by BM25, with k taken from the set the combined
    /// search would choose.
    Bm25Matched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateMode {
    Passage,
    Kb,
}

#[derive(Debug, Clone, Default)]
pub struct Pipeline {
    /// Tokenizer for passage instances. Knowledge-base instances use the
    /// tokenizer the index was built with.
    pub tokenizer: TokenizerConfig,
    pub bm25: Bm25Params,
    pub rocc: RoccConfig,
    pub selection: SelectionConfig,
    pub strategy: Strategy,
    /// Candidate source. `None` uses an instance's own candidates when it has
    /// them and the knowledge base otherwise.
    pub source: Option<CandidateMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutSentence {
    pub idx: usize,
    pub text: String,
    pub bm25: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerUp {
    pub member_idxs: Vec<usize>,
    pub breakdown: ScoreBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub id: String,
    pub mode: CandidateMode,
    pub k: usize,
    /// Chosen sentence indices, ascending.
    pub member_idxs: Vec<usize>,
    /// Chosen sentences in output order.
    pub sentences: Vec<OutSentence>,
    /// Passage mode: the chosen sentences joined with spaces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub justification: Option<String>,
    pub breakdown: ScoreBreakdown,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runners_up: Vec<RunnerUp>,
    pub candidates: usize,
    pub sets_scored: u64,
    /// Requested sizes exceeded the candidate count and were reduced.
    #[serde(default)]
    pub k_clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub config: serde_json::Value,
}

impl Header {
    pub fn new(config: serde_json::Value) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum OutputRecord {
    Header(Header),
    Selection(SelectionRecord),
    Error(ErrorRecord),
}

impl OutputRecord {
    pub fn id(&self) -> Option<&str> {
        match self {
            OutputRecord::Header(_) => None,
            OutputRecord::Selection(s) => Some(&s.id),
            OutputRecord::Error(e) => Some(&e.id),
        }
    }

    pub fn write_line<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, self).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

impl Pipeline {
    pub fn validate(&self) -> Result<()> {
        self.tokenizer.validate()?;
        self.bm25.validate()?;
        self.rocc.validate()?;
        self.selection.validate()?;
        if self.strategy == Strategy::Bm25
            && !matches!(self.selection.mode, SelectionMode::Parametric { .. })
        {
            return Err(Error::Config(
                "the bm25 baseline needs a fixed set size".into(),
            ));
        }
        Ok(())
    }

    /// Runs selection for one instance.
    pub fn select(&self, inst: &QAInstance, kb: Option<&Index>) -> Result<SelectionRecord> {
        let source = self.source.unwrap_or(if inst.is_passage() {
            CandidateMode::Passage
        } else {
            CandidateMode::Kb
        });
        match source {
            CandidateMode::Passage => {
                let cands = inst.candidates.as_ref().ok_or_else(|| {
                    Error::InvalidData("passage mode needs instance candidates".into())
                })?;
                let query = form_query(&inst.question, &inst.answer, &self.tokenizer)?;
                let sentences: Vec<Sentence> = cands
                    .iter()
                    .map(|c| Sentence::new(c.idx, c.text.as_str(), &self.tokenizer))
                    .collect();
                let stats = build_stats(&sentences)?;
                let refs: Vec<&Sentence> = sentences.iter().collect();
                self.select_from(inst, &query, &refs, &stats, CandidateMode::Passage)
            }
            CandidateMode::Kb => {
                let index = kb.ok_or_else(|| {
                    Error::InvalidData("knowledge-base mode needs an index".into())
                })?;
                let query = form_query(&inst.question, &inst.answer, &index.tokenizer)?;
                let hits = retrieve_top_n(&query, index, self.selection.n, &self.bm25);
                if hits.is_empty() {
                    return Err(Error::InvalidData(
                        "no knowledge-base sentence matches the query".into(),
                    ));
                }
                let refs: Vec<&Sentence> = hits.iter().map(|h| h.sentence).collect();
                self.select_from(inst, &query, &refs, &index.stats, CandidateMode::Kb)
            }
        }
    }

    /// Like [`Pipeline::select`], but failures become error records.
    pub fn record(&self, inst: &QAInstance, kb: Option<&Index>) -> OutputRecord {
        match self.select(inst, kb) {
            Ok(r) => OutputRecord::Selection(r),
            Err(e) => OutputRecord::Error(ErrorRecord {
                id: inst.id.clone(),
                error: e.to_string(),
            }),
        }
    }

    fn select_from(
        &self,
        inst: &QAInstance,
        query: &Query,
        candidates: &[&Sentence],
        stats: &CorpusStats,
        mode: CandidateMode,
    ) -> Result<SelectionRecord> {
        let m = candidates.len();
        let requested = self.selection.mode.sizes();
        let mut sizes: Vec<usize> = requested.iter().copied().filter(|&k| k <= m).collect();
        let k_clamped = sizes.len() != requested.len();
        let mut selector = Selector::from_config(&self.bm25, &self.rocc, &self.selection);
        if sizes.is_empty() {
            sizes.push(m);
            selector.allow_singletons |= m == 1;
        }
        let selection = selector.auto(query, candidates, stats, &sizes)?;
        let (best, sets_scored) = match self.strategy {
            Strategy::Rocc => (selection.best.clone(), selection.sets_scored),
            Strategy::Bm25 | Strategy::Bm25Matched => {
                let k = match self.strategy {
                    Strategy::Bm25 => sizes[0],
                    _ => selection.best.k,
                };
                (
                    bm25_top_k(query, candidates, stats, k, &self.bm25, &self.rocc)?,
                    0,
                )
            }
        };
        let order = self.selection.final_order.unwrap_or(match mode {
            CandidateMode::Passage => FinalOrder::ByIndex,
            CandidateMode::Kb => FinalOrder::ByScore,
        });
        let bm25_of: HashMap<usize, f64> = best
            .member_idxs
            .iter()
            .copied()
            .zip(best.member_bm25.iter().copied())
            .collect();
        let sentences: Vec<OutSentence> = finalize(&best, candidates, order)?
            .into_iter()
            .map(|s| OutSentence {
                idx: s.idx,
                text: s.text.clone(),
                bm25: bm25_of[&s.idx],
            })
            .collect();
        let justification = (mode == CandidateMode::Passage).then(|| {
            sentences
                .iter()
                .map(|s| s.text.as_str())
                .collect::<Vec<_>>()
                .join(" ")
        });
        let runners_up = if self.strategy == Strategy::Rocc {
            selection
                .runners_up
                .iter()
                .map(|r| RunnerUp {
                    member_idxs: r.member_idxs.clone(),
                    breakdown: r.breakdown,
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(SelectionRecord {
            id: inst.id.clone(),
            mode,
            k: best.k,
            member_idxs: best.member_idxs,
            sentences,
            justification,
            breakdown: best.breakdown,
            runners_up,
            candidates: m,
            sets_scored,
            k_clamped,
        })
    }
}

/// The `k` candidates with the highest individual BM25 (ties by ascending
/// index), scored as a set.
pub fn bm25_top_k(
    query: &Query,
    candidates: &[&Sentence],
    stats: &CorpusStats,
    k: usize,
    bm25: &Bm25Params,
    rocc: &RoccConfig,
) -> Result<JustificationSet> {
    if k == 0 || k > candidates.len() {
        return Err(Error::InfeasibleK {
            k,
            n: candidates.len(),
        });
    }
    let mut ranked: Vec<(&Sentence, f64)> = candidates
        .iter()
        .map(|s| (*s, bm25_score(query, s, stats, bm25)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.idx.cmp(&b.0.idx)));
    ranked.truncate(k);
    ranked.sort_by_key(|(s, _)| s.idx);
    let members: Vec<&Sentence> = ranked.iter().map(|(s, _)| *s).collect();
    Ok(JustificationSet {
        member_idxs: members.iter().map(|s| s.idx).collect(),
        k,
        breakdown: rocc_score(&members, query, stats, bm25, rocc)?,
        member_bm25: ranked.iter().map(|(_, b)| *b).collect(),
    })
}

/// A parsed selection file.
#[derive(Debug, Clone, PartialEq)]
pub struct Selections {
    pub header: Header,
    pub records: Vec<OutputRecord>,
}

impl Selections {
    /// Predicted index sets by instance id; failed instances map to `None`.
    pub fn predictions(&self) -> HashMap<String, Prediction> {
        self.records
            .iter()
            .filter_map(|r| match r {
                OutputRecord::Selection(s) => Some((
                    s.id.clone(),
                    Some(s.member_idxs.iter().copied().collect::<BTreeSet<_>>()),
                )),
                OutputRecord::Error(e) => Some((e.id.clone(), None)),
                OutputRecord::Header(_) => None,
            })
            .collect()
    }
}

/// Parses a selection file: a header line, then selection and error records
/// with unique ids. Blank lines are skipped.
pub fn parse_selections<R: BufRead>(reader: R, source_name: &str) -> Result<Selections> {
    let mut header = None;
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(source_name, lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: OutputRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(source_name, lineno, e.to_string()))?;
        match (rec, header.is_some()) {
            (OutputRecord::Header(h), false) => header = Some(h),
            (OutputRecord::Header(_), true) => {
                return Err(Error::parse(source_name, lineno, "second header record"))
            }
            (_, false) => {
                return Err(Error::parse(
                    source_name,
                    lineno,
                    "expected a header record first",
                ))
            }
            (rec, true) => {
                let id = rec.id().unwrap_or_default().to_string();
                if !ids.insert(id.clone()) {
                    return Err(Error::parse(
                        source_name,
                        lineno,
                        format!("duplicate id {id:?}"),
                    ));
                }
                records.push(rec);
            }
        }
    }
    let header = header.ok_or_else(|| Error::parse(source_name, 1, "missing header record"))?;
    Ok(Selections { header, records })
}

pub fn load_selections(path: &Path) -> Result<Selections> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_selections(std::io::BufReader::new(file), &path.display().to_string())
}
