use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "rocc",
    version,
    about = "Select and evaluate justification sentence sets"
)]
pub struct Cli {
    /// TOML file with `[tokenizer]` and `[select]` defaults; flags override it.
    #[arg(long, global = true, env = "ROCC_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a retrieval index over a knowledge base (one sentence per line).
    Index(IndexCmd),
    /// Choose a justification set for every instance of a dataset.
    Select(SelectCmd),
    /// Score a selection file against gold justifications.
    Eval(EvalCmd),
    /// Run selection and evaluation for each ablation of the score.
    Ablate(AblateCmd),
    /// Convert a MultiRC JSON file to canonical instances.
    AdaptMultirc(AdaptCmd),
    /// Convert an ARC JSONL file to canonical instances.
    AdaptArc(AdaptCmd),
}

#[derive(Debug, Args)]
pub struct IndexCmd {
    #[arg(long)]
    pub kb: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,
}

#[derive(Debug, Args)]
pub struct SelectCmd {
    /// Canonical JSONL dataset.
    #[arg(long)]
    pub data: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,
    #[command(flatten)]
    pub select: SelectArgs,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    #[arg(long)]
    pub selections: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub opts: EvalArgs,
    /// Include per-instance scores in the report.
    #[arg(long)]
    pub per_instance: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Score only instances labelled correct.
    #[arg(long)]
    pub correct_only: bool,
    /// `id<TAB>group` file for per-group metrics.
    #[arg(long)]
    pub groups: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateCmd {
    #[arg(long)]
    pub data: PathBuf,
    /// Write the table as JSON here as well.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub opts: EvalArgs,
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,
    #[command(flatten)]
    pub select: SelectArgs,
}

#[derive(Debug, Args)]
pub struct AdaptCmd {
    #[arg(long)]
    pub input: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerArgs {
    /// Keep letter case.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_lowercase: Option<bool>,
    /// Stopword file, one word per line.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Drop tokens shorter than this many characters.
    #[arg(long)]
    pub min_token_len: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    /// Instance candidates when present, else the knowledge base.
    Auto,
    Passage,
    Kb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineArg {
    Incremental,
    Naive,
    Beam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderArg {
    Index,
    Score,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairsArg {
    Ordered,
    Unordered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    Rocc,
    Bm25,
    Bm25Matched,
}

#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectArgs {
    /// Candidate source.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Index built by `rocc index` (knowledge-base mode).
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Candidates retrieved per instance in knowledge-base mode.
    #[arg(long)]
    pub n: Option<usize>,
    /// Fixed set size.
    #[arg(long)]
    pub k: Option<usize>,
    /// Search every size in --k-range and keep the best set.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub auto: Option<bool>,
    /// Sizes for --auto: `2..6` (inclusive) or `2,3,5`.
    #[arg(long)]
    pub k_range: Option<String>,
    /// Smoothing constant added to each score factor.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// BM25 term-frequency saturation.
    #[arg(long)]
    pub k1: Option<f64>,
    /// BM25 length normalization.
    #[arg(long)]
    pub b: Option<f64>,
    /// Count repeated query tokens in BM25 instead of unique terms.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub query_multiplicity: Option<bool>,
    /// Score components to remove: no_idf, no_c_answer, no_c_question,
    /// no_overlap, r_only.
    #[arg(long, value_delimiter = ',')]
    pub ablate: Option<Vec<String>>,
    /// Normalization of the pairwise overlap sum.
    #[arg(long, value_enum)]
    pub overlap_pairs: Option<PairsArg>,
    /// Word vectors enabling alignment matching.
    #[arg(long)]
    pub align: Option<PathBuf>,
    /// Cosine similarity above which two terms match.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Expected vector dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Search engine; all but `beam` are exhaustive.
    #[arg(long, value_enum)]
    pub engine: Option<EngineArg>,
    /// Sets kept per size by the beam engine.
    #[arg(long)]
    pub beam_width: Option<usize>,
    /// Runner-up sets to report.
    #[arg(long)]
    pub top_m: Option<usize>,
    /// Permit single-sentence sets.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub singletons: Option<bool>,
    /// Output order of chosen sentences (defaults by candidate source).
    #[arg(long, value_enum)]
    pub order: Option<OrderArg>,
    /// Selection strategy: the combined score, or a BM25 top-k baseline.
    #[arg(long, value_enum)]
    pub baseline: Option<StrategyArg>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
}

macro_rules! merge_fields {
    ($a:expr, $b:expr, $($f:ident),*) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f; } )*
    };
}

impl TokenizerArgs {
    pub fn or(mut self, file: TokenizerArgs) -> Self {
        merge_fields!(self, file, no_lowercase, stopwords, min_token_len);
        self
    }
}

impl SelectArgs {
    pub fn or(mut self, mut file: SelectArgs) -> Self {
        // A size choice on the command line replaces the file's choice.
        if self.k.is_some() {
            file.auto = None;
            file.k_range = None;
        }
        if self.auto == Some(true) || self.k_range.is_some() {
            file.k = None;
        }
        merge_fields!(
            self,
            file,
            mode,
            index,
            n,
            k,
            auto,
            k_range,
            epsilon,
            k1,
            b,
            query_multiplicity,
            ablate,
            overlap_pairs,
            align,
            threshold,
            dim,
            engine,
            beam_width,
            top_m,
            singletons,
            order,
            baseline,
            workers
        );
        self
    }
}

/// Contents of a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub tokenizer: TokenizerArgs,
    pub select: SelectArgs,
}
