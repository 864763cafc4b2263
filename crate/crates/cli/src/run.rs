use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use rocc::datasets::{
    adapt_arc, adapt_multirc, load_canonical, load_kb, write_canonical, QAInstance,
};
use rocc::eval::{evaluate, parse_groups, Aggregate, EvalOptions};
use rocc::pipeline::{
    load_selections, CandidateMode, Header, OutputRecord, Pipeline, Strategy, TOOL_NAME,
    TOOL_VERSION,
};
use rocc::retrieval::{build_index, read_index, write_index, Bm25Params, Index, Sentence};
use rocc::scoring::{Ablation, Matcher, OverlapPairs, RoccConfig};
use rocc::selector::{Engine, FinalOrder, SelectionConfig, SelectionMode};
use rocc::text::{parse_stopwords, TokenizerConfig};

use crate::args::*;
use crate::Failure;

/// Instances handed to the worker pool at a time; records are written in
/// input order after each batch.
const BATCH: usize = 256;

const DEFAULT_THRESHOLD: f64 = 0.95;

pub fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            toml::from_str::<FileConfig>(&text)
                .map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Index(c) => cmd_index(&c, c.tokenizer.clone().or(file.tokenizer)),
        Command::Select(c) => {
            let settings = Settings::resolve(
                c.tokenizer.clone().or(file.tokenizer),
                c.select.clone().or(file.select),
            )?;
            cmd_select(&c, settings)
        }
        Command::Eval(c) => cmd_eval(&c),
        Command::Ablate(c) => {
            let settings = Settings::resolve(
                c.tokenizer.clone().or(file.tokenizer),
                c.select.clone().or(file.select),
            )?;
            cmd_ablate(&c, settings)
        }
        Command::AdaptMultirc(c) => {
            let text = std::fs::read_to_string(&c.input).map_err(|e| io_failure(&c.input, e))?;
            let instances = adapt_multirc(&text, &c.input.display().to_string())?;
            write_instances(&instances, c.out.as_deref())
        }
        Command::AdaptArc(c) => {
            let f = File::open(&c.input).map_err(|e| io_failure(&c.input, e))?;
            let instances = adapt_arc(std::io::BufReader::new(f), &c.input.display().to_string())?;
            write_instances(&instances, c.out.as_deref())
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::data(format!("{}: {e}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            Failure::usage(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_instances(instances: &[QAInstance], out: Option<&Path>) -> Result<(), Failure> {
    let mut w = output(out)?;
    write_canonical(instances, &mut w)?;
    w.flush()?;
    eprintln!("wrote {} instances", instances.len());
    Ok(())
}

fn tokenizer_config(args: &TokenizerArgs) -> Result<TokenizerConfig, Failure> {
    let mut cfg = TokenizerConfig {
        lowercase: !args.no_lowercase.unwrap_or(false),
        ..Default::default()
    };
    if let Some(n) = args.min_token_len {
        cfg.min_token_len = n;
    }
    if let Some(path) = &args.stopwords {
        let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
        cfg = cfg.with_stopwords(parse_stopwords(&text));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_index(c: &IndexCmd, tok: TokenizerArgs) -> Result<(), Failure> {
    let tokenizer = tokenizer_config(&tok)?;
    let kb = load_kb(&c.kb)?;
    if kb.sentences.is_empty() {
        return Err(Failure::data(format!(
            "{}: no usable sentences",
            c.kb.display()
        )));
    }
    let sentences: Vec<Sentence> = kb
        .sentences
        .iter()
        .map(|s| Sentence::new(s.idx, s.text.as_str(), &tokenizer))
        .collect();
    let index = build_index(sentences, tokenizer)?;
    write_index(&index, &c.out)?;
    eprintln!(
        "indexed {} sentences, {} terms; skipped {} lines",
        index.len(),
        index.postings.len(),
        kb.skipped
    );
    Ok(())
}

/// Fully resolved selection settings.
pub struct Settings {
    pipeline: Pipeline,
    mode: ModeArg,
    index: Option<PathBuf>,
    align: Option<(PathBuf, f64, Option<usize>)>,
    workers: usize,
}

fn parse_k_range(s: &str) -> Result<Vec<usize>, Failure> {
    let bad = || Failure::usage(format!("invalid k range {s:?}; use `2..6` or `2,3,5`"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    if let Some((lo, hi)) = s.split_once("..") {
        let (lo, hi) = (num(lo)?, num(hi.trim_start_matches('='))?);
        if lo > hi {
            return Err(bad());
        }
        Ok((lo..=hi).collect())
    } else {
        s.split(',').map(num).collect()
    }
}

impl Settings {
    fn resolve(tok: TokenizerArgs, a: SelectArgs) -> Result<Self, Failure> {
        let tokenizer = tokenizer_config(&tok)?;
        let bm25 = Bm25Params {
            k1: a.k1.unwrap_or(Bm25Params::default().k1),
            b: a.b.unwrap_or(Bm25Params::default().b),
            unique_query_terms: !a.query_multiplicity.unwrap_or(false),
        };
        let ablation = match &a.ablate {
            Some(names) => Ablation::from_names(names.iter().map(String::as_str))?,
            None => Ablation::full(),
        };
        let align = match &a.align {
            Some(p) => Some((p.clone(), a.threshold.unwrap_or(DEFAULT_THRESHOLD), a.dim)),
            None if a.threshold.is_some() || a.dim.is_some() => {
                return Err(Failure::usage("--threshold and --dim need --align"))
            }
            None => None,
        };
        let rocc = RoccConfig {
            epsilon: a.epsilon.unwrap_or(RoccConfig::default().epsilon),
            ablation,
            overlap_pairs: match a.overlap_pairs {
                Some(PairsArg::Unordered) => OverlapPairs::Unordered,
                _ => OverlapPairs::Ordered,
            },
            // Replaced once the vectors are loaded.
            matcher: Matcher::Exact,
        };
        let defaults = SelectionConfig::default();
        let mode = match (a.k, a.auto, &a.k_range) {
            (Some(_), Some(true), _) => return Err(Failure::usage("--k conflicts with --auto")),
            (Some(_), _, Some(_)) => return Err(Failure::usage("--k conflicts with --k-range")),
            (Some(k), _, _) => SelectionMode::Parametric { k },
            (None, _, Some(r)) => SelectionMode::Auto {
                k_values: parse_k_range(r)?,
            },
            (None, _, None) => defaults.mode.clone(),
        };
        let engine = match a.engine {
            Some(EngineArg::Naive) => Engine::Naive,
            Some(EngineArg::Beam) => Engine::Beam {
                width: a.beam_width.unwrap_or(64),
            },
            _ if a.beam_width.is_some() => {
                return Err(Failure::usage("--beam-width needs --engine beam"))
            }
            _ => Engine::Incremental,
        };
        let selection = SelectionConfig {
            n: a.n.unwrap_or(defaults.n),
            mode,
            final_order: a.order.map(|o| match o {
                OrderArg::Index => FinalOrder::ByIndex,
                OrderArg::Score => FinalOrder::ByScore,
            }),
            engine,
            top_m: a.top_m.unwrap_or(0),
            allow_singletons: a.singletons.unwrap_or(false),
        };
        let mode = a.mode.unwrap_or(ModeArg::Auto);
        let pipeline = Pipeline {
            tokenizer,
            bm25,
            rocc,
            selection,
            strategy: match a.baseline {
                Some(StrategyArg::Bm25) => Strategy::Bm25,
                Some(StrategyArg::Bm25Matched) => Strategy::Bm25Matched,
                _ => Strategy::Rocc,
            },
            source: match mode {
                ModeArg::Auto => None,
                ModeArg::Passage => Some(CandidateMode::Passage),
                ModeArg::Kb => Some(CandidateMode::Kb),
            },
        };
        pipeline.validate()?;
        if mode == ModeArg::Kb && a.index.is_none() {
            return Err(Failure::usage("--mode kb needs --index"));
        }
        Ok(Self {
            pipeline,
            mode,
            index: a.index,
            align,
            workers: a.workers.unwrap_or(0),
        })
    }

    /// Loads the index and vectors the settings refer to.
    fn load(&mut self) -> Result<Option<Index>, Failure> {
        if let Some((path, threshold, dim)) = &self.align {
            let table = rocc::datasets::load_embeddings(path, *dim)?;
            self.pipeline.rocc.matcher = Matcher::alignment(Arc::new(table), *threshold);
            self.pipeline.rocc.validate()?;
        }
        Ok(match &self.index {
            Some(p) => Some(read_index(p)?),
            None => None,
        })
    }

    /// Configuration recorded in output headers. Worker count and output
    /// paths are left out so that they do not change the output bytes.
    fn describe(&self, data: &Path, index: Option<&Index>) -> Value {
        let rocc = &self.pipeline.rocc;
        let matcher = match &self.align {
            None => json!({"kind": "exact"}),
            Some((path, threshold, _)) => json!({
                "kind": "alignment",
                "embeddings": path,
                "threshold": threshold,
                "dim": match &rocc.matcher {
                    Matcher::Alignment { table, .. } => table.dim(),
                    Matcher::Exact => 0,
                },
            }),
        };
        json!({
            "data": data,
            "mode": self.mode,
            "index": self.index,
            "index_tokenizer": index.map(|i| &i.tokenizer),
            "strategy": self.pipeline.strategy,
            "tokenizer": self.pipeline.tokenizer,
            "bm25": self.pipeline.bm25,
            "rocc": {
                "epsilon": rocc.epsilon,
                "ablation": rocc.ablation,
                "overlap_pairs": rocc.overlap_pairs,
                "matcher": matcher,
            },
            "selection": self.pipeline.selection,
        })
    }

    fn pool(&self) -> Result<rayon::ThreadPool, Failure> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Failure::usage(format!("cannot start workers: {e}")))
    }
}

/// Selects for every instance, handing records to `sink` in input order.
fn select_all(
    pipeline: &Pipeline,
    instances: &[QAInstance],
    index: Option<&Index>,
    pool: &rayon::ThreadPool,
    mut sink: impl FnMut(OutputRecord) -> Result<(), Failure>,
) -> Result<(), Failure> {
    for batch in instances.chunks(BATCH) {
        let records: Vec<OutputRecord> = pool.install(|| {
            batch
                .par_iter()
                .map(|inst| pipeline.record(inst, index))
                .collect()
        });
        for r in records {
            sink(r)?;
        }
    }
    Ok(())
}

fn cmd_select(c: &SelectCmd, mut settings: Settings) -> Result<(), Failure> {
    let instances = load_canonical(&c.data)?;
    let index = settings.load()?;
    let pool = settings.pool()?;
    let mut out = output(c.out.as_deref())?;
    OutputRecord::Header(Header::new(settings.describe(&c.data, index.as_ref())))
        .write_line(&mut out)?;
    let (mut ok, mut failed) = (0usize, 0usize);
    select_all(&settings.pipeline, &instances, index.as_ref(), &pool, |r| {
        match &r {
            OutputRecord::Error(e) => {
                failed += 1;
                eprintln!("rocc: warning: {}: {}", e.id, e.error);
            }
            _ => ok += 1,
        }
        Ok(r.write_line(&mut out)?)
    })?;
    out.flush()?;
    eprintln!("selected {ok} instances, {failed} failed");
    Ok(())
}

fn eval_options(a: &EvalArgs) -> Result<EvalOptions, Failure> {
    let groups = match &a.groups {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_failure(p, e))?;
            Some(parse_groups(&text, &p.display().to_string())?)
        }
        None => None,
    };
    Ok(EvalOptions {
        correct_only: a.correct_only,
        groups,
    })
}

fn cmd_eval(c: &EvalCmd) -> Result<(), Failure> {
    let dataset = load_canonical(&c.data)?;
    let selections = load_selections(&c.selections)?;
    let opts = eval_options(&c.opts)?;
    let mut report = evaluate(&dataset, &selections.predictions(), &opts)?;
    eprintln!(
        "micro P={:.4} R={:.4} F1={:.4} over {} instances (skipped: {} without gold, {} by label, {} without prediction; {} failed selections)",
        report.overall.micro.precision,
        report.overall.micro.recall,
        report.overall.micro.f1,
        report.overall.scored,
        report.skipped_no_gold,
        report.skipped_label,
        report.missing_predictions,
        report.failed,
    );
    if !c.per_instance {
        report.per_instance.clear();
    }
    let mut out = output(c.out.as_deref())?;
    let mut value = serde_json::to_value(&report).map_err(std::io::Error::from)?;
    if !c.per_instance {
        value.as_object_mut().map(|m| m.remove("per_instance"));
    }
    serde_json::to_writer_pretty(&mut out, &value).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct AblationRow {
    ablation: String,
    #[serde(flatten)]
    metrics: Aggregate,
    failed: usize,
}

/// Rows of the ablation table, in order.
pub fn ablation_rows() -> Vec<Ablation> {
    let one = |name: &str| Ablation::from_names([name]).expect("known ablation name");
    std::iter::once(Ablation::full())
        .chain(Ablation::NAMES.iter().map(|n| one(n)))
        .collect()
}

fn cmd_ablate(c: &AblateCmd, mut settings: Settings) -> Result<(), Failure> {
    let dataset = load_canonical(&c.data)?;
    let opts = eval_options(&c.opts)?;
    let index = settings.load()?;
    let pool = settings.pool()?;
    let mut rows = Vec::new();
    for ablation in ablation_rows() {
        let pipeline = Pipeline {
            rocc: settings.pipeline.rocc.with_ablation(ablation),
            ..settings.pipeline.clone()
        };
        let mut records = Vec::with_capacity(dataset.len());
        select_all(&pipeline, &dataset, index.as_ref(), &pool, |r| {
            records.push(r);
            Ok(())
        })?;
        let selections = rocc::pipeline::Selections {
            header: Header::new(Value::Null),
            records,
        };
        let report = evaluate(&dataset, &selections.predictions(), &opts)?;
        rows.push(AblationRow {
            ablation: ablation.label(),
            metrics: report.overall,
            failed: report.failed,
        });
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "ablation\tprecision\trecall\tf1\tscored\tfailed")?;
    for r in &rows {
        writeln!(
            out,
            "{}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}",
            r.ablation,
            r.metrics.micro.precision,
            r.metrics.micro.recall,
            r.metrics.micro.f1,
            r.metrics.scored,
            r.failed
        )?;
    }
    if let Some(path) = &c.json {
        let doc = json!({
            "tool": TOOL_NAME,
            "version": TOOL_VERSION,
            "config": settings.describe(&c.data, index.as_ref()),
            "rows": rows,
        });
        let mut w = output(Some(path))?;
        serde_json::to_writer_pretty(&mut w, &doc).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    Ok(())
}
