//! Line-delimited JSON, one record per question/answer pair:
//!
//! ```json
//! {"id":"p1::q0::a1","question":"...","answer":"...","label":"correct",
//!  "candidates":[{"idx":0,"text":"..."}],"gold_idxs":[0,2]}
//! ```
//!
//! `label`, `candidates` and `gold_idxs` are optional. Records without
//! `candidates` are knowledge-base instances.

use std::collections::{BTreeSet, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Candidate {
    pub idx: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QAInstance {
    pub id: String,
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<Candidate>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_idxs: Option<BTreeSet<usize>>,
}

impl QAInstance {
    pub fn is_passage(&self) -> bool {
        self.candidates.is_some()
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("field `id` is empty".into());
        }
        if self.question.trim().is_empty() {
            return Err("field `question` is empty".into());
        }
        if let Some(cands) = &self.candidates {
            if cands.is_empty() {
                return Err("field `candidates` is empty".into());
            }
            let mut seen = HashSet::new();
            for c in cands {
                if !seen.insert(c.idx) {
                    return Err(format!("field `candidates` repeats idx {}", c.idx));
                }
            }
            if let Some(gold) = &self.gold_idxs {
                if let Some(bad) = gold.iter().find(|g| !seen.contains(g)) {
                    return Err(format!(
                        "field `gold_idxs` has {bad}, which is not a candidate idx"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Parses canonical records. Blank lines are skipped; ids must be unique.
pub fn parse_canonical<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<QAInstance>> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(source_name, lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: QAInstance = serde_json::from_str(&line)
            .map_err(|e| Error::parse(source_name, lineno, e.to_string()))?;
        inst.validate()
            .map_err(|m| Error::parse(source_name, lineno, m))?;
        if !ids.insert(inst.id.clone()) {
            return Err(Error::parse(
                source_name,
                lineno,
                format!("duplicate id {:?}", inst.id),
            ));
        }
        out.push(inst);
    }
    Ok(out)
}

pub fn load_canonical(path: &Path) -> Result<Vec<QAInstance>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_canonical(std::io::BufReader::new(file), &path.display().to_string())
}

pub fn write_canonical<W: Write>(instances: &[QAInstance], mut out: W) -> Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut out, inst).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
