//! ARC adapter: one JSON object per line,
//!
//! ```json
//! {"id":"Mercury_1","question":{"stem":"...","choices":[{"text":"...","label":"A"}]},"answerKey":"A"}
//! ```
//!
//! Each choice becomes a knowledge-base instance with id `<id>::<label>`.

use std::io::BufRead;

use serde::Deserialize;

use super::canonical::{Label, QAInstance};
use crate::error::{Error, Result};

#[derive(Deserialize)]
struct Record {
    id: String,
    question: Stem,
    #[serde(rename = "answerKey")]
    answer_key: Option<String>,
}

#[derive(Deserialize)]
struct Stem {
    stem: String,
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    text: String,
    label: String,
}

pub fn adapt_arc<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<QAInstance>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(source_name, lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::parse(source_name, lineno, e.to_string()))?;
        for c in &rec.question.choices {
            let inst = QAInstance {
                id: format!("{}::{}", rec.id, c.label),
                question: rec.question.stem.clone(),
                answer: c.text.clone(),
                label: rec.answer_key.as_ref().map(|k| {
                    if *k == c.label {
                        Label::Correct
                    } else {
                        Label::Incorrect
                    }
                }),
                candidates: None,
                gold_idxs: None,
            };
            inst.validate()
                .map_err(|m| Error::parse(source_name, lineno, m))?;
            out.push(inst);
        }
    }
    Ok(out)
}
