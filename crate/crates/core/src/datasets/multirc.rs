//! MultiRC adapter.
//!
//! Expected layout (the original release JSON):
//!
//! ```json
//! {"data":[{"id":"News/x.txt",
//!   "paragraph":{"text":"<b>Sent 1: </b>First.<br><b>Sent 2: </b>Second.<br>",
//!     "questions":[{"question":"...","sentences_used":[0,1],
//!       "answers":[{"text":"...","isAnswer":true}]}]}}]}
//! ```
//!
//! Sentences are numbered from 1 in the markup; `sentences_used` is 0-based.
//! Each answer option becomes one instance.

use serde::Deserialize;

use super::canonical::{Candidate, Label, QAInstance};
use crate::error::{Error, Result};

#[derive(Deserialize)]
struct File {
    data: Vec<Entry>,
}

#[derive(Deserialize)]
struct Entry {
    id: String,
    paragraph: Paragraph,
}

#[derive(Deserialize)]
struct Paragraph {
    text: String,
    questions: Vec<Question>,
}

#[derive(Deserialize)]
struct Question {
    question: String,
    sentences_used: Vec<usize>,
    answers: Vec<Answer>,
}

#[derive(Deserialize)]
struct Answer {
    text: String,
    #[serde(rename = "isAnswer")]
    is_answer: bool,
}

const SENT_OPEN: &str = "<b>Sent ";
const SENT_CLOSE: &str = ": </b>";

/// Splits `<b>Sent N: </b>...` markup into sentences; the result is indexed
/// from 0. Numbers must run 1, 2, 3, ... without gaps.
pub fn split_marked_sentences(text: &str) -> std::result::Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut rest = text;
    let Some(first) = rest.find(SENT_OPEN) else {
        return Err("no sentence markers".into());
    };
    rest = &rest[first..];
    while let Some(body) = rest.strip_prefix(SENT_OPEN) {
        let close = body
            .find(SENT_CLOSE)
            .ok_or("unterminated sentence marker")?;
        let number: usize = body[..close]
            .trim()
            .parse()
            .map_err(|_| format!("bad sentence number {:?}", &body[..close]))?;
        if number != out.len() + 1 {
            return Err(format!("sentence {number} out of sequence"));
        }
        let body = &body[close + SENT_CLOSE.len()..];
        let end = body.find(SENT_OPEN).unwrap_or(body.len());
        out.push(clean(&body[..end]));
        rest = &body[end..];
    }
    Ok(out)
}

fn clean(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    // Drop remaining tags such as <br>.
    while let Some(open) = rest.find('<') {
        out.push_str(&rest[..open]);
        match rest[open..].find('>') {
            Some(close) => {
                out.push(' ');
                rest = &rest[open + close + 1..];
            }
            None => {
                rest = &rest[open..];
                break;
            }
        }
    }
    out.push_str(rest);
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Converts a MultiRC file into passage-mode instances with ids
/// `<paragraph id>::q<question>::a<answer>`.
pub fn adapt_multirc(json: &str, source_name: &str) -> Result<Vec<QAInstance>> {
    let file: File = serde_json::from_str(json)
        .map_err(|e| Error::parse(source_name, e.line(), e.to_string()))?;
    let mut out = Vec::new();
    for entry in file.data {
        let bad =
            |m: String| Error::InvalidData(format!("{source_name}: paragraph {}: {m}", entry.id));
        let sentences = split_marked_sentences(&entry.paragraph.text).map_err(bad)?;
        let candidates: Vec<Candidate> = sentences
            .into_iter()
            .enumerate()
            .map(|(idx, text)| Candidate { idx, text })
            .collect();
        for (qi, q) in entry.paragraph.questions.iter().enumerate() {
            if let Some(&u) = q.sentences_used.iter().find(|&&u| u >= candidates.len()) {
                return Err(bad(format!(
                    "question {qi} uses sentence {u} but the paragraph has {}",
                    candidates.len()
                )));
            }
            for (ai, a) in q.answers.iter().enumerate() {
                let inst = QAInstance {
                    id: format!("{}::q{qi}::a{ai}", entry.id),
                    question: q.question.clone(),
                    answer: a.text.clone(),
                    label: Some(if a.is_answer {
                        Label::Correct
                    } else {
                        Label::Incorrect
                    }),
                    candidates: Some(candidates.clone()),
                    gold_idxs: Some(q.sentences_used.iter().copied().collect()),
                };
                inst.validate()
                    .map_err(|m| bad(format!("{}: {m}", inst.id)))?;
                out.push(inst);
            }
        }
    }
    Ok(out)
}
