//! Input formats: canonical instances, source-dataset adapters, knowledge
//! bases and vector tables.

mod arc;
mod canonical;
mod multirc;

use std::io::BufRead;
use std::path::Path;

pub use arc::adapt_arc;
pub use canonical::{
    load_canonical, parse_canonical, write_canonical, Candidate, Label, QAInstance,
};
pub use multirc::{adapt_multirc, split_marked_sentences};

use crate::embedding::{parse_embeddings, EmbeddingTable};
use crate::error::{Error, Result};

pub fn load_embeddings(path: &Path, expected_dim: Option<usize>) -> Result<EmbeddingTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(
        std::io::BufReader::new(file),
        expected_dim,
        &path.display().to_string(),
    )
}

/// Knowledge-base sentences read one per line. A sentence's idx is its
/// 0-based line number.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KbLines {
    pub sentences: Vec<Candidate>,
    /// Lines that were not valid UTF-8 or had no alphanumeric content.
    pub skipped: usize,
}

pub fn read_kb<R: BufRead>(mut reader: R) -> Result<KbLines> {
    let mut out = KbLines::default();
    let mut buf = Vec::new();
    let mut idx = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        match std::str::from_utf8(&buf) {
            Ok(s) if s.chars().any(char::is_alphanumeric) => out.sentences.push(Candidate {
                idx,
                text: s.trim().to_string(),
            }),
            _ => out.skipped += 1,
        }
        idx += 1;
    }
    Ok(out)
}

pub fn load_kb(path: &Path) -> Result<KbLines> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_kb(std::io::BufReader::new(file))
}
