//! Word vector tables in the common text distribution format:
//! one `term v1 v2 ... vD` row per line.

use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
    norms: HashMap<String, f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Default::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Inserts a vector unless the term is already present. Returns whether
    /// the vector was stored.
    pub fn insert(&mut self, term: impl Into<String>, vector: Vec<f32>) -> Result<bool> {
        if self.vectors.is_empty() && self.dim == 0 {
            self.dim = vector.len();
        }
        if vector.len() != self.dim {
            return Err(Error::InvalidData(format!(
                "vector of length {} in a table of dimension {}",
                vector.len(),
                self.dim
            )));
        }
        let term = term.into();
        if self.vectors.contains_key(&term) {
            return Ok(false);
        }
        let norm = vector
            .iter()
            .map(|&v| v as f64 * v as f64)
            .sum::<f64>()
            .sqrt();
        self.norms.insert(term.clone(), norm);
        self.vectors.insert(term, vector);
        Ok(true)
    }

    pub fn get(&self, term: &str) -> Option<&[f32]> {
        self.vectors.get(term).map(Vec::as_slice)
    }

    /// Cosine similarity, or `None` when either term has no vector. A zero
    /// vector has similarity 0 with everything.
    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        let (va, vb) = (self.vectors.get(a)?, self.vectors.get(b)?);
        let (na, nb) = (self.norms[a], self.norms[b]);
        if na == 0.0 || nb == 0.0 {
            return Some(0.0);
        }
        let dot: f64 = va.iter().zip(vb).map(|(&x, &y)| x as f64 * y as f64).sum();
        Some(dot / (na * nb))
    }
}

/// Parses a vector table. Blank lines are skipped, as is a leading
/// `count dim` header line. Duplicate terms keep their first vector.
pub fn parse_embeddings<R: BufRead>(
    reader: R,
    expected_dim: Option<usize>,
    source_name: &str,
) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new(0);
    let mut dim = expected_dim;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(term) = fields.next() else {
            continue;
        };
        let values: Vec<&str> = fields.collect();
        if lineno == 1
            && values.len() == 1
            && term.parse::<u64>().is_ok()
            && values[0].parse::<u64>().is_ok()
        {
            continue;
        }
        if values.is_empty() {
            return Err(Error::parse(
                source_name,
                lineno,
                format!("term {term:?} has no vector"),
            ));
        }
        let mut vector = Vec::with_capacity(values.len());
        for v in values {
            match v.parse::<f32>() {
                Ok(x) if x.is_finite() => vector.push(x),
                _ => {
                    return Err(Error::parse(
                        source_name,
                        lineno,
                        format!("invalid vector component {v:?}"),
                    ))
                }
            }
        }
        match dim {
            None => {
                dim = Some(vector.len());
                table.dim = vector.len();
            }
            Some(d) if d != vector.len() => {
                let what = if expected_dim.is_some() {
                    "expected"
                } else {
                    "previous rows have"
                };
                return Err(Error::parse(
                    source_name,
                    lineno,
                    format!("row has {} values, {what} {d}", vector.len()),
                ));
            }
            Some(d) => table.dim = d,
        }
        table.insert(term, vector)?;
    }
    if let Some(d) = dim {
        table.dim = d;
    }
    Ok(table)
}
