//! Binary index cache.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "ROCCIDX\0"
//! version    u32
//! tokenizer  lowercase u8, min_token_len u32, stopword count u32, strings
//! vocabulary term count u32, strings (strictly ascending)
//! sentences  count u32, then per sentence:
//!            idx u64 (strictly ascending), text string,
//!            token count u32, token ids u32 (into the vocabulary)
//! ```
//!
//! Strings are a u32 byte length followed by UTF-8 bytes. Postings and
//! statistics are rebuilt on load, so a decoded index always satisfies the
//! index invariants. Encoding is deterministic: identical input yields
//! identical bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::{build_index, Index, Sentence};
use crate::error::{Error, Result};
use crate::text::{Token, TokenizerConfig};

pub const CACHE_MAGIC: &[u8; 8] = b"ROCCIDX\0";
pub const CACHE_VERSION: u32 = 1;

pub fn encode_index(index: &Index) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CACHE_MAGIC);
    put_u32(&mut out, CACHE_VERSION);

    let tok = &index.tokenizer;
    out.push(tok.lowercase as u8);
    put_u32(&mut out, tok.min_token_len as u32);
    put_u32(&mut out, tok.stopwords.len() as u32);
    for w in &tok.stopwords {
        put_str(&mut out, w);
    }

    let vocab: BTreeSet<&str> = index
        .sentences
        .iter()
        .flat_map(|s| s.tokens.iter().map(Token::as_str))
        .collect();
    let ids: BTreeMap<&str, u32> = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (*t, i as u32))
        .collect();
    put_u32(&mut out, vocab.len() as u32);
    for t in &vocab {
        put_str(&mut out, t);
    }

    put_u32(&mut out, index.sentences.len() as u32);
    for s in &index.sentences {
        out.extend_from_slice(&(s.idx as u64).to_le_bytes());
        put_str(&mut out, &s.text);
        put_u32(&mut out, s.tokens.len() as u32);
        for t in &s.tokens {
            put_u32(&mut out, ids[t.as_str()]);
        }
    }
    out
}

pub fn decode_index(bytes: &[u8]) -> Result<Index> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != CACHE_MAGIC {
        return Err(Error::Cache("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CACHE_VERSION {
        return Err(Error::Cache(format!(
            "unsupported format version {version} (expected {CACHE_VERSION})"
        )));
    }

    let lowercase = match r.u8()? {
        0 => false,
        1 => true,
        b => return Err(Error::Cache(format!("bad lowercase flag {b}"))),
    };
    let min_token_len = r.u32()? as usize;
    let n_stop = r.count(4)?;
    let mut stopwords = BTreeSet::new();
    for _ in 0..n_stop {
        stopwords.insert(r.string()?);
    }
    let tokenizer = TokenizerConfig {
        lowercase,
        stopwords,
        min_token_len,
    };
    tokenizer
        .validate()
        .map_err(|e| Error::Cache(e.to_string()))?;

    let n_vocab = r.count(4)?;
    let mut vocab: Vec<Token> = Vec::with_capacity(n_vocab);
    for _ in 0..n_vocab {
        let s = r.string()?;
        if s.is_empty() || s.chars().any(|c| !c.is_alphanumeric()) {
            return Err(Error::Cache(format!("invalid term {s:?}")));
        }
        if vocab.last().is_some_and(|prev| prev.as_str() >= s.as_str()) {
            return Err(Error::Cache("vocabulary not strictly ascending".into()));
        }
        vocab.push(Token::from_normalized(s));
    }

    let n_sent = r.count(12)?;
    let mut sentences = Vec::with_capacity(n_sent);
    let mut last_idx: Option<u64> = None;
    for _ in 0..n_sent {
        let idx = r.u64()?;
        if last_idx.is_some_and(|p| p >= idx) {
            return Err(Error::Cache(
                "sentence indices not strictly ascending".into(),
            ));
        }
        last_idx = Some(idx);
        let idx =
            usize::try_from(idx).map_err(|_| Error::Cache("sentence index overflow".into()))?;
        let text = r.string()?;
        let n_tok = r.count(4)?;
        let mut tokens = Vec::with_capacity(n_tok);
        for _ in 0..n_tok {
            let id = r.u32()? as usize;
            let t = vocab
                .get(id)
                .ok_or_else(|| Error::Cache(format!("term id {id} out of range")))?;
            tokens.push(t.clone());
        }
        sentences.push(Sentence::from_tokens(idx, text, tokens));
    }
    if r.pos != bytes.len() {
        return Err(Error::Cache("trailing bytes after index".into()));
    }
    build_index(sentences, tokenizer).map_err(|e| Error::Cache(e.to_string()))
}

pub fn write_index(index: &Index, path: &Path) -> Result<()> {
    std::fs::write(path, encode_index(index)).map_err(|e| Error::io(path, e))
}

pub fn read_index(path: &Path) -> Result<Index> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_index(&bytes)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Cache(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Reads an element count, rejecting counts that cannot fit in the
    /// remaining input given a minimum encoded size per element.
    fn count(&mut self, min_elem_size: usize) -> Result<usize> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_elem_size) > self.buf.len() - self.pos {
            return Err(Error::Cache(format!("count {n} exceeds remaining input")));
        }
        Ok(n)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Cache("invalid utf-8 string".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::{form_query, retrieve_top_n, Bm25Params};

    fn sample() -> Index {
        let cfg = TokenizerConfig::default().with_stopwords(["the"]);
        let sents = [
            "The liver is an organ",
            "colon and esophagus",
            "liver liver",
        ]
        .iter()
        .enumerate()
        .map(|(i, t)| Sentence::new(i * 3, *t, &cfg))
        .collect();
        build_index(sents, cfg).unwrap()
    }

    #[test]
    fn round_trip_preserves_retrieval() {
        let idx = sample();
        let bytes = encode_index(&idx);
        let back = decode_index(&bytes).unwrap();
        assert_eq!(back.tokenizer, idx.tokenizer);
        assert_eq!(back.sentences, idx.sentences);
        assert_eq!(back.stats, idx.stats);
        let q = form_query("which organ", "liver", &idx.tokenizer).unwrap();
        let p = Bm25Params::default();
        let a: Vec<_> = retrieve_top_n(&q, &idx, 5, &p)
            .iter()
            .map(|r| (r.sentence.idx, r.score))
            .collect();
        let b: Vec<_> = retrieve_top_n(&q, &back, 5, &p)
            .iter()
            .map(|r| (r.sentence.idx, r.score))
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn encoding_is_deterministic() {
        assert_eq!(encode_index(&sample()), encode_index(&sample()));
        let again = decode_index(&encode_index(&sample())).unwrap();
        assert_eq!(encode_index(&again), encode_index(&sample()));
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = encode_index(&sample());
        assert!(decode_index(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_index(b"NOTANIDX").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_index(&extra).is_err());
        let mut wrong_version = bytes.clone();
        wrong_version[8] = 9;
        assert!(matches!(decode_index(&wrong_version), Err(Error::Cache(_))));
        // Every truncation fails cleanly.
        for cut in 0..bytes.len() {
            assert!(decode_index(&bytes[..cut]).is_err());
        }
    }
}
