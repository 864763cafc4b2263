//! Unsupervised selection of justification sentence sets for a question and
//! candidate answer.
//!
//! Candidate sentences come either from a passage (every sentence is a
//! candidate) or from BM25 retrieval over a sentence knowledge base. Every
//! combination of candidates is scored by
//!
//! ```text
//! S = R / (ε + O) · (ε + C(A)) · (ε + C(Q))
//! ```
//!
//! where `R` is the mean BM25 of the members, `O` their normalized pairwise
//! term overlap, and `C(Q)`, `C(A)` the IDF-weighted fraction of question and
//! answer terms covered by the set. The highest-scoring set is returned,
//! either for a fixed size or across a range of sizes.

pub mod datasets;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod retrieval;
pub mod scoring;
pub mod selector;
pub mod text;

pub use error::{Error, Result};
