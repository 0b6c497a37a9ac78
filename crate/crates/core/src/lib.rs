//! Author2Vec: fixed-length author embeddings learned from sequences of
//! post embeddings.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`corpus`]: post dumps, tokenization, filtering and partitions.
//! * [`embedstore`]: the `AV1EMBED` binary post-embedding format and a
//!   deterministic stub embedder.
//! * [`baselines`]: TF-IDF + LSI, collapsed-Gibbs LDA and word-vector
//!   averaging user embedders.
//! * [`nnkernel`]: dense/GRU/k-sparse layers with hand-derived gradients,
//!   Adam and a finite-difference checker.
//! * [`author2vec`]: authorship-classification pre-training and inference.
//! * [`evalharness`]: folds, probes, metrics and benchmark drivers.
//! * [`viz`]: exact t-SNE and scatter export.
//! * [`synth`]: synthetic corpora for tests and smoke runs.

pub mod author2vec;
pub mod baselines;
pub mod corpus;
pub mod embedstore;
pub mod evalharness;
pub mod linalg;
pub mod nnkernel;
pub mod synth;
pub mod viz;

mod binio;
mod seeding;

pub use author2vec::{AuthorEmbedding, AuthorVecModel, ModelConfig, PretrainConfig};
pub use corpus::{AuthorRecord, FilterPolicy, Post, TokenizerVocab};
pub use embedstore::PostEmbeddingMatrix;
pub use evalharness::{EvalReport, FoldPlan, ProbeSpec};
