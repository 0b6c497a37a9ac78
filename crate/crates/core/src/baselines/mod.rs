//! Bag-of-words and word-vector user embedders used as comparison points.

mod dictionary;
mod io;
mod lda;
mod lsi;
mod svd;
mod wordvec;

pub use dictionary::{build_dictionary, tfidf_vector, BowDictionary, DictionaryConfig};
pub use io::{LDA_MAGIC, LSI_MAGIC, MODEL_VERSION};
pub use lda::{fit_lda, lda_user_embedding, LdaConfig, LdaModel, LdaSampler};
pub use lsi::{fit_lsi, lsi_user_embedding, LsiMode, LsiModel};
pub use svd::{randomized_svd, SvdConfig, TruncatedSvd};
pub use wordvec::{wordvec_user_embedding, WordVectorTable};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("every token was filtered out of the dictionary")]
    EmptyDictionary,
    #[error("rank {rank} out of range for a {rows}×{cols} matrix")]
    RankTooLarge {
        rank: usize,
        rows: usize,
        cols: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("word vectors line {line}: {message}")]
    WordVectors { line: usize, message: String },
    #[error("model file: {0}")]
    ModelFile(String),
}

/// A user vector plus a flag raised when no token of the author contributed.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineVector {
    pub values: Vec<f64>,
    pub no_evidence: bool,
}
