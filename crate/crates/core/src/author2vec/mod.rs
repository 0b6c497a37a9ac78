//! Author2Vec: a bidirectional GRU over an author's post embeddings, a
//! k-sparse code layer, and (during pre-training only) an MLP that predicts
//! which author wrote the posts.

mod checkpoint;
mod export;
mod network;
mod train;

pub use checkpoint::{Checkpoint, CKPT_MAGIC, CKPT_VERSION};
pub use export::{
    read_author_embeddings, sparse_csv_line, write_author_embeddings, write_sparse_csv,
};
pub use network::{Forward, Network};
pub use train::{
    initial_model, pretrain, pretrain_from, sample_training_example, EpochObserver, EpochRecord,
    LrSchedule, PretrainConfig, PretrainOutput, TrainingExample,
};

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedstore::{EmbedError, PostEmbeddingMatrix};
use crate::nnkernel::{NnError, Pooling, SparsityMode};
use crate::seeding::derive_rng;

#[derive(Debug, Error)]
pub enum A2vError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("author {author:?} has post dim {got}, model expects {expected}")]
    DimMismatch {
        author: String,
        expected: usize,
        got: usize,
    },
    #[error("model has no classification head")]
    NoHead,
    #[error("author {author:?} has {have} usable posts, {need} required")]
    TooFewPosts {
        author: String,
        have: usize,
        need: usize,
    },
    #[error("pre-training needs at least 2 authors, found {0}")]
    TooFewAuthors(usize),
    #[error("class {0:?} has no posts in the corpus")]
    MissingClass(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss or gradient in epoch {epoch}; last good model kept")]
    NonFinite {
        epoch: usize,
        last_good: Box<AuthorVecModel>,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Width of each post embedding.
    pub input_dim: usize,
    /// GRU units per direction.
    pub hidden: usize,
    /// Width of the k-sparse code (the author embedding).
    pub code_dim: usize,
    pub k_train: usize,
    pub k_infer: usize,
    /// Hidden ReLU layer widths of the pre-training head.
    pub head_hidden: Vec<usize>,
    pub pooling: Pooling,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_dim: 3072,
            hidden: 512,
            code_dim: 768,
            k_train: 32,
            k_infer: 64,
            head_hidden: vec![256],
            pooling: Pooling::Final,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), A2vError> {
        let bad = |m: &str| Err(A2vError::InvalidConfig(m.to_string()));
        if self.input_dim == 0 || self.hidden == 0 || self.code_dim == 0 {
            return bad("input_dim, hidden and code_dim must be positive");
        }
        if !(0 < self.k_train && self.k_train <= self.k_infer && self.k_infer <= self.code_dim) {
            return bad("need 0 < k_train <= k_infer <= code_dim");
        }
        if self.head_hidden.contains(&0) {
            return bad("head layer widths must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuthorVecModel {
    pub config: ModelConfig,
    /// Author id per output class of the head; empty once stripped.
    pub classes: Vec<String>,
    pub net: Network<f32>,
}

/// Sparse author vector produced at inference time.
#[derive(Clone, Debug, PartialEq)]
pub struct AuthorEmbedding {
    pub author_id: String,
    pub vector: Vec<f32>,
}

impl AuthorEmbedding {
    pub fn nonzeros(&self) -> usize {
        self.vector.iter().filter(|v| **v != 0.0).count()
    }
}

impl AuthorVecModel {
    /// Fresh model with a head over `classes`. Every component draws from
    /// its own stream derived from `seed`.
    pub fn new(config: ModelConfig, classes: Vec<String>, seed: u64) -> Result<Self, A2vError> {
        config.validate()?;
        if classes.len() < 2 {
            return Err(A2vError::TooFewAuthors(classes.len()));
        }
        let net = Network::build(&config, Some(&classes), |c| {
            derive_rng(seed, &format!("init:{c}"))
        });
        Ok(Self {
            config,
            classes,
            net,
        })
    }

    /// Encoder and code layer only.
    pub fn new_headless(config: ModelConfig, seed: u64) -> Result<Self, A2vError> {
        config.validate()?;
        let net = Network::build(&config, None, |c| derive_rng(seed, &format!("init:{c}")));
        Ok(Self {
            config,
            classes: Vec::new(),
            net,
        })
    }

    pub fn has_head(&self) -> bool {
        self.net.head.is_some()
    }

    /// Drops the classification head; embeddings are unaffected.
    pub fn strip_head(mut self) -> Self {
        self.net.head = None;
        self.classes.clear();
        self
    }

    pub fn class_index(&self) -> HashMap<&str, usize> {
        self.classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect()
    }

    pub(crate) fn check_dim(&self, m: &PostEmbeddingMatrix) -> Result<(), A2vError> {
        if m.dim() != self.config.input_dim {
            return Err(A2vError::DimMismatch {
                author: m.author_id().to_string(),
                expected: self.config.input_dim,
                got: m.dim(),
            });
        }
        Ok(())
    }

    /// Encodes every post in order and applies the inference-time sparsity.
    pub fn embed_author(&self, author: &PostEmbeddingMatrix) -> Result<AuthorEmbedding, A2vError> {
        self.check_dim(author)?;
        let seq: Vec<&[f32]> = author.iter_rows().collect();
        let code = self.net.encode(&seq, SparsityMode::Infer)?;
        Ok(AuthorEmbedding {
            author_id: author.author_id().to_string(),
            vector: code.output,
        })
    }

    /// [`embed_author`](Self::embed_author) over many authors in parallel;
    /// output order follows input order.
    pub fn embed_authors(
        &self,
        authors: &[PostEmbeddingMatrix],
    ) -> Result<Vec<AuthorEmbedding>, A2vError> {
        authors.par_iter().map(|a| self.embed_author(a)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_config(input_dim: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            hidden: 8,
            code_dim: 12,
            k_train: 3,
            k_infer: 5,
            head_hidden: vec![6],
            pooling: Pooling::Final,
        }
    }

    fn matrix(id: &str, rows: usize, dim: usize, phase: f32) -> PostEmbeddingMatrix {
        PostEmbeddingMatrix::new(
            id,
            dim,
            (0..rows * dim)
                .map(|i| (i as f32 * 0.37 + phase).sin())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn embedding_contracts() {
        let classes = vec!["a".to_string(), "b".to_string()];
        let model = AuthorVecModel::new(small_config(4), classes, 1).unwrap();
        let m = matrix("x", 6, 4, 0.0);
        let e = model.embed_author(&m).unwrap();
        assert_eq!(e.vector.len(), 12);
        assert!(e.nonzeros() <= 5);
        assert_eq!(model.embed_author(&m).unwrap(), e);
        // Single post.
        assert!(
            model
                .embed_author(&matrix("y", 1, 4, 1.0))
                .unwrap()
                .nonzeros()
                <= 5
        );
        // Duplicating every post changes the embedding.
        let doubled: Vec<f32> = m
            .iter_rows()
            .flat_map(|r| r.iter().chain(r.iter()).copied())
            .collect();
        let d = PostEmbeddingMatrix::new("x", 4, doubled).unwrap();
        assert_ne!(model.embed_author(&d).unwrap().vector, e.vector);
        // Stripping the head leaves embeddings bitwise unchanged.
        let stripped = model.clone().strip_head();
        assert!(!stripped.has_head());
        assert_eq!(stripped.embed_author(&m).unwrap(), e);
        assert!(matches!(
            model.embed_author(&matrix("z", 2, 3, 0.0)),
            Err(A2vError::DimMismatch {
                expected: 4,
                got: 3,
                ..
            })
        ));
        let many = model
            .embed_authors(&[m.clone(), matrix("y", 3, 4, 2.0)])
            .unwrap();
        assert_eq!(many[0], e);
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::default().validate().is_ok());
        let bad = ModelConfig {
            k_train: 65,
            ..ModelConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(matches!(
            AuthorVecModel::new(small_config(3), vec!["only".into()], 0),
            Err(A2vError::TooFewAuthors(1))
        ));
    }
}
