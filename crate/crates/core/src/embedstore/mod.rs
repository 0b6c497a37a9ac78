//! Post-embedding matrices and the `AV1EMBED` container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "AV1EMBED" | u32 version | u32 dim | u64 author_count
//! author_count × ( u16 id_len | id bytes | u64 offset | u32 rows )
//! payload: one contiguous row-major f32 block per author
//! ```
//!
//! Offsets are absolute, strictly increasing and non-overlapping. Readers
//! validate the index eagerly and payload blocks lazily, so a clipped file
//! reports the first author whose block is incomplete.

mod format;
mod stub;

pub use format::{
    decode_embeddings, encode_embeddings, read_embeddings, write_embeddings, EmbeddingReader,
    IndexEntry, EMBED_MAGIC, EMBED_VERSION,
};
pub use stub::{stub_embed, StubEmbedder};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {found:?}, expected AV1EMBED")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated inside the header or index")]
    TruncatedHeader,
    #[error("payload for author {author:?} is truncated")]
    Truncated { author: String },
    #[error("unknown author {0:?}")]
    UnknownAuthor(String),
    #[error("non-finite value for author {author:?} at row {row}, column {col}")]
    NonFinite {
        author: String,
        row: usize,
        col: usize,
    },
    #[error("corrupt index: {0}")]
    CorruptIndex(String),
    #[error("author {author:?} has dim {got}, expected {expected}")]
    MixedDims {
        author: String,
        expected: usize,
        got: usize,
    },
    #[error("duplicate author {0:?}")]
    DuplicateAuthor(String),
    #[error("author {0:?} has no rows")]
    EmptyMatrix(String),
    #[error("author {author:?}: {len} values do not form rows of width {dim}")]
    Shape {
        author: String,
        len: usize,
        dim: usize,
    },
}

/// One author's posts as a row-major `rows × dim` f32 matrix, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct PostEmbeddingMatrix {
    author_id: String,
    dim: usize,
    values: Vec<f32>,
}

impl PostEmbeddingMatrix {
    /// Checks `rows ≥ 1`, `dim > 0` and finiteness.
    pub fn new(
        author_id: impl Into<String>,
        dim: usize,
        values: Vec<f32>,
    ) -> Result<Self, EmbedError> {
        let author_id = author_id.into();
        if dim == 0 || values.len() % dim != 0 {
            return Err(EmbedError::Shape {
                author: author_id,
                len: values.len(),
                dim,
            });
        }
        if values.is_empty() {
            return Err(EmbedError::EmptyMatrix(author_id));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite {
                author: author_id,
                row: i / dim,
                col: i % dim,
            });
        }
        Ok(Self {
            author_id,
            dim,
            values,
        })
    }

    pub fn from_rows(author_id: impl Into<String>, rows: &[Vec<f32>]) -> Result<Self, EmbedError> {
        let author_id = author_id.into();
        let dim = rows.first().map_or(0, Vec::len);
        if rows.is_empty() {
            return Err(EmbedError::EmptyMatrix(author_id));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(EmbedError::MixedDims {
                author: author_id,
                expected: dim,
                got: bad.len(),
            });
        }
        Self::new(author_id, dim, rows.concat())
    }

    pub fn author_id(&self) -> &str {
        &self.author_id
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    /// Rows at the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Vec<&[f32]> {
        indices.iter().map(|&i| self.row(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_invariants() {
        assert!(matches!(
            PostEmbeddingMatrix::new("a", 3, vec![]),
            Err(EmbedError::EmptyMatrix(_))
        ));
        assert!(matches!(
            PostEmbeddingMatrix::new("a", 3, vec![1.0; 4]),
            Err(EmbedError::Shape { .. })
        ));
        assert!(matches!(
            PostEmbeddingMatrix::new("a", 2, vec![1.0, 2.0, f32::NAN, 0.0]),
            Err(EmbedError::NonFinite { row: 1, col: 0, .. })
        ));
        let m = PostEmbeddingMatrix::from_rows("a", &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.select(&[1, 0])[0], &[3.0, 4.0]);
        assert!(matches!(
            PostEmbeddingMatrix::from_rows("a", &[vec![1.0, 2.0], vec![3.0]]),
            Err(EmbedError::MixedDims { .. })
        ));
    }
}
