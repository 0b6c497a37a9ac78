//! Author-embedding output: dense `AV1EMBED` files with one row per author,
//! and a sparse CSV with one `author_id,idx:value,...` line per author.

use std::io::Write;
use std::path::Path;

use super::{A2vError, AuthorEmbedding};
use crate::embedstore::{read_embeddings, write_embeddings, EmbedError, PostEmbeddingMatrix};

pub fn write_author_embeddings(
    embeddings: &[AuthorEmbedding],
    path: &Path,
) -> Result<(), A2vError> {
    let records = embeddings
        .iter()
        .map(|e| PostEmbeddingMatrix::new(e.author_id.clone(), e.vector.len(), e.vector.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    write_embeddings(&records, path)?;
    Ok(())
}

pub fn read_author_embeddings(path: &Path) -> Result<Vec<AuthorEmbedding>, A2vError> {
    read_embeddings(path, None)?
        .into_iter()
        .map(|m| {
            if m.rows() != 1 {
                return Err(A2vError::Embed(EmbedError::CorruptIndex(format!(
                    "author {:?} has {} rows, expected 1",
                    m.author_id(),
                    m.rows()
                ))));
            }
            Ok(AuthorEmbedding {
                author_id: m.author_id().to_string(),
                vector: m.values().to_vec(),
            })
        })
        .collect()
}

/// Non-zero entries only, ascending index. The id is CSV-quoted if needed.
pub fn sparse_csv_line(e: &AuthorEmbedding) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    let mut fields = vec![e.author_id.clone()];
    fields.extend(
        e.vector
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| format!("{i}:{v}")),
    );
    w.write_record(&fields).expect("writing to memory");
    let mut line =
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is UTF-8");
    if line.ends_with('\n') {
        line.pop();
    }
    line
}

pub fn write_sparse_csv(embeddings: &[AuthorEmbedding], path: &Path) -> Result<(), A2vError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for e in embeddings {
        writeln!(f, "{}", sparse_csv_line(e))?;
    }
    f.flush()?;
    Ok(())
}
