use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, ErrorKind, Read, Seek, SeekFrom, Write};
use std::path::Path;

use super::{EmbedError, PostEmbeddingMatrix};

pub const EMBED_MAGIC: &[u8; 8] = b"AV1EMBED";
pub const EMBED_VERSION: u32 = 1;

const FIXED_HEADER: u64 = 8 + 4 + 4 + 8;
/// Smallest possible index entry: empty id, offset, rows.
const MIN_ENTRY: u64 = 2 + 8 + 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexEntry {
    pub author_id: String,
    pub offset: u64,
    pub rows: u32,
}

/// Index-driven reader: the header and index are parsed up front, each
/// author's block is fetched with a single seek.
pub struct EmbeddingReader<R> {
    inner: R,
    dim: usize,
    entries: Vec<IndexEntry>,
    lookup: HashMap<String, usize>,
    file_len: u64,
}

fn header_io(e: std::io::Error) -> EmbedError {
    if e.kind() == ErrorKind::UnexpectedEof {
        EmbedError::TruncatedHeader
    } else {
        EmbedError::Io(e)
    }
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], EmbedError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(header_io)?;
    Ok(buf)
}

impl EmbeddingReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self, EmbedError> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read + Seek> EmbeddingReader<R> {
    pub fn new(mut inner: R) -> Result<Self, EmbedError> {
        let file_len = inner.seek(SeekFrom::End(0))?;
        inner.seek(SeekFrom::Start(0))?;

        let mut magic = Vec::with_capacity(8);
        (&mut inner).take(8).read_to_end(&mut magic)?;
        if magic.as_slice() != &EMBED_MAGIC[..magic.len()] {
            return Err(EmbedError::BadMagic { found: magic });
        }
        if magic.len() < 8 {
            return Err(EmbedError::TruncatedHeader);
        }
        let version = u32::from_le_bytes(read_array(&mut inner)?);
        if version != EMBED_VERSION {
            return Err(EmbedError::UnsupportedVersion(version));
        }
        let dim = u32::from_le_bytes(read_array(&mut inner)?) as usize;
        let count = u64::from_le_bytes(read_array(&mut inner)?);
        if count > (file_len.saturating_sub(FIXED_HEADER)) / MIN_ENTRY {
            return Err(EmbedError::TruncatedHeader);
        }
        if dim == 0 && count > 0 {
            return Err(EmbedError::CorruptIndex("dim is zero".into()));
        }

        let mut entries = Vec::with_capacity(count as usize);
        let mut lookup = HashMap::with_capacity(count as usize);
        let mut index_end = FIXED_HEADER;
        for i in 0..count as usize {
            let len = u16::from_le_bytes(read_array(&mut inner)?) as usize;
            let mut id = vec![0u8; len];
            inner.read_exact(&mut id).map_err(header_io)?;
            let author_id = String::from_utf8(id).map_err(|_| {
                EmbedError::CorruptIndex(format!("entry {i}: author id is not UTF-8"))
            })?;
            let offset = u64::from_le_bytes(read_array(&mut inner)?);
            let rows = u32::from_le_bytes(read_array(&mut inner)?);
            if rows == 0 {
                return Err(EmbedError::CorruptIndex(format!(
                    "author {author_id:?} has zero rows"
                )));
            }
            if lookup.insert(author_id.clone(), i).is_some() {
                return Err(EmbedError::CorruptIndex(format!(
                    "author {author_id:?} listed twice"
                )));
            }
            index_end += 2 + len as u64 + 12;
            entries.push(IndexEntry {
                author_id,
                offset,
                rows,
            });
        }

        let mut cursor = index_end;
        for e in &entries {
            if e.offset < cursor {
                return Err(EmbedError::CorruptIndex(format!(
                    "block for {:?} at {} overlaps data ending at {}",
                    e.author_id, e.offset, cursor
                )));
            }
            cursor = block_bytes(e.rows, dim)
                .and_then(|n| e.offset.checked_add(n))
                .ok_or_else(|| {
                    EmbedError::CorruptIndex(format!("block for {:?} overflows", e.author_id))
                })?;
        }

        Ok(Self {
            inner,
            dim,
            entries,
            lookup,
            file_len,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn author_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.author_id.as_str())
    }

    pub fn read_author(&mut self, author_id: &str) -> Result<PostEmbeddingMatrix, EmbedError> {
        let i = *self
            .lookup
            .get(author_id)
            .ok_or_else(|| EmbedError::UnknownAuthor(author_id.to_string()))?;
        self.read_entry(i)
    }

    pub fn read_entry(&mut self, i: usize) -> Result<PostEmbeddingMatrix, EmbedError> {
        let e = &self.entries[i];
        // Overflow was ruled out while validating the index.
        let bytes = block_bytes(e.rows, self.dim).unwrap();
        if e.offset + bytes > self.file_len {
            return Err(EmbedError::Truncated {
                author: e.author_id.clone(),
            });
        }
        self.inner.seek(SeekFrom::Start(e.offset))?;
        let mut raw = vec![0u8; bytes as usize];
        self.inner
            .read_exact(&mut raw)
            .map_err(|err| match err.kind() {
                ErrorKind::UnexpectedEof => EmbedError::Truncated {
                    author: e.author_id.clone(),
                },
                _ => EmbedError::Io(err),
            })?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        PostEmbeddingMatrix::new(e.author_id.clone(), self.dim, values)
    }

    /// Every author, in file order.
    pub fn read_all(&mut self) -> Result<Vec<PostEmbeddingMatrix>, EmbedError> {
        (0..self.entries.len())
            .map(|i| self.read_entry(i))
            .collect()
    }
}

fn block_bytes(rows: u32, dim: usize) -> Option<u64> {
    (rows as u64).checked_mul(dim as u64)?.checked_mul(4)
}

fn validate(records: &[PostEmbeddingMatrix]) -> Result<usize, EmbedError> {
    let dim = records.first().map_or(0, PostEmbeddingMatrix::dim);
    let mut seen = HashSet::with_capacity(records.len());
    for r in records {
        if r.dim() != dim {
            return Err(EmbedError::MixedDims {
                author: r.author_id().to_string(),
                expected: dim,
                got: r.dim(),
            });
        }
        if !seen.insert(r.author_id()) {
            return Err(EmbedError::DuplicateAuthor(r.author_id().to_string()));
        }
        if r.author_id().len() > u16::MAX as usize {
            return Err(EmbedError::CorruptIndex(format!(
                "author id of {} bytes",
                r.author_id().len()
            )));
        }
        if r.rows() > u32::MAX as usize || dim > u32::MAX as usize {
            return Err(EmbedError::CorruptIndex(format!(
                "{:?} is too large",
                r.author_id()
            )));
        }
    }
    Ok(dim)
}

/// Serializes `records` in the given order. An empty list yields a valid
/// file with `dim = 0` and no authors.
pub fn write_to<W: Write>(records: &[PostEmbeddingMatrix], mut w: W) -> Result<(), EmbedError> {
    let dim = validate(records)?;
    let index_len: u64 = records
        .iter()
        .map(|r| 2 + r.author_id().len() as u64 + 12)
        .sum();
    w.write_all(EMBED_MAGIC)?;
    w.write_all(&EMBED_VERSION.to_le_bytes())?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    let mut offset = FIXED_HEADER + index_len;
    for r in records {
        w.write_all(&(r.author_id().len() as u16).to_le_bytes())?;
        w.write_all(r.author_id().as_bytes())?;
        w.write_all(&offset.to_le_bytes())?;
        w.write_all(&(r.rows() as u32).to_le_bytes())?;
        offset += r.values().len() as u64 * 4;
    }
    for r in records {
        for v in r.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn encode_embeddings(records: &[PostEmbeddingMatrix]) -> Result<Vec<u8>, EmbedError> {
    let mut out = Vec::new();
    write_to(records, &mut out)?;
    Ok(out)
}

pub fn write_embeddings(records: &[PostEmbeddingMatrix], path: &Path) -> Result<(), EmbedError> {
    validate(records)?;
    write_to(records, BufWriter::new(File::create(path)?))
}

/// Loads the requested authors (in request order), or every author in file
/// order when `authors` is `None`.
pub fn read_embeddings(
    path: &Path,
    authors: Option<&[String]>,
) -> Result<Vec<PostEmbeddingMatrix>, EmbedError> {
    let mut reader = EmbeddingReader::open(path)?;
    match authors {
        None => reader.read_all(),
        Some(ids) => ids.iter().map(|id| reader.read_author(id)).collect(),
    }
}

/// Parses a complete in-memory file.
pub fn decode_embeddings(bytes: &[u8]) -> Result<Vec<PostEmbeddingMatrix>, EmbedError> {
    EmbeddingReader::new(Cursor::new(bytes))?.read_all()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(id: &str, rows: usize, dim: usize, base: f32) -> PostEmbeddingMatrix {
        PostEmbeddingMatrix::new(
            id,
            dim,
            (0..rows * dim).map(|i| base + i as f32 * 0.25).collect(),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_three_authors() {
        let recs = vec![
            mat("alice", 3, 4, 0.0),
            mat("bob", 1, 4, -7.5),
            mat("carol", 5, 4, 1e-30),
        ];
        let bytes = encode_embeddings(&recs).unwrap();
        assert_eq!(decode_embeddings(&bytes).unwrap(), recs);
    }

    #[test]
    fn header_layout_is_fixed() {
        let bytes = encode_embeddings(&[mat("ab", 2, 3, 1.0)]).unwrap();
        assert_eq!(&bytes[..8], b"AV1EMBED");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 1);
        assert_eq!(u16::from_le_bytes(bytes[24..26].try_into().unwrap()), 2);
        assert_eq!(&bytes[26..28], b"ab");
        let offset = u64::from_le_bytes(bytes[28..36].try_into().unwrap());
        assert_eq!(offset, 40);
        assert_eq!(u32::from_le_bytes(bytes[36..40].try_into().unwrap()), 2);
        assert_eq!(bytes.len(), 40 + 2 * 3 * 4);
        assert_eq!(f32::from_le_bytes(bytes[40..44].try_into().unwrap()), 1.0);
    }

    #[test]
    fn empty_list_is_valid() {
        let bytes = encode_embeddings(&[]).unwrap();
        let r = EmbeddingReader::new(Cursor::new(&bytes)).unwrap();
        assert!(r.is_empty());
        assert!(decode_embeddings(&bytes).unwrap().is_empty());
    }

    #[test]
    fn writer_rejects_mixed_dims_and_duplicates() {
        assert!(matches!(
            encode_embeddings(&[mat("a", 1, 3072, 0.0), mat("b", 1, 500, 0.0)]),
            Err(EmbedError::MixedDims {
                expected: 3072,
                got: 500,
                ..
            })
        ));
        assert!(matches!(
            encode_embeddings(&[mat("a", 1, 2, 0.0), mat("a", 2, 2, 0.0)]),
            Err(EmbedError::DuplicateAuthor(_))
        ));
    }

    #[test]
    fn filtered_read_and_unknown_author() {
        let bytes = encode_embeddings(&[mat("A", 2, 2, 0.0), mat("B", 3, 2, 9.0)]).unwrap();
        let mut r = EmbeddingReader::new(Cursor::new(&bytes)).unwrap();
        assert_eq!(r.read_author("A").unwrap(), mat("A", 2, 2, 0.0));
        assert!(matches!(r.read_author("Z"), Err(EmbedError::UnknownAuthor(id)) if id == "Z"));
    }

    #[test]
    fn truncation_names_the_author() {
        let bytes = encode_embeddings(&[mat("A", 2, 2, 0.0), mat("B", 3, 2, 9.0)]).unwrap();
        let clipped = &bytes[..bytes.len() - 3];
        let mut r = EmbeddingReader::new(Cursor::new(clipped)).unwrap();
        assert!(r.read_author("A").is_ok());
        assert!(
            matches!(r.read_author("B"), Err(EmbedError::Truncated { author }) if author == "B")
        );
        assert!(matches!(
            decode_embeddings(&bytes[..30]),
            Err(EmbedError::TruncatedHeader)
        ));
    }

    #[test]
    fn corrupt_fixtures() {
        let good = encode_embeddings(&[mat("A", 2, 2, 0.0)]).unwrap();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode_embeddings(&bad),
            Err(EmbedError::BadMagic { .. })
        ));
        assert!(matches!(
            decode_embeddings(b"AV1"),
            Err(EmbedError::TruncatedHeader)
        ));
        assert!(matches!(
            decode_embeddings(b""),
            Err(EmbedError::TruncatedHeader)
        ));
        let mut bad = good.clone();
        bad[8] = 2;
        assert!(matches!(
            decode_embeddings(&bad),
            Err(EmbedError::UnsupportedVersion(2))
        ));
        // NaN in the payload.
        let mut bad = good.clone();
        let n = bad.len();
        bad[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            decode_embeddings(&bad),
            Err(EmbedError::NonFinite { row: 1, col: 1, .. })
        ));
        // Offset pointing back into the index.
        let mut bad = good.clone();
        bad[27..35].copy_from_slice(&10u64.to_le_bytes());
        assert!(matches!(
            decode_embeddings(&bad),
            Err(EmbedError::CorruptIndex(_))
        ));
        // Huge author count cannot trigger a huge allocation.
        let mut bad = good;
        bad[16..24].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(
            decode_embeddings(&bad),
            Err(EmbedError::TruncatedHeader)
        ));
    }

    proptest! {
        #[test]
        fn bit_exact_round_trip(bits in proptest::collection::vec(proptest::collection::vec(any::<u32>(), 1..12), 1..6), dim in 1usize..4) {
            let recs: Vec<PostEmbeddingMatrix> = bits.iter().enumerate().map(|(i, b)| {
                let mut vals: Vec<f32> = b.iter().map(|&x| {
                    let f = f32::from_bits(x);
                    if f.is_finite() { f } else { 0.5 }
                }).collect();
                vals.resize(vals.len().div_ceil(dim) * dim, 0.0);
                PostEmbeddingMatrix::new(format!("author-{i}"), dim, vals).unwrap()
            }).collect();
            let bytes = encode_embeddings(&recs).unwrap();
            let back = decode_embeddings(&bytes).unwrap();
            for (a, b) in recs.iter().zip(&back) {
                prop_assert_eq!(a.author_id(), b.author_id());
                let ab: Vec<u32> = a.values().iter().map(|v| v.to_bits()).collect();
                let bb: Vec<u32> = b.values().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(ab, bb);
            }
            // Index lookups agree with the sequential scan.
            let mut r = EmbeddingReader::new(Cursor::new(&bytes)).unwrap();
            for rec in back.iter().rev() {
                prop_assert_eq!(&r.read_author(rec.author_id()).unwrap(), rec);
            }
        }
    }
}
