//! `AV1LSI__` / `AV1LDA__` single-file model containers.
//!
//! Both start with the 8-byte magic and a u32 version, followed by the
//! dictionary (u64 docs, u64 min_df, f64 max_df_frac, u64 terms, then per
//! term a u16-prefixed UTF-8 string and u64 df). All numbers little-endian.

use std::path::Path;

use super::{BaselineError, BowDictionary, LdaModel, LsiModel};
use crate::binio::{ByteReader, PutLe, Short};
use crate::linalg::Mat;

pub const LSI_MAGIC: &[u8; 8] = b"AV1LSI__";
pub const LDA_MAGIC: &[u8; 8] = b"AV1LDA__";
pub const MODEL_VERSION: u32 = 1;

impl From<Short> for BaselineError {
    fn from(s: Short) -> Self {
        BaselineError::ModelFile(format!(
            "truncated at byte {} (needed {} more)",
            s.at, s.needed
        ))
    }
}

fn put_dictionary(out: &mut Vec<u8>, d: &BowDictionary) {
    out.put_u64(d.n_docs());
    out.put_u64(d.min_df);
    out.put_f64(d.max_df_frac);
    out.put_u64(d.len() as u64);
    for (t, &df) in d.terms().iter().zip(d.df()) {
        out.put_str16(t);
        out.put_u64(df);
    }
}

fn get_dictionary(r: &mut ByteReader<'_>) -> Result<BowDictionary, BaselineError> {
    let n_docs = r.u64()?;
    let min_df = r.u64()?;
    let max_df_frac = r.f64()?;
    let count = r.u64()?;
    if count > r.remaining() as u64 / 10 {
        return Err(BaselineError::ModelFile(format!(
            "term count {count} exceeds file size"
        )));
    }
    let mut entries = Vec::with_capacity(count as usize);
    let mut prev: Option<String> = None;
    for _ in 0..count {
        let len = r.u16()? as usize;
        let term = std::str::from_utf8(r.take(len)?)
            .map_err(|_| BaselineError::ModelFile("term is not UTF-8".into()))?
            .to_string();
        let df = r.u64()?;
        if prev.as_ref().is_some_and(|p| *p >= term) {
            return Err(BaselineError::ModelFile("terms not strictly sorted".into()));
        }
        if df == 0 || df > n_docs {
            return Err(BaselineError::ModelFile(format!(
                "document frequency {df} out of range"
            )));
        }
        prev = Some(term.clone());
        entries.push((term, df));
    }
    Ok(BowDictionary::from_parts(
        entries,
        n_docs,
        min_df,
        max_df_frac,
    ))
}

fn header<'a>(bytes: &'a [u8], magic: &[u8; 8]) -> Result<ByteReader<'a>, BaselineError> {
    let mut r = ByteReader::new(bytes);
    let found = r.take(8)?;
    if found != magic {
        return Err(BaselineError::ModelFile(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(found),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(BaselineError::ModelFile(format!(
            "unsupported version {version}"
        )));
    }
    Ok(r)
}

fn finish(r: &ByteReader<'_>) -> Result<(), BaselineError> {
    if r.remaining() != 0 {
        return Err(BaselineError::ModelFile(format!(
            "{} trailing bytes",
            r.remaining()
        )));
    }
    Ok(())
}

fn finite(values: &[f64], what: &str) -> Result<(), BaselineError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(BaselineError::ModelFile(format!("non-finite {what}")));
    }
    Ok(())
}

impl LsiModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(LSI_MAGIC);
        out.put_u32(MODEL_VERSION);
        put_dictionary(&mut out, &self.dictionary);
        out.put_u32(self.rank() as u32);
        for &s in &self.singular_values {
            out.put_f64(s);
        }
        for &v in self.projection.as_slice() {
            out.put_f64(v);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BaselineError> {
        let mut r = header(bytes, LSI_MAGIC)?;
        let dictionary = get_dictionary(&mut r)?;
        let rank = r.u32()? as usize;
        let terms = dictionary.len();
        if rank == 0 || rank > terms {
            return Err(BaselineError::ModelFile(format!(
                "rank {rank} invalid for {terms} terms"
            )));
        }
        let singular_values = r.f64_vec(rank)?;
        let projection = r.f64_vec(terms * rank)?;
        finish(&r)?;
        finite(&singular_values, "singular value")?;
        finite(&projection, "projection entry")?;
        if singular_values.windows(2).any(|w| w[0] < w[1])
            || singular_values.iter().any(|&s| s < 0.0)
        {
            return Err(BaselineError::ModelFile(
                "singular values not descending and non-negative".into(),
            ));
        }
        Ok(Self {
            idf: dictionary.idf(),
            dictionary,
            projection: Mat::from_vec(terms, rank, projection),
            singular_values,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), BaselineError> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: &Path) -> Result<Self, BaselineError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

impl LdaModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(LDA_MAGIC);
        out.put_u32(MODEL_VERSION);
        put_dictionary(&mut out, &self.dictionary);
        out.put_u32(self.topics as u32);
        out.put_f64(self.alpha);
        out.put_f64(self.beta);
        out.put_u32(self.infer_sweeps as u32);
        out.put_u64(self.seed);
        for &c in &self.topic_word {
            out.put_f64(c);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BaselineError> {
        let mut r = header(bytes, LDA_MAGIC)?;
        let dictionary = get_dictionary(&mut r)?;
        let topics = r.u32()? as usize;
        let alpha = r.f64()?;
        let beta = r.f64()?;
        let infer_sweeps = r.u32()? as usize;
        let seed = r.u64()?;
        if topics == 0 || !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return Err(BaselineError::ModelFile("invalid hyperparameters".into()));
        }
        let cells = topics
            .checked_mul(dictionary.len())
            .ok_or_else(|| BaselineError::ModelFile("topic-word size overflows".into()))?;
        let topic_word = r.f64_vec(cells)?;
        finish(&r)?;
        if topic_word.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(BaselineError::ModelFile(
                "topic-word counts must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            dictionary,
            topics,
            alpha,
            beta,
            topic_word,
            infer_sweeps,
            seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), BaselineError> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: &Path) -> Result<Self, BaselineError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
