use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use super::{BaselineError, BaselineVector};

/// Pretrained word vectors in the plain text format: a `count dim` header
/// line, then one `token v1 … vdim` line per entry.
#[derive(Clone, Debug, PartialEq)]
pub struct WordVectorTable {
    dim: usize,
    index: HashMap<String, usize>,
    vectors: Vec<f32>,
}

impl WordVectorTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            index: HashMap::new(),
            vectors: Vec::new(),
        }
    }

    /// Later duplicates replace earlier entries.
    pub fn insert(&mut self, token: &str, vector: &[f32]) -> Result<(), BaselineError> {
        if vector.len() != self.dim {
            return Err(BaselineError::Shape(format!(
                "vector for {token:?} has width {}, table {}",
                vector.len(),
                self.dim
            )));
        }
        match self.index.get(token) {
            Some(&i) => self.vectors[i * self.dim..(i + 1) * self.dim].copy_from_slice(vector),
            None => {
                self.index.insert(token.to_string(), self.index.len());
                self.vectors.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self, BaselineError> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or(BaselineError::WordVectors {
            line: 1,
            message: "missing header".into(),
        })??;
        let mut parts = header.split_whitespace().map(str::parse::<usize>);
        let (Some(Ok(count)), Some(Ok(dim)), None) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(BaselineError::WordVectors {
                line: 1,
                message: "header must be `count dim`".into(),
            });
        };
        let mut table = Self::new(dim);
        let mut rows = 0;
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_ascii_whitespace();
            let token = fields.next().unwrap();
            let values: Result<Vec<f32>, _> = fields.map(str::parse::<f32>).collect();
            let values = values.map_err(|e| BaselineError::WordVectors {
                line: lineno,
                message: e.to_string(),
            })?;
            if values.len() != dim || values.iter().any(|v| !v.is_finite()) {
                return Err(BaselineError::WordVectors {
                    line: lineno,
                    message: format!("expected {dim} finite values, got {}", values.len()),
                });
            }
            table.insert(token, &values)?;
            rows += 1;
        }
        if rows != count {
            return Err(BaselineError::WordVectors {
                line: 1,
                message: format!("header announces {count} vectors, found {rows}"),
            });
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, BaselineError> {
        Self::parse(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn to_text(&self) -> String {
        let mut entries: Vec<(&String, &usize)> = self.index.iter().collect();
        entries.sort_by_key(|(_, &i)| i);
        let mut out = format!("{} {}\n", entries.len(), self.dim);
        for (token, &i) in entries {
            out.push_str(token);
            for v in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index
            .get(token)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }
}

/// Unweighted mean over every token occurrence found in the table.
pub fn wordvec_user_embedding(posts: &[Vec<String>], table: &WordVectorTable) -> BaselineVector {
    let mut acc = vec![0.0f64; table.dim()];
    let mut n = 0usize;
    for v in posts.iter().flatten().filter_map(|t| table.get(t)) {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += *x as f64;
        }
        n += 1;
    }
    if n > 0 {
        acc.iter_mut().for_each(|a| *a /= n as f64);
    }
    BaselineVector {
        values: acc,
        no_evidence: n == 0,
    }
}
