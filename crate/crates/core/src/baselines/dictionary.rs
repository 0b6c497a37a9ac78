use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::linalg::CsrMatrix;

/// Document-frequency filtered vocabulary with lexicographic column ids.
#[derive(Clone, Debug, PartialEq)]
pub struct BowDictionary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    df: Vec<u64>,
    n_docs: u64,
    pub min_df: u64,
    pub max_df_frac: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DictionaryConfig {
    pub min_df: u64,
    pub max_df_frac: f64,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        Self {
            min_df: 10,
            max_df_frac: 0.30,
        }
    }
}

/// Keeps tokens with `min_df ≤ df` and `df / N ≤ max_df_frac`.
pub fn build_dictionary(
    posts: &[Vec<String>],
    min_df: u64,
    max_df_frac: f64,
) -> Result<BowDictionary, BaselineError> {
    if posts.is_empty() {
        return Err(BaselineError::EmptyInput("no documents"));
    }
    let mut df: BTreeMap<&str, u64> = BTreeMap::new();
    for post in posts {
        let mut seen: Vec<&str> = post.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    let n = posts.len() as u64;
    let kept: Vec<(String, u64)> = df
        .into_iter()
        .filter(|&(_, d)| d >= min_df && d as f64 / n as f64 <= max_df_frac)
        .map(|(t, d)| (t.to_string(), d))
        .collect();
    if kept.is_empty() {
        return Err(BaselineError::EmptyDictionary);
    }
    Ok(BowDictionary::from_parts(kept, n, min_df, max_df_frac))
}

impl BowDictionary {
    pub(crate) fn from_parts(
        entries: Vec<(String, u64)>,
        n_docs: u64,
        min_df: u64,
        max_df_frac: f64,
    ) -> Self {
        let (terms, df): (Vec<String>, Vec<u64>) = entries.into_iter().unzip();
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            terms,
            index,
            df,
            n_docs,
            min_df,
            max_df_frac,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn df(&self) -> &[u64] {
        &self.df
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    /// `ln(N / df)` per column.
    pub fn idf(&self) -> Vec<f64> {
        self.df
            .iter()
            .map(|&d| (self.n_docs as f64 / d as f64).ln())
            .collect()
    }

    /// Raw in-dictionary term counts, sorted by column.
    pub fn counts<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<(usize, f64)> {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(id) = self.id(t.as_ref()) {
                *acc.entry(id).or_default() += 1.0;
            }
        }
        acc.into_iter().collect()
    }

    /// Document-term count matrix.
    pub fn count_matrix(&self, docs: &[Vec<String>]) -> CsrMatrix {
        let rows: Vec<_> = docs.iter().map(|d| self.counts(d)).collect();
        CsrMatrix::from_rows(self.len(), &rows)
    }

    pub fn tfidf_matrix(&self, docs: &[Vec<String>]) -> CsrMatrix {
        let idf = self.idf();
        let rows: Vec<_> = docs.iter().map(|d| weight(self.counts(d), &idf)).collect();
        CsrMatrix::from_rows(self.len(), &rows)
    }
}

fn weight(counts: Vec<(usize, f64)>, idf: &[f64]) -> Vec<(usize, f64)> {
    counts.into_iter().map(|(i, c)| (i, c * idf[i])).collect()
}

/// Raw term frequency times `ln(N / df)`; unknown tokens are ignored.
pub fn tfidf_vector<S: AsRef<str>>(post: &[S], dict: &BowDictionary) -> Vec<(usize, f64)> {
    let idf = dict.idf();
    weight(dict.counts(post), &idf)
}
