use serde::{Deserialize, Serialize};

use super::dictionary::tfidf_vector;
use super::svd::{randomized_svd, SvdConfig};
use super::{BaselineError, BaselineVector, BowDictionary};
use crate::linalg::{CsrMatrix, Mat};
use crate::seeding::derive_rng;

#[derive(Clone, Debug, PartialEq)]
pub struct LsiModel {
    pub dictionary: BowDictionary,
    pub idf: Vec<f64>,
    /// terms × rank, orthonormal columns.
    pub projection: Mat<f64>,
    /// Descending, non-negative.
    pub singular_values: Vec<f64>,
}

/// How an author's posts become one LSI vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LsiMode {
    /// One TF-IDF vector over all posts joined into a single document.
    #[default]
    ConcatDoc,
    /// Mean of the per-post projections.
    MeanPost,
}

/// Truncated SVD of a TF-IDF document-term matrix.
pub fn fit_lsi(
    dictionary: BowDictionary,
    tfidf: &CsrMatrix,
    rank: usize,
    config: &SvdConfig,
    seed: u64,
) -> Result<LsiModel, BaselineError> {
    if tfidf.cols() != dictionary.len() {
        return Err(BaselineError::Shape(format!(
            "matrix has {} columns, dictionary {} terms",
            tfidf.cols(),
            dictionary.len()
        )));
    }
    let svd = randomized_svd(tfidf, rank, config, &mut derive_rng(seed, "lsi"))?;
    Ok(LsiModel {
        idf: dictionary.idf(),
        dictionary,
        projection: svd.v,
        singular_values: svd.s,
    })
}

impl LsiModel {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `xᵀ P` for a sparse TF-IDF row.
    pub fn project_sparse(&self, x: &[(usize, f64)]) -> Vec<f64> {
        let mut out = vec![0.0; self.rank()];
        for &(i, v) in x {
            for (o, p) in out.iter_mut().zip(self.projection.row(i)) {
                *o += v * p;
            }
        }
        out
    }

    pub fn project_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        self.project_sparse(&tfidf_vector(tokens, &self.dictionary))
    }
}

pub fn lsi_user_embedding(
    posts: &[Vec<String>],
    model: &LsiModel,
    mode: LsiMode,
) -> BaselineVector {
    match mode {
        LsiMode::ConcatDoc => {
            let all: Vec<&str> = posts.iter().flatten().map(String::as_str).collect();
            let x = tfidf_vector(&all, &model.dictionary);
            BaselineVector {
                no_evidence: x.is_empty(),
                values: model.project_sparse(&x),
            }
        }
        LsiMode::MeanPost => {
            let mut acc = vec![0.0; model.rank()];
            let mut evidence = false;
            for p in posts {
                let x = tfidf_vector(p, &model.dictionary);
                evidence |= !x.is_empty();
                for (a, v) in acc.iter_mut().zip(model.project_sparse(&x)) {
                    *a += v;
                }
            }
            if !posts.is_empty() {
                acc.iter_mut().for_each(|a| *a /= posts.len() as f64);
            }
            BaselineVector {
                values: acc,
                no_evidence: !evidence,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::build_dictionary;

    fn corpus() -> Vec<Vec<String>> {
        let texts = [
            "cat dog fish",
            "dog fish bird",
            "car bus train",
            "bus train plane",
            "cat bird",
            "car plane",
            "fish bird cat",
            "train car",
        ];
        texts
            .iter()
            .map(|t| t.split(' ').map(String::from).collect())
            .collect()
    }

    fn model() -> LsiModel {
        let docs = corpus();
        let dict = build_dictionary(&docs, 1, 1.0).unwrap();
        let m = dict.tfidf_matrix(&docs);
        fit_lsi(dict, &m, 3, &SvdConfig::default(), 5).unwrap()
    }

    #[test]
    fn projection_orthonormal_and_sorted() {
        let m = model();
        let ptp = m.projection.transpose().matmul(&m.projection);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((ptp.get(i, j) - e).abs() < 1e-5);
            }
        }
        assert!(m.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert!(m.singular_values.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn modes() {
        let m = model();
        let one = vec![corpus()[0].clone()];
        let a = lsi_user_embedding(&one, &m, LsiMode::ConcatDoc);
        let b = lsi_user_embedding(&one, &m, LsiMode::MeanPost);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
        // Duplicated post: same direction, twice the magnitude before idf.
        let two = vec![corpus()[0].clone(), corpus()[0].clone()];
        let c = lsi_user_embedding(&two, &m, LsiMode::ConcatDoc);
        for (x, y) in a.values.iter().zip(&c.values) {
            assert!((2.0 * x - y).abs() < 1e-12);
        }
        let empty = lsi_user_embedding(&[], &m, LsiMode::ConcatDoc);
        assert!(empty.no_evidence && empty.values.iter().all(|&v| v == 0.0));
        let empty = lsi_user_embedding(&[vec!["zzz".into()]], &m, LsiMode::MeanPost);
        assert!(empty.no_evidence && empty.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic() {
        assert_eq!(model(), model());
    }
}
