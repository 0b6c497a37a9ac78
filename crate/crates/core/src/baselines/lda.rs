//! Latent Dirichlet allocation by collapsed Gibbs sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BaselineError, BaselineVector, BowDictionary};
use crate::linalg::CsrMatrix;
use crate::seeding::derive_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub topics: usize,
    /// Document-topic prior; `None` means `50 / topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    /// Gibbs sweeps when folding in an unseen document.
    pub infer_sweeps: usize,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            topics: 50,
            alpha: None,
            beta: 0.01,
            iterations: 500,
            infer_sweeps: 50,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }

    fn validate(&self) -> Result<(), BaselineError> {
        let alpha = self.alpha();
        if self.topics == 0 || self.iterations == 0 || !(alpha > 0.0) || !(self.beta > 0.0) {
            return Err(BaselineError::InvalidConfig(format!(
                "lda needs topics ≥ 1, iterations ≥ 1, alpha > 0, beta > 0 (got {}, {}, {alpha}, {})",
                self.topics, self.iterations, self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdaModel {
    pub dictionary: BowDictionary,
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    /// topics × terms assignment counts.
    pub topic_word: Vec<f64>,
    pub infer_sweeps: usize,
    pub seed: u64,
}

/// Draws an index from unnormalized cumulative weights.
fn draw(cumulative: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u = rng.random::<f64>() * cumulative[cumulative.len() - 1];
    cumulative
        .partition_point(|&c| c <= u)
        .min(cumulative.len() - 1)
}

/// Sampler state; exposed so callers can observe per-sweep invariants.
pub struct LdaSampler {
    docs: Vec<Vec<u32>>,
    z: Vec<Vec<u32>>,
    n_dk: Vec<u32>,
    n_kw: Vec<u32>,
    n_k: Vec<u32>,
    topics: usize,
    terms: usize,
    alpha: f64,
    beta: f64,
    rng: ChaCha8Rng,
    scratch: Vec<f64>,
}

impl LdaSampler {
    /// `counts` holds raw term counts (rounded to integers).
    pub fn new(counts: &CsrMatrix, config: &LdaConfig, seed: u64) -> Result<Self, BaselineError> {
        config.validate()?;
        let docs: Vec<Vec<u32>> = (0..counts.rows())
            .map(|d| {
                counts
                    .row(d)
                    .flat_map(|(w, c)| std::iter::repeat_n(w as u32, c.round().max(0.0) as usize))
                    .collect()
            })
            .collect();
        if docs.iter().all(Vec::is_empty) {
            return Err(BaselineError::EmptyInput("no tokens to model"));
        }
        let (k, v) = (config.topics, counts.cols());
        let mut s = Self {
            z: docs.iter().map(|d| vec![0; d.len()]).collect(),
            n_dk: vec![0; docs.len() * k],
            n_kw: vec![0; k * v],
            n_k: vec![0; k],
            docs,
            topics: k,
            terms: v,
            alpha: config.alpha(),
            beta: config.beta,
            rng: derive_rng(seed, "lda"),
            scratch: vec![0.0; k],
        };
        for d in 0..s.docs.len() {
            for i in 0..s.docs[d].len() {
                let t = s.rng.random_range(0..k);
                s.z[d][i] = t as u32;
                s.add(d, s.docs[d][i] as usize, t, 1);
            }
        }
        Ok(s)
    }

    fn add(&mut self, d: usize, w: usize, t: usize, delta: i32) {
        let k = self.topics;
        let upd = |x: &mut u32| *x = x.wrapping_add_signed(delta);
        upd(&mut self.n_dk[d * k + t]);
        upd(&mut self.n_kw[t * self.terms + w]);
        upd(&mut self.n_k[t]);
    }

    pub fn sweep(&mut self) {
        let (k, vb) = (self.topics, self.terms as f64 * self.beta);
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i] as usize;
                let old = self.z[d][i] as usize;
                self.add(d, w, old, -1);
                let mut acc = 0.0;
                for t in 0..k {
                    acc += (self.n_dk[d * k + t] as f64 + self.alpha)
                        * (self.n_kw[t * self.terms + w] as f64 + self.beta)
                        / (self.n_k[t] as f64 + vb);
                    self.scratch[t] = acc;
                }
                let new = draw(&self.scratch, &mut self.rng);
                self.z[d][i] = new as u32;
                self.add(d, w, new, 1);
            }
        }
    }

    pub fn token_count(&self) -> u64 {
        self.docs.iter().map(|d| d.len() as u64).sum()
    }

    pub fn topic_word_total(&self) -> u64 {
        self.n_kw.iter().map(|&c| c as u64).sum()
    }

    pub fn assignments(&self) -> &[Vec<u32>] {
        &self.z
    }

    /// Smoothed topic proportions of training document `d`.
    pub fn doc_topic(&self, d: usize) -> Vec<f64> {
        let k = self.topics;
        let n = self.docs[d].len() as f64;
        (0..k)
            .map(|t| (self.n_dk[d * k + t] as f64 + self.alpha) / (n + k as f64 * self.alpha))
            .collect()
    }

    pub fn into_model(self, dictionary: BowDictionary, infer_sweeps: usize, seed: u64) -> LdaModel {
        LdaModel {
            dictionary,
            topics: self.topics,
            alpha: self.alpha,
            beta: self.beta,
            topic_word: self.n_kw.iter().map(|&c| c as f64).collect(),
            infer_sweeps,
            seed,
        }
    }
}

pub fn fit_lda(
    dictionary: BowDictionary,
    counts: &CsrMatrix,
    config: &LdaConfig,
    seed: u64,
) -> Result<LdaModel, BaselineError> {
    if counts.cols() != dictionary.len() {
        return Err(BaselineError::Shape(format!(
            "matrix has {} columns, dictionary {} terms",
            counts.cols(),
            dictionary.len()
        )));
    }
    let mut sampler = LdaSampler::new(counts, config, seed)?;
    for _ in 0..config.iterations {
        sampler.sweep();
    }
    Ok(sampler.into_model(dictionary, config.infer_sweeps, seed))
}

impl LdaModel {
    pub fn terms(&self) -> usize {
        self.dictionary.len()
    }

    fn topic_totals(&self) -> Vec<f64> {
        self.topic_word
            .chunks_exact(self.terms())
            .map(|r| r.iter().sum())
            .collect()
    }

    /// `φ[k][w] = (n_kw + β) / (n_k + Vβ)`, each row summing to one.
    pub fn topic_word_distribution(&self) -> Vec<Vec<f64>> {
        let v = self.terms();
        self.topic_word
            .chunks_exact(v)
            .zip(self.topic_totals())
            .map(|(row, total)| {
                row.iter()
                    .map(|c| (c + self.beta) / (total + v as f64 * self.beta))
                    .collect()
            })
            .collect()
    }

    /// Fold-in with the topic-word counts held fixed.
    pub fn infer(&self, term_ids: &[usize]) -> Vec<f64> {
        let k = self.topics;
        let phi = self.topic_word_distribution();
        let mut rng = derive_rng(self.seed, "lda-infer");
        let mut n_dk = vec![0u32; k];
        let mut z: Vec<usize> = term_ids
            .iter()
            .map(|_| {
                let t = rng.random_range(0..k);
                n_dk[t] += 1;
                t
            })
            .collect();
        let mut cumulative = vec![0.0; k];
        for _ in 0..self.infer_sweeps {
            for (i, &w) in term_ids.iter().enumerate() {
                n_dk[z[i]] -= 1;
                let mut acc = 0.0;
                for t in 0..k {
                    acc += (n_dk[t] as f64 + self.alpha) * phi[t][w];
                    cumulative[t] = acc;
                }
                z[i] = draw(&cumulative, &mut rng);
                n_dk[z[i]] += 1;
            }
        }
        let denom = term_ids.len() as f64 + k as f64 * self.alpha;
        n_dk.iter()
            .map(|&c| (c as f64 + self.alpha) / denom)
            .collect()
    }
}

/// Topic proportions of the author's posts joined into one document.
/// No in-dictionary tokens gives the uniform distribution.
pub fn lda_user_embedding(posts: &[Vec<String>], model: &LdaModel) -> BaselineVector {
    let ids: Vec<usize> = posts
        .iter()
        .flatten()
        .filter_map(|t| model.dictionary.id(t))
        .collect();
    if ids.is_empty() {
        return BaselineVector {
            values: vec![1.0 / model.topics as f64; model.topics],
            no_evidence: true,
        };
    }
    BaselineVector {
        values: model.infer(&ids),
        no_evidence: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::build_dictionary;
    use rand::SeedableRng;

    /// Documents drawn from one of two topics with disjoint vocabularies.
    fn two_topic_corpus(seed: u64) -> Vec<Vec<String>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..60)
            .map(|d| {
                let prefix = if d % 2 == 0 { "a" } else { "b" };
                (0..40)
                    .map(|_| format!("{prefix}{}", rng.random_range(0..10)))
                    .collect()
            })
            .collect()
    }

    fn config(topics: usize) -> LdaConfig {
        LdaConfig {
            topics,
            alpha: Some(0.1),
            iterations: 100,
            ..LdaConfig::default()
        }
    }

    #[test]
    fn recovers_disjoint_vocabularies() {
        let docs = two_topic_corpus(1);
        let dict = build_dictionary(&docs, 1, 1.0).unwrap();
        let counts = dict.count_matrix(&docs);
        let model = fit_lda(dict.clone(), &counts, &config(2), 3).unwrap();
        let phi = model.topic_word_distribution();
        let a_cols: Vec<usize> = (0..10)
            .map(|i| dict.id(&format!("a{i}")).unwrap())
            .collect();
        let a_mass: Vec<f64> = phi
            .iter()
            .map(|row| a_cols.iter().map(|&c| row[c]).sum())
            .collect();
        let (ta, tb) = if a_mass[0] > a_mass[1] {
            (0, 1)
        } else {
            (1, 0)
        };
        assert!(a_mass[ta] >= 0.9, "{a_mass:?}");
        assert!(1.0 - a_mass[tb] >= 0.9, "{a_mass:?}");
        for row in &phi {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let only_a: Vec<String> = (0..30).map(|i| format!("a{}", i % 10)).collect();
        let theta = lda_user_embedding(&[only_a], &model).values;
        assert!(theta[ta] >= 0.9, "{theta:?}");
    }

    #[test]
    fn single_topic_is_point_mass() {
        let docs = two_topic_corpus(2);
        let dict = build_dictionary(&docs, 1, 1.0).unwrap();
        let counts = dict.count_matrix(&docs);
        let model = fit_lda(dict, &counts, &config(1), 0).unwrap();
        let theta = lda_user_embedding(&docs[..2], &model).values;
        assert_eq!(theta, vec![1.0]);
    }

    #[test]
    fn conserves_tokens_and_is_deterministic() {
        let docs = two_topic_corpus(3);
        let dict = build_dictionary(&docs, 1, 1.0).unwrap();
        let counts = dict.count_matrix(&docs);
        let mut a = LdaSampler::new(&counts, &config(4), 9).unwrap();
        let mut b = LdaSampler::new(&counts, &config(4), 9).unwrap();
        for _ in 0..10 {
            a.sweep();
            b.sweep();
            assert_eq!(a.topic_word_total(), a.token_count());
            assert_eq!(a.token_count(), 60 * 40);
        }
        assert_eq!(a.assignments(), b.assignments());
        let p = a.doc_topic(0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_inputs() {
        let docs = two_topic_corpus(4);
        let dict = build_dictionary(&docs, 1, 1.0).unwrap();
        let empty = CsrMatrix::from_rows(dict.len(), &[vec![], vec![]]);
        assert!(matches!(
            fit_lda(dict.clone(), &empty, &config(2), 0),
            Err(BaselineError::EmptyInput(_))
        ));
        assert!(fit_lda(dict.clone(), &dict.count_matrix(&docs), &config(0), 0).is_err());
        let model = fit_lda(dict.clone(), &dict.count_matrix(&docs), &config(4), 0).unwrap();
        let e = lda_user_embedding(&[], &model);
        assert!(e.no_evidence);
        assert_eq!(e.values, vec![0.25; 4]);
        let theta = lda_user_embedding(&docs[5..7], &model).values;
        assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(theta.iter().all(|&p| p > 0.0));
    }
}
