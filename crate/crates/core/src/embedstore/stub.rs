//! Deterministic stand-in for a pretrained post encoder.
//!
//! A post vector is `0.6 · s(author) + 0.8 · c(tokens)`, renormalized, where
//! `s` is a unit Gaussian direction keyed by the author id and `c` is the
//! normalized sum of per-token Gaussian directions over the post's token
//! multiset. Same-author posts therefore share a component while the content
//! term still carries what the post is about.

use std::collections::HashMap;

use rand_distr::{Distribution, StandardNormal};

use super::{EmbedError, PostEmbeddingMatrix};
use crate::corpus::{basic_split, AuthorRecord, Post};
use crate::seeding::derive_rng;

const AUTHOR_WEIGHT: f64 = 0.6;
const CONTENT_WEIGHT: f64 = 0.8;

fn unit_gaussian(seed: u64, label: &str, dim: usize) -> Vec<f64> {
    let mut rng = derive_rng(seed, label);
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn token_label(token: &str) -> String {
    format!("stub-token\u{0}{token}")
}

fn author_label(author: &str) -> String {
    format!("stub-author\u{0}{author}")
}

fn combine(
    signature: &[f64],
    tokens: &[String],
    mut lookup: impl FnMut(&str) -> Vec<f64>,
) -> Vec<f32> {
    let dim = signature.len();
    let mut content = vec![0.0f64; dim];
    for t in tokens {
        for (c, v) in content.iter_mut().zip(lookup(t)) {
            *c += v;
        }
    }
    let cn = content.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut out: Vec<f64> = signature
        .iter()
        .zip(&content)
        .map(|(s, c)| {
            AUTHOR_WEIGHT * s
                + if cn > 0.0 {
                    CONTENT_WEIGHT * c / cn
                } else {
                    0.0
                }
        })
        .collect();
    let n = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    out.iter_mut().for_each(|x| *x /= n);
    out.into_iter().map(|x| x as f32).collect()
}

/// Sorted so the result depends on the multiset only.
fn sorted_tokens(text: &str) -> Vec<String> {
    let mut t = basic_split(text);
    t.sort_unstable();
    t
}

/// Pure function of `(post.text, post.author_id, seed, dim)`; unit L2 norm.
pub fn stub_embed(post: &Post, dim: usize, seed: u64) -> Vec<f32> {
    assert!(dim > 0, "stub embedding dim must be positive");
    let sig = unit_gaussian(seed, &author_label(&post.author_id), dim);
    combine(&sig, &sorted_tokens(&post.text), |t| {
        unit_gaussian(seed, &token_label(t), dim)
    })
}

/// [`stub_embed`] with memoized token and author directions.
pub struct StubEmbedder {
    dim: usize,
    seed: u64,
    tokens: HashMap<String, Vec<f64>>,
}

impl StubEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "stub embedding dim must be positive");
        Self {
            dim,
            seed,
            tokens: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn embed_with(&mut self, sig: &[f64], text: &str) -> Vec<f32> {
        let (dim, seed) = (self.dim, self.seed);
        let cache = &mut self.tokens;
        combine(sig, &sorted_tokens(text), |t| {
            cache
                .entry(t.to_string())
                .or_insert_with(|| unit_gaussian(seed, &token_label(t), dim))
                .clone()
        })
    }

    pub fn embed(&mut self, post: &Post) -> Vec<f32> {
        let sig = unit_gaussian(self.seed, &author_label(&post.author_id), self.dim);
        self.embed_with(&sig, &post.text)
    }

    /// One row per post, in the record's (chronological) order.
    pub fn embed_author(
        &mut self,
        author: &AuthorRecord,
    ) -> Result<PostEmbeddingMatrix, EmbedError> {
        let sig = unit_gaussian(self.seed, &author_label(&author.author_id), self.dim);
        let mut values = Vec::with_capacity(author.posts.len() * self.dim);
        for p in &author.posts {
            values.extend(self.embed_with(&sig, &p.text));
        }
        PostEmbeddingMatrix::new(author.author_id.clone(), self.dim, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn post(author: &str, text: &str) -> Post {
        Post {
            author_id: author.into(),
            created_at: 0,
            subreddit: "s".into(),
            text: text.into(),
        }
    }

    fn cos(a: &[f32], b: &[f32]) -> f64 {
        a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
    }

    #[test]
    fn deterministic_unit_norm_and_cached_equal() {
        let p = post("u1", "The cat sat on the mat.");
        let a = stub_embed(&p, 64, 9);
        assert_eq!(a, stub_embed(&p, 64, 9));
        let norm: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        let mut e = StubEmbedder::new(64, 9);
        assert_eq!(e.embed(&p), a);
        assert_eq!(e.embed(&p), a);
        assert_ne!(stub_embed(&p, 64, 10), a);
        // Token multiset, not order.
        assert_eq!(
            stub_embed(&post("u1", "mat the on sat cat the ."), 64, 9),
            a
        );
        // Empty text reduces to the author direction.
        let empty = stub_embed(&post("u1", ""), 64, 9);
        let n: f64 = empty
            .iter()
            .map(|x| (*x as f64).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((n - 1.0).abs() < 1e-6);
    }

    #[test]
    fn within_author_cosine_exceeds_between_author() {
        let words: Vec<String> = (0..400).map(|i| format!("w{i}")).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut e = StubEmbedder::new(128, 1);
        let mut text = || {
            (0..30)
                .map(|_| words[rng.random_range(0..words.len())].as_str())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut within = 0.0;
        let mut between = 0.0;
        for a in 0..100 {
            let id = format!("author{a}");
            let other = format!("author{}", (a + 1) % 100);
            let p1 = e.embed(&post(&id, &text()));
            let p2 = e.embed(&post(&id, &text()));
            let q = e.embed(&post(&other, &text()));
            within += cos(&p1, &p2);
            between += cos(&p1, &q);
        }
        assert!(
            within / 100.0 > between / 100.0 + 0.2,
            "{within} vs {between}"
        );
    }
}
