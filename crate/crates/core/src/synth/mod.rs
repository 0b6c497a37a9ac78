//! Synthetic Reddit-like corpora with a planted, order-dependent attribute.
//!
//! Each author has a handful of pet words, one "early" topic and one "late"
//! topic. Posts drift from the early topic to the late one over time. For
//! the planted label (`depressed`) the early topic comes from group A and the
//! late topic from group B; for the other class it is the reverse. Every
//! (A, B) topic pair is used equally often by both classes, so any
//! order-free summary of an author's words carries no information about the
//! label, while the post order does.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Zipf};
use serde::{Deserialize, Serialize};

use crate::baselines::WordVectorTable;
use crate::corpus::{all_mbti_types, AuthorRecord, Post, TokenizerVocab};
use crate::seeding::derive_rng;

pub const PLANTED_LABEL: &str = "depressed";
pub const UNK_TOKEN: &str = "[UNK]";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub authors: usize,
    pub posts_per_author: usize,
    /// Inclusive range of words per post.
    pub words_per_post: [usize; 2],
    pub filler_words: usize,
    /// Topics in each of the two groups.
    pub topics_per_group: usize,
    pub words_per_topic: usize,
    pub pet_pool: usize,
    pub pets_per_author: usize,
    /// Share of each post's words drawn from its topic.
    pub topic_share: f64,
    /// Share drawn from the author's pet words; the rest is filler.
    pub pet_share: f64,
    /// Probability that a post uses the topic of its half (early/late).
    pub drift_strength: f64,
    /// Fraction of authors labelled `male`.
    pub male_share: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            authors: 200,
            posts_per_author: 60,
            words_per_post: [20, 35],
            filler_words: 400,
            topics_per_group: 4,
            words_per_topic: 12,
            pet_pool: 600,
            pets_per_author: 3,
            topic_share: 0.6,
            pet_share: 0.2,
            drift_strength: 0.95,
            male_share: 0.85,
            seed: 0,
        }
    }
}

fn filler(i: usize) -> String {
    format!("f{i}")
}

fn topic_word(group: usize, topic: usize, j: usize) -> String {
    format!("t{}{topic}w{j}", ['a', 'b'][group])
}

fn pet(i: usize) -> String {
    format!("p{i}")
}

impl SynthConfig {
    /// Every word the generator can emit, plus the unknown token.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut words = vec![UNK_TOKEN.to_string()];
        words.extend((0..self.filler_words).map(filler));
        for g in 0..2 {
            for t in 0..self.topics_per_group {
                words.extend((0..self.words_per_topic).map(|j| topic_word(g, t, j)));
            }
        }
        words.extend((0..self.pet_pool).map(pet));
        words
    }

    pub fn tokenizer_vocab(&self) -> TokenizerVocab {
        TokenizerVocab::new(self.vocabulary(), UNK_TOKEN).expect("generated words are unique")
    }
}

/// Generates the corpus. Authors alternate between the two planted classes
/// and cycle through every topic pair, so classes and pairs stay balanced.
pub fn generate_corpus(config: &SynthConfig) -> Vec<AuthorRecord> {
    let pairs: Vec<(usize, usize)> = (0..config.topics_per_group)
        .flat_map(|a| (0..config.topics_per_group).map(move |b| (a, b)))
        .collect();
    let zipf = Zipf::new(config.filler_words as f64, 1.1).expect("valid zipf parameters");
    let types = all_mbti_types();
    let mut rng = derive_rng(config.seed, "synth:assignments");
    let mut slots: Vec<usize> = (0..config.authors).collect();
    slots.shuffle(&mut rng);

    (0..config.authors)
        .map(|i| {
            let id = format!("user{i:04}");
            let slot = slots[i];
            let positive = slot % 2 == 1;
            let (a, b) = pairs[(slot / 2) % pairs.len()];
            // Topic of the first and second half as (group, topic).
            let (early, late) = if positive {
                ((0, a), (1, b))
            } else {
                ((1, b), (0, a))
            };
            let mut rng = derive_rng(config.seed, &format!("synth:author:{id}"));
            let pets: Vec<String> = (0..config.pets_per_author)
                .map(|_| pet(rng.random_range(0..config.pet_pool)))
                .collect();
            let subreddits = ["AskReddit", "news", "gaming", "movies", "books"];
            let mut posts = Vec::with_capacity(config.posts_per_author);
            for t in 0..config.posts_per_author {
                let first_half = 2 * t < config.posts_per_author;
                let own = if first_half { early } else { late };
                let other = if first_half { late } else { early };
                let (g, topic) = if rng.random_bool(config.drift_strength) {
                    own
                } else {
                    other
                };
                let n = rng.random_range(config.words_per_post[0]..=config.words_per_post[1]);
                let words: Vec<String> = (0..n)
                    .map(|_| {
                        let r: f64 = rng.random();
                        if r < config.topic_share {
                            topic_word(g, topic, rng.random_range(0..config.words_per_topic))
                        } else if r < config.topic_share + config.pet_share {
                            pets.choose(&mut rng)
                                .expect("at least one pet word")
                                .clone()
                        } else {
                            filler(zipf.sample(&mut rng) as usize - 1)
                        }
                    })
                    .collect();
                posts.push(Post {
                    author_id: id.clone(),
                    created_at: 1_500_000_000 + (t as i64) * 86_400 + rng.random_range(0..3600),
                    subreddit: subreddits.choose(&mut rng).unwrap().to_string(),
                    text: words.join(" "),
                });
            }
            let mut labels = BTreeMap::new();
            labels.insert(
                PLANTED_LABEL.to_string(),
                if positive { "yes" } else { "no" }.to_string(),
            );
            let gender = if rng.random_bool(config.male_share) {
                "male"
            } else {
                "female"
            };
            labels.insert("gender".to_string(), gender.to_string());
            labels.insert("mbti".to_string(), types.choose(&mut rng).unwrap().clone());
            AuthorRecord {
                author_id: id,
                posts,
                labels,
            }
        })
        .collect()
}

/// Random unit-norm vectors for every generated word (the unknown token
/// excluded), standing in for a pretrained word-vector file.
pub fn synthetic_word_vectors(config: &SynthConfig, dim: usize) -> WordVectorTable {
    let mut table = WordVectorTable::new(dim);
    for w in config.vocabulary().iter().skip(1) {
        let mut rng = derive_rng(config.seed, &format!("synth:wordvec:{w}"));
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        let v: Vec<f32> = v.into_iter().map(|x| x as f32).collect();
        table.insert(w, &v).expect("fresh word with matching dim");
    }
    table
}
