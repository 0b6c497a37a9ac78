//! Fixed train/test partitions for the authorship benchmark.

use rand::seq::index::sample;

use super::{AuthorRecord, CorpusError};
use crate::seeding::derive_rng;

#[derive(Clone, Debug, PartialEq)]
pub struct AuthorshipSplit {
    pub train: Vec<AuthorRecord>,
    pub test: Vec<AuthorRecord>,
}

/// Sorted indices of `k` posts out of `n`, drawn from a stream keyed by
/// `(seed, label)` so the choice for one author is independent of the rest.
pub fn holdout_indices(n: usize, k: usize, seed: u64, label: &str) -> Vec<usize> {
    let k = k.min(n);
    let mut idx = sample(&mut derive_rng(seed, label), n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Keeps authors with more than `min_valid_posts` posts and moves exactly
/// `test_posts_per_author` of each author's posts into the test partition.
/// Both partitions keep chronological order and share author order.
pub fn split_authorship_eval(
    corpus: &[AuthorRecord],
    min_valid_posts: usize,
    test_posts_per_author: usize,
    seed: u64,
) -> Result<AuthorshipSplit, CorpusError> {
    if test_posts_per_author == 0 || min_valid_posts <= test_posts_per_author {
        return Err(CorpusError::InvalidSplit(format!(
            "min_valid_posts ({min_valid_posts}) must exceed test_posts_per_author ({test_posts_per_author}) > 0"
        )));
    }
    let mut split = AuthorshipSplit {
        train: Vec::new(),
        test: Vec::new(),
    };
    for author in corpus.iter().filter(|a| a.posts.len() > min_valid_posts) {
        let test_idx = holdout_indices(
            author.posts.len(),
            test_posts_per_author,
            seed,
            &author.author_id,
        );
        let mut train = AuthorRecord::new(author.author_id.clone());
        let mut test = AuthorRecord::new(author.author_id.clone());
        train.labels = author.labels.clone();
        test.labels = author.labels.clone();
        let mut next = test_idx.iter().peekable();
        for (i, post) in author.posts.iter().enumerate() {
            if next.peek() == Some(&&i) {
                next.next();
                test.posts.push(post.clone());
            } else {
                train.posts.push(post.clone());
            }
        }
        split.train.push(train);
        split.test.push(test);
    }
    if split.train.is_empty() {
        return Err(CorpusError::NoQualifyingAuthors { min_valid_posts });
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Post;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn author(id: &str, n: usize) -> AuthorRecord {
        let mut a = AuthorRecord::new(id.to_string());
        a.posts = (0..n)
            .map(|i| Post {
                author_id: id.into(),
                created_at: i as i64,
                subreddit: "s".into(),
                text: format!("post {i}"),
            })
            .collect();
        a
    }

    #[test]
    fn eighty_one_posts() {
        let s = split_authorship_eval(&[author("a", 81), author("b", 80)], 80, 40, 7).unwrap();
        assert_eq!(s.train.len(), 1);
        assert_eq!(s.train[0].posts.len(), 41);
        assert_eq!(s.test[0].posts.len(), 40);
    }

    #[test]
    fn deterministic_and_author_local() {
        let corpus = vec![author("a", 100), author("b", 120)];
        let s1 = split_authorship_eval(&corpus, 80, 40, 3).unwrap();
        let s2 = split_authorship_eval(&corpus, 80, 40, 3).unwrap();
        assert_eq!(s1, s2);
        let s3 = split_authorship_eval(&corpus[1..], 80, 40, 3).unwrap();
        assert_eq!(s1.test[1], s3.test[0]);
        let s4 = split_authorship_eval(&corpus, 80, 40, 4).unwrap();
        assert_ne!(s1.test, s4.test);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            split_authorship_eval(&[author("a", 50)], 80, 40, 0),
            Err(CorpusError::NoQualifyingAuthors {
                min_valid_posts: 80
            })
        ));
        assert!(matches!(
            split_authorship_eval(&[author("a", 50)], 40, 40, 0),
            Err(CorpusError::InvalidSplit(_))
        ));
    }

    proptest! {
        #[test]
        fn partitions_are_disjoint_and_exact(n in 11usize..200, k in 1usize..10, seed in any::<u64>()) {
            let a = author("x", n);
            let s = split_authorship_eval(&[a.clone()], 10, k, seed).unwrap();
            let train: HashSet<_> = s.train[0].posts.iter().map(|p| p.created_at).collect();
            let test: HashSet<_> = s.test[0].posts.iter().map(|p| p.created_at).collect();
            prop_assert_eq!(test.len(), k);
            prop_assert!(train.is_disjoint(&test));
            prop_assert_eq!(train.len() + test.len(), n);
            prop_assert!(s.test[0].posts.windows(2).all(|w| w[0].created_at < w[1].created_at));
        }
    }
}
