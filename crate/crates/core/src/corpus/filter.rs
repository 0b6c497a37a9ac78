//! Post- and author-level filtering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tokenizer::tokenize;
use super::{AuthorRecord, CorpusError, Post, TokenizerVocab};

/// Content rules for "non-textual or meaningless" posts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum JunkRule {
    /// Longest run of one repeated character exceeds this fraction of the
    /// post's length.
    Repetition { max_run_ratio: f64 },
    /// Every whitespace-separated word is a link.
    UrlOnly,
}

/// How `min_posts_per_author` is compared.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthorThreshold {
    /// Keep authors with strictly more than the minimum.
    #[default]
    MoreThan,
    /// Keep authors with at least the minimum.
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterPolicy {
    pub min_tokens_per_post: usize,
    pub min_posts_per_author: usize,
    pub author_threshold: AuthorThreshold,
    pub max_posts_per_author: usize,
    pub junk_rules: Vec<JunkRule>,
    /// Posts containing any of these (case-insensitive substring) are dropped.
    pub exclude_keywords: Vec<String>,
    /// Posts in these subreddits (case-insensitive) are dropped.
    pub exclude_subreddits: Vec<String>,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self::pretraining()
    }
}

impl FilterPolicy {
    /// ≥ 20 tokens per post, authors with more than 20 posts, newest 500 kept.
    pub fn pretraining() -> Self {
        Self {
            min_tokens_per_post: 20,
            min_posts_per_author: 20,
            author_threshold: AuthorThreshold::MoreThan,
            max_posts_per_author: 500,
            junk_rules: vec![
                JunkRule::Repetition { max_run_ratio: 0.5 },
                JunkRule::UrlOnly,
            ],
            exclude_keywords: Vec::new(),
            exclude_subreddits: Vec::new(),
        }
    }

    /// MBTI evaluation set: authors with fewer than 10 posts are dropped.
    pub fn mbti() -> Self {
        Self {
            min_posts_per_author: 10,
            author_threshold: AuthorThreshold::AtLeast,
            ..Self::pretraining()
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.min_posts_per_author < 1 {
            return Err(CorpusError::InvalidPolicy(
                "min_posts_per_author must be at least 1".into(),
            ));
        }
        if self.max_posts_per_author < self.min_posts_per_author {
            return Err(CorpusError::InvalidPolicy(
                "max_posts_per_author must not be below min_posts_per_author".into(),
            ));
        }
        for rule in &self.junk_rules {
            if let JunkRule::Repetition { max_run_ratio } = rule {
                if !(0.0..=1.0).contains(max_run_ratio) {
                    return Err(CorpusError::InvalidPolicy(
                        "max_run_ratio must lie in [0, 1]".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn keeps_author(&self, posts: usize) -> bool {
        match self.author_threshold {
            AuthorThreshold::MoreThan => posts > self.min_posts_per_author,
            AuthorThreshold::AtLeast => posts >= self.min_posts_per_author,
        }
    }
}

/// Drop counters keyed by reason.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub dropped_posts: BTreeMap<String, usize>,
    pub dropped_authors: usize,
}

impl FilterStats {
    fn bump(&mut self, reason: &str) {
        *self.dropped_posts.entry(reason.to_string()).or_default() += 1;
    }

    pub fn merge(&mut self, other: &FilterStats) {
        for (k, v) in &other.dropped_posts {
            *self.dropped_posts.entry(k.clone()).or_default() += v;
        }
        self.dropped_authors += other.dropped_authors;
    }
}

fn max_run_ratio(text: &str) -> f64 {
    let mut total = 0usize;
    let mut best = 0usize;
    let mut run = 0usize;
    let mut prev = None;
    for c in text.trim().chars() {
        total += 1;
        run = if Some(c) == prev { run + 1 } else { 1 };
        best = best.max(run);
        prev = Some(c);
    }
    if total == 0 {
        0.0
    } else {
        best as f64 / total as f64
    }
}

fn is_url(word: &str) -> bool {
    let w = word
        .trim_matches(|c: char| matches!(c, '<' | '>' | '(' | ')' | '[' | ']' | '"' | '\''))
        .to_ascii_lowercase();
    w.starts_with("http://") || w.starts_with("https://") || w.starts_with("www.")
}

fn url_only(text: &str) -> bool {
    let mut words = text.split_whitespace().peekable();
    words.peek().is_some() && words.all(is_url)
}

fn drop_reason(post: &Post, vocab: &TokenizerVocab, policy: &FilterPolicy) -> Option<&'static str> {
    for rule in &policy.junk_rules {
        match rule {
            JunkRule::UrlOnly if url_only(&post.text) => return Some("url_only"),
            JunkRule::Repetition {
                max_run_ratio: limit,
            } if max_run_ratio(&post.text) > *limit => return Some("repetitive"),
            _ => {}
        }
    }
    if policy
        .exclude_subreddits
        .iter()
        .any(|s| s.eq_ignore_ascii_case(&post.subreddit))
    {
        return Some("excluded_subreddit");
    }
    if !policy.exclude_keywords.is_empty() {
        let lower = post.text.to_lowercase();
        if policy
            .exclude_keywords
            .iter()
            .any(|k| lower.contains(&k.to_lowercase()))
        {
            return Some("excluded_keyword");
        }
    }
    if tokenize(&post.text, vocab).len() < policy.min_tokens_per_post {
        return Some("too_few_tokens");
    }
    None
}

/// Removes junk and short posts, then keeps the newest
/// `max_posts_per_author`. Idempotent.
pub fn filter_posts(
    author: &AuthorRecord,
    vocab: &TokenizerVocab,
    policy: &FilterPolicy,
) -> AuthorRecord {
    filter_posts_with_stats(author, vocab, policy, &mut FilterStats::default())
}

pub fn filter_posts_with_stats(
    author: &AuthorRecord,
    vocab: &TokenizerVocab,
    policy: &FilterPolicy,
    stats: &mut FilterStats,
) -> AuthorRecord {
    let mut kept: Vec<Post> = Vec::with_capacity(author.posts.len());
    for post in &author.posts {
        match drop_reason(post, vocab, policy) {
            Some(reason) => stats.bump(reason),
            None => kept.push(post.clone()),
        }
    }
    if kept.len() > policy.max_posts_per_author {
        let excess = kept.len() - policy.max_posts_per_author;
        for _ in 0..excess {
            stats.bump("over_cap");
        }
        kept.drain(..excess);
    }
    AuthorRecord {
        author_id: author.author_id.clone(),
        posts: kept,
        labels: author.labels.clone(),
    }
}

/// Drops authors whose post count fails the policy threshold.
pub fn filter_authors(corpus: Vec<AuthorRecord>, policy: &FilterPolicy) -> Vec<AuthorRecord> {
    corpus
        .into_iter()
        .filter(|a| policy.keeps_author(a.posts.len()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> TokenizerVocab {
        let mut t: Vec<String> = vec!["[UNK]".into()];
        t.extend("abcdefghijklmnopqrstuvwxyz".chars().map(|c| c.to_string()));
        t.extend(
            "abcdefghijklmnopqrstuvwxyz"
                .chars()
                .map(|c| format!("##{c}")),
        );
        t.extend([".", ":", "/"].map(String::from));
        TokenizerVocab::new(t, "[UNK]").unwrap()
    }

    fn post(t: i64, text: &str) -> Post {
        Post {
            author_id: "a".into(),
            created_at: t,
            subreddit: "test".into(),
            text: text.into(),
        }
    }

    fn words(n: usize) -> String {
        (0..n)
            .map(|i| format!("w{}", (b'a' + (i % 26) as u8) as char))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn author(posts: Vec<Post>) -> AuthorRecord {
        AuthorRecord {
            author_id: "a".into(),
            posts,
            labels: Default::default(),
        }
    }

    #[test]
    fn short_post_removed() {
        let a = author(vec![post(1, "one two three four five")]);
        assert!(filter_posts(&a, &vocab(), &FilterPolicy::pretraining())
            .posts
            .is_empty());
    }

    #[test]
    fn cap_keeps_most_recent() {
        let a = author((0..600).map(|i| post(i, &words(25))).collect());
        let out = filter_posts(&a, &vocab(), &FilterPolicy::pretraining());
        assert_eq!(out.posts.len(), 500);
        assert_eq!(out.posts[0].created_at, 100);
        assert_eq!(out.posts[499].created_at, 599);
    }

    #[test]
    fn repetition_rule() {
        let policy = FilterPolicy {
            min_tokens_per_post: 0,
            ..FilterPolicy::pretraining()
        };
        let a = author(vec![
            post(1, "aaaaaaaaaaaaaaaaaaaaaaaa"),
            post(2, "a normal sentence"),
        ]);
        let mut stats = FilterStats::default();
        let out = filter_posts_with_stats(&a, &vocab(), &policy, &mut stats);
        assert_eq!(out.posts.len(), 1);
        assert_eq!(stats.dropped_posts["repetitive"], 1);
    }

    #[test]
    fn url_only_rule() {
        let policy = FilterPolicy {
            min_tokens_per_post: 0,
            ..FilterPolicy::pretraining()
        };
        let a = author(vec![
            post(1, "https://i.imgur.com/abc.jpg"),
            post(2, "(https://v.redd.it/x) www.example.com"),
            post(3, "look https://example.com"),
        ]);
        let out = filter_posts(&a, &vocab(), &policy);
        assert_eq!(
            out.posts.iter().map(|p| p.created_at).collect::<Vec<_>>(),
            vec![3]
        );
    }

    #[test]
    fn exclusion_lists() {
        let policy = FilterPolicy {
            min_tokens_per_post: 0,
            exclude_keywords: vec!["Depressed".into()],
            exclude_subreddits: vec!["AskDoc".into()],
            ..FilterPolicy::pretraining()
        };
        let mut p = post(3, "fine");
        p.subreddit = "askdoc".into();
        let a = author(vec![post(1, "I feel depressed today"), post(2, "fine"), p]);
        let mut stats = FilterStats::default();
        let out = filter_posts_with_stats(&a, &vocab(), &policy, &mut stats);
        assert_eq!(out.posts.len(), 1);
        assert_eq!(stats.dropped_posts["excluded_keyword"], 1);
        assert_eq!(stats.dropped_posts["excluded_subreddit"], 1);
    }

    #[test]
    fn filtering_is_idempotent() {
        let mut posts: Vec<Post> = (0..30)
            .map(|i| post(i, &words(15 + (i as usize % 10))))
            .collect();
        posts.push(post(40, "zzzzzzzzzzzzzzzzzzzzzzzzzzzzzzzzzzzzzzzz z"));
        let policy = FilterPolicy {
            max_posts_per_author: 12,
            ..FilterPolicy::pretraining()
        };
        let once = filter_posts(&author(posts), &vocab(), &policy);
        let twice = filter_posts(&once, &vocab(), &policy);
        assert_eq!(once, twice);
    }

    #[test]
    fn author_thresholds() {
        let with = |n: usize| author((0..n as i64).map(|i| post(i, "x")).collect());
        let policy = FilterPolicy::pretraining();
        assert!(filter_authors(vec![with(19)], &policy).is_empty());
        assert!(filter_authors(vec![with(20)], &policy).is_empty());
        assert_eq!(filter_authors(vec![with(21)], &policy).len(), 1);
        assert!(filter_authors(vec![], &policy).is_empty());
        let mbti = FilterPolicy::mbti();
        assert!(filter_authors(vec![with(9)], &mbti).is_empty());
        assert_eq!(filter_authors(vec![with(10)], &mbti).len(), 1);
    }

    #[test]
    fn policy_validation() {
        assert!(FilterPolicy::pretraining().validate().is_ok());
        let bad = FilterPolicy {
            max_posts_per_author: 5,
            ..FilterPolicy::pretraining()
        };
        assert!(bad.validate().is_err());
        let bad = FilterPolicy {
            min_posts_per_author: 0,
            ..FilterPolicy::pretraining()
        };
        assert!(bad.validate().is_err());
    }
}
