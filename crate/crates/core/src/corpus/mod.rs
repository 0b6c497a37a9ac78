//! Post dumps, author records, tokenization and filtering.

mod filter;
mod mbti;
mod split;
mod tokenizer;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use filter::{
    filter_authors, filter_posts, filter_posts_with_stats, AuthorThreshold, FilterPolicy,
    FilterStats, JunkRule,
};
pub use mbti::{all_mbti_types, mbti_axis_labels, mbti_from_axes, MbtiAxis};
pub use split::{holdout_indices, split_authorship_eval, AuthorshipSplit};
pub use tokenizer::{basic_split, tokenize, wordpiece, TokenizerVocab, CONTINUATION_PREFIX};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("label file line {line}: {message}")]
    BadLabel { line: usize, message: String },
    #[error("vocabulary line {line}: duplicate token `{token}`")]
    DuplicateToken { line: usize, token: String },
    #[error("vocabulary does not contain the unknown token `{0}`")]
    MissingUnk(String),
    #[error("invalid filter policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid split request: {0}")]
    InvalidSplit(String),
    #[error("no author has more than {min_valid_posts} posts")]
    NoQualifyingAuthors { min_valid_posts: usize },
    #[error("`{0}` is not a valid MBTI code")]
    InvalidMbti(String),
}

/// One post.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub author_id: String,
    pub created_at: i64,
    pub subreddit: String,
    pub text: String,
}

/// All posts of one author, oldest first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorRecord {
    pub author_id: String,
    pub posts: Vec<Post>,
    pub labels: BTreeMap<String, String>,
}

impl AuthorRecord {
    pub fn new(author_id: impl Into<String>) -> Self {
        Self {
            author_id: author_id.into(),
            ..Self::default()
        }
    }

    pub fn label(&self, attribute: &str) -> Option<&str> {
        self.labels.get(attribute).map(String::as_str)
    }
}

/// Counters gathered while reading a dump.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStats {
    pub lines: usize,
    pub posts: usize,
    pub authors: usize,
    pub duplicates: usize,
    pub empty_bodies: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Timestamp {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Timestamp {
    fn seconds(&self) -> Option<i64> {
        match self {
            Timestamp::Int(v) => Some(*v),
            Timestamp::Float(f) if f.fract() == 0.0 && f.is_finite() => Some(*f as i64),
            Timestamp::Float(_) => None,
            Timestamp::Text(s) => s.trim().parse().ok(),
        }
    }
}

#[derive(Deserialize)]
struct RawPost {
    author: String,
    created_utc: Timestamp,
    #[serde(default)]
    subreddit: String,
    body: String,
}

#[derive(Serialize)]
struct RawPostOut<'a> {
    author: &'a str,
    created_utc: i64,
    subreddit: &'a str,
    body: &'a str,
}

/// Reads a JSON-lines dump (`{author, created_utc, subreddit, body}` per line).
pub fn load_corpus(path: &Path) -> Result<(Vec<AuthorRecord>, LoadStats), CorpusError> {
    parse_corpus(BufReader::new(File::open(path)?))
}

/// Parses a JSON-lines dump. Posts are grouped by author (authors in
/// lexicographic order) and sorted oldest first; duplicate
/// `(author, created_utc, body)` triples are dropped and counted. Blank lines
/// are skipped. Line numbers in errors are 1-based.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<(Vec<AuthorRecord>, LoadStats), CorpusError> {
    let mut stats = LoadStats::default();
    let mut grouped: BTreeMap<String, BTreeSet<(i64, String, String)>> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => CorpusError::Malformed {
                line: line_no,
                message: "not valid UTF-8".into(),
            },
            _ => CorpusError::Io(e),
        })?;
        stats.lines += 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPost = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let created = raw
            .created_utc
            .seconds()
            .ok_or_else(|| CorpusError::Malformed {
                line: line_no,
                message: "created_utc is not an integer timestamp".into(),
            })?;
        if created < 0 {
            return Err(CorpusError::Malformed {
                line: line_no,
                message: format!("negative created_utc {created}"),
            });
        }
        if raw.author.is_empty() {
            return Err(CorpusError::Malformed {
                line: line_no,
                message: "empty author".into(),
            });
        }
        if raw.body.trim().is_empty() {
            stats.empty_bodies += 1;
            continue;
        }
        let entry = grouped.entry(raw.author).or_default();
        if !entry.insert((created, raw.body, raw.subreddit)) {
            stats.duplicates += 1;
        }
    }
    let mut authors = Vec::with_capacity(grouped.len());
    for (author_id, posts) in grouped {
        let mut record = AuthorRecord::new(author_id.clone());
        let mut last: Option<(i64, String)> = None;
        for (created_at, text, subreddit) in posts {
            // Dedup key ignores the subreddit.
            let key = (created_at, text);
            if last.as_ref() == Some(&key) {
                stats.duplicates += 1;
                continue;
            }
            record.posts.push(Post {
                author_id: author_id.clone(),
                created_at,
                subreddit,
                text: key.1.clone(),
            });
            last = Some(key);
        }
        stats.posts += record.posts.len();
        authors.push(record);
    }
    stats.authors = authors.len();
    if stats.duplicates > 0 {
        log::info!("dropped {} duplicate posts", stats.duplicates);
    }
    Ok((authors, stats))
}

/// Writes records back out in the dump format, authors and posts in order.
pub fn write_corpus<W: Write>(records: &[AuthorRecord], mut out: W) -> Result<(), CorpusError> {
    for record in records {
        for post in &record.posts {
            let raw = RawPostOut {
                author: &post.author_id,
                created_utc: post.created_at,
                subreddit: &post.subreddit,
                body: &post.text,
            };
            serde_json::to_writer(&mut out, &raw).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `author_id → attribute → value`
pub type LabelTable = BTreeMap<String, BTreeMap<String, String>>;

pub fn load_labels(path: &Path) -> Result<LabelTable, CorpusError> {
    parse_labels(File::open(path)?)
}

/// Parses a CSV with header `author_id,attribute,value`. A repeated
/// `(author_id, attribute)` pair with a different value is an error.
pub fn parse_labels<R: std::io::Read>(reader: R) -> Result<LabelTable, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| CorpusError::BadLabel {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["author_id", "attribute", "value"] {
        return Err(CorpusError::BadLabel {
            line: 1,
            message: "header must be `author_id,attribute,value`".into(),
        });
    }
    let mut table = LabelTable::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| CorpusError::BadLabel {
            line,
            message: e.to_string(),
        })?;
        if row.len() != 3 {
            return Err(CorpusError::BadLabel {
                line,
                message: format!("expected 3 fields, found {}", row.len()),
            });
        }
        let (author, attribute, value) = (row[0].trim(), row[1].trim(), row[2].trim());
        if author.is_empty() || attribute.is_empty() {
            return Err(CorpusError::BadLabel {
                line,
                message: "empty author_id or attribute".into(),
            });
        }
        let attrs = table.entry(author.to_string()).or_default();
        match attrs.get(attribute) {
            Some(existing) if existing != value => {
                return Err(CorpusError::BadLabel {
                    line,
                    message: format!("conflicting values for {author}/{attribute}"),
                })
            }
            _ => {
                attrs.insert(attribute.to_string(), value.to_string());
            }
        }
    }
    Ok(table)
}

pub fn attach_labels(corpus: &mut [AuthorRecord], labels: &LabelTable) {
    for record in corpus {
        if let Some(attrs) = labels.get(&record.author_id) {
            record
                .labels
                .extend(attrs.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(author: &str, t: i64, body: &str) -> String {
        serde_json::json!({"author": author, "created_utc": t, "subreddit": "r", "body": body})
            .to_string()
    }

    #[test]
    fn groups_two_lines_into_one_author() {
        let text = format!("{}\n{}\n", line("a", 20, "later"), line("a", 10, "earlier"));
        let (authors, stats) = parse_corpus(text.as_bytes()).unwrap();
        assert_eq!(authors.len(), 1);
        assert_eq!(authors[0].posts.len(), 2);
        assert_eq!(authors[0].posts[0].text, "earlier");
        assert_eq!(stats.posts, 2);
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        let (authors, stats) = parse_corpus("".as_bytes()).unwrap();
        assert!(authors.is_empty());
        assert_eq!(stats, LoadStats::default());
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let mut lines: Vec<String> = (0..10).map(|i| line("a", i, "text")).collect();
        lines[6] = "{\"author\": \"a\", \"created_utc\": ".into();
        let err = parse_corpus(lines.join("\n").as_bytes()).unwrap_err();
        match err {
            CorpusError::Malformed { line, .. } => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicates_are_dropped_and_counted() {
        let text = [
            line("a", 1, "x"),
            line("a", 1, "x"),
            line("a", 2, "x"),
            line("b", 1, "x"),
        ]
        .join("\n");
        let (authors, stats) = parse_corpus(text.as_bytes()).unwrap();
        assert_eq!(stats.duplicates, 1);
        assert_eq!(authors[0].posts.len(), 2);
        assert_eq!(authors[1].posts.len(), 1);
    }

    #[test]
    fn string_timestamps_and_blank_bodies() {
        let text = [
            r#"{"author":"a","created_utc":"15","subreddit":"r","body":"ok"}"#.to_string(),
            line("a", 3, "   "),
        ]
        .join("\n");
        let (authors, stats) = parse_corpus(text.as_bytes()).unwrap();
        assert_eq!(authors[0].posts[0].created_at, 15);
        assert_eq!(stats.empty_bodies, 1);
    }

    #[test]
    fn negative_timestamp_is_rejected() {
        assert!(matches!(
            parse_corpus(line("a", -1, "x").as_bytes()),
            Err(CorpusError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn write_then_parse_is_identity() {
        let text = [line("b", 2, "two \"quoted\""), line("a", 1, "one\nnewline")].join("\n");
        let (authors, _) = parse_corpus(text.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_corpus(&authors, &mut buf).unwrap();
        let (again, _) = parse_corpus(buf.as_slice()).unwrap();
        assert_eq!(authors, again);
    }

    #[test]
    fn labels_parse_and_attach() {
        let csv = "author_id,attribute,value\na,gender,female\na,mbti,INTP\nb,gender,male\n";
        let table = parse_labels(csv.as_bytes()).unwrap();
        let mut corpus = vec![AuthorRecord::new("a"), AuthorRecord::new("c")];
        attach_labels(&mut corpus, &table);
        assert_eq!(corpus[0].label("mbti"), Some("INTP"));
        assert!(corpus[1].labels.is_empty());
    }

    #[test]
    fn label_conflicts_and_bad_headers_fail() {
        assert!(parse_labels("id,attr,value\n".as_bytes()).is_err());
        let csv = "author_id,attribute,value\na,g,x\na,g,y\n";
        assert!(matches!(
            parse_labels(csv.as_bytes()),
            Err(CorpusError::BadLabel { line: 3, .. })
        ));
    }
}
