//! Greedy longest-match subword tokenizer (WordPiece style).

use std::collections::HashMap;
use std::path::Path;

use super::CorpusError;

/// Marker carried by word-internal pieces.
pub const CONTINUATION_PREFIX: &str = "##";

/// Words longer than this (in chars) map straight to the unknown token.
const MAX_WORD_CHARS: usize = 100;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizerVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    unk_token: String,
}

impl TokenizerVocab {
    pub fn new(tokens: Vec<String>, unk_token: impl Into<String>) -> Result<Self, CorpusError> {
        let unk_token = unk_token.into();
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(CorpusError::DuplicateToken {
                    line: i + 1,
                    token: t.clone(),
                });
            }
        }
        if !index.contains_key(&unk_token) {
            return Err(CorpusError::MissingUnk(unk_token));
        }
        Ok(Self {
            tokens,
            index,
            unk_token,
        })
    }

    /// One token per line; the line index is the token id. A trailing
    /// newline is allowed, `\r\n` endings are accepted.
    pub fn parse(text: &str, unk_token: &str) -> Result<Self, CorpusError> {
        let tokens = text
            .strip_suffix('\n')
            .unwrap_or(text)
            .split('\n')
            .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
            .filter(|_| !text.is_empty())
            .collect();
        Self::new(tokens, unk_token)
    }

    pub fn load(path: &Path, unk_token: &str) -> Result<Self, CorpusError> {
        Self::parse(&std::fs::read_to_string(path)?, unk_token)
    }

    pub fn to_text(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn unk_token(&self) -> &str {
        &self.unk_token
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn is_punctuation(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Lowercases, splits on whitespace and isolates every punctuation/symbol
/// character as its own word.
pub fn basic_split(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    for chunk in text.split_whitespace() {
        let mut current = String::new();
        for c in chunk.chars() {
            if is_punctuation(c) {
                if !current.is_empty() {
                    words.push(std::mem::take(&mut current));
                }
                words.push(c.to_lowercase().collect());
            } else {
                current.extend(c.to_lowercase());
            }
        }
        if !current.is_empty() {
            words.push(current);
        }
    }
    words
}

/// Greedy longest-match segmentation of one word. `None` if some suffix of
/// the word cannot be matched.
pub fn wordpiece(word: &str, vocab: &TokenizerVocab) -> Option<Vec<String>> {
    let chars: Vec<char> = word.chars().collect();
    if chars.is_empty() || chars.len() > MAX_WORD_CHARS {
        return None;
    }
    let mut pieces = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let mut end = chars.len();
        let mut found = None;
        while end > start {
            let mut piece: String = chars[start..end].iter().collect();
            if start > 0 {
                piece.insert_str(0, CONTINUATION_PREFIX);
            }
            if vocab.contains(&piece) {
                found = Some(piece);
                break;
            }
            end -= 1;
        }
        pieces.push(found?);
        start = end;
    }
    Some(pieces)
}

/// Lowercase, punctuation split, then greedy longest-match per word; a word
/// with no complete segmentation becomes a single unknown token.
pub fn tokenize(text: &str, vocab: &TokenizerVocab) -> Vec<String> {
    let mut out = Vec::new();
    for word in basic_split(text) {
        match wordpiece(&word, vocab) {
            Some(pieces) => out.extend(pieces),
            None => out.push(vocab.unk_token().to_string()),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab(tokens: &[&str]) -> TokenizerVocab {
        TokenizerVocab::new(tokens.iter().map(|s| s.to_string()).collect(), "[UNK]").unwrap()
    }

    #[test]
    fn empty_text_has_no_tokens() {
        assert!(tokenize("", &vocab(&["[UNK]"])).is_empty());
    }

    #[test]
    fn hand_traced_unaffable() {
        let v = vocab(&["[UNK]", "un", "##aff", "##able", "a", "##a", "##f"]);
        assert_eq!(tokenize("unaffable", &v), vec!["un", "##aff", "##able"]);
    }

    #[test]
    fn unmatched_word_is_unknown() {
        let v = vocab(&["[UNK]", "un", "##aff"]);
        assert_eq!(tokenize("zzzqqq", &v), vec!["[UNK]"]);
        // Partial matches do not leak pieces.
        assert_eq!(tokenize("unzz", &v), vec!["[UNK]"]);
    }

    #[test]
    fn lowercases_and_splits_punctuation() {
        let v = vocab(&["[UNK]", "hello", ",", "world", "!"]);
        assert_eq!(
            tokenize("Hello,  WORLD!", &v),
            vec!["hello", ",", "world", "!"]
        );
    }

    #[test]
    fn vocab_validation() {
        assert!(matches!(
            TokenizerVocab::new(vec!["a".into(), "a".into(), "[UNK]".into()], "[UNK]"),
            Err(CorpusError::DuplicateToken { line: 2, .. })
        ));
        assert!(matches!(
            TokenizerVocab::new(vec!["a".into()], "[UNK]"),
            Err(CorpusError::MissingUnk(_))
        ));
        let v = TokenizerVocab::parse("[UNK]\r\nfoo\n##bar\n", "[UNK]").unwrap();
        assert_eq!(v.id("##bar"), Some(2));
        assert_eq!(TokenizerVocab::parse(&v.to_text(), "[UNK]").unwrap(), v);
    }

    proptest! {
        // Stripping continuation markers and concatenating reconstructs every
        // word that segments successfully.
        #[test]
        fn pieces_reconstruct_word(word in "[a-e]{1,12}") {
            let mut tokens = vec!["[UNK]".to_string()];
            for a in ['a', 'b', 'c', 'd', 'e'] {
                tokens.push(a.to_string());
                tokens.push(format!("##{a}"));
            }
            tokens.extend(["ab", "##cd", "##dea", "bad"].map(String::from));
            let v = TokenizerVocab::new(tokens, "[UNK]").unwrap();
            let pieces = wordpiece(&word, &v).unwrap();
            let joined: String = pieces
                .iter()
                .map(|p| p.strip_prefix(CONTINUATION_PREFIX).unwrap_or(p))
                .collect();
            prop_assert_eq!(joined, word);
        }
    }
}
