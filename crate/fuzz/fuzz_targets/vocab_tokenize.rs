#![no_main]
use libfuzzer_sys::fuzz_target;

use author2vec_core::corpus::{tokenize, TokenizerVocab};

// First line of the input is text to tokenize, the rest a vocabulary.
fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let (text, vocab) = s.split_once('\n').unwrap_or((s, ""));
    if let Ok(v) = TokenizerVocab::parse(vocab, "[UNK]") {
        for t in tokenize(text, &v) {
            assert!(v.contains(&t));
        }
    }
});
