#![no_main]
use libfuzzer_sys::fuzz_target;

use author2vec_core::corpus::parse_corpus;

fuzz_target!(|data: &[u8]| {
    if let Ok((authors, stats)) = parse_corpus(data) {
        assert_eq!(authors.len(), stats.authors);
        for a in &authors {
            assert!(a.posts.windows(2).all(|w| w[0].created_at <= w[1].created_at));
        }
    }
});
