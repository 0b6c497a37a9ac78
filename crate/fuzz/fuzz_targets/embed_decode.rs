#![no_main]
use libfuzzer_sys::fuzz_target;

use author2vec_core::embedstore::decode_embeddings;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = decode_embeddings(data) {
        for r in &records {
            assert_eq!(r.values().len(), r.rows() * r.dim());
            assert!(r.values().iter().all(|v| v.is_finite()));
        }
    }
});
