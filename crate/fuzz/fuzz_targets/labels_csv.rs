#![no_main]
use libfuzzer_sys::fuzz_target;

use author2vec_core::corpus::parse_labels;

fuzz_target!(|data: &[u8]| {
    let _ = parse_labels(data);
});
