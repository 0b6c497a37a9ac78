#![no_main]
use libfuzzer_sys::fuzz_target;

use author2vec_core::viz::parse_scatter_csv;

fuzz_target!(|data: &[u8]| {
    let _ = parse_scatter_csv(data);
});
