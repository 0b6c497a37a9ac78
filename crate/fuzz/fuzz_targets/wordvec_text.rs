#![no_main]
use libfuzzer_sys::fuzz_target;

use author2vec_core::baselines::WordVectorTable;

fuzz_target!(|data: &[u8]| {
    let _ = WordVectorTable::parse(data);
});
