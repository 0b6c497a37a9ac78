#![no_main]
use libfuzzer_sys::fuzz_target;

use author2vec_core::baselines::LsiModel;

fuzz_target!(|data: &[u8]| {
    let _ = LsiModel::from_bytes(data);
});
