#![no_main]
use libfuzzer_sys::fuzz_target;

use author2vec_core::baselines::LdaModel;

fuzz_target!(|data: &[u8]| {
    let _ = LdaModel::from_bytes(data);
});
