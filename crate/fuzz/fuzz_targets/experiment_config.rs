#![no_main]
use libfuzzer_sys::fuzz_target;

use author2vec_cli::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = ExperimentConfig::from_toml(text, &[]);
});
