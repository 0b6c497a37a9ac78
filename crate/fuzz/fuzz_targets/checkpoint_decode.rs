#![no_main]
use libfuzzer_sys::fuzz_target;

use author2vec_core::author2vec::Checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(ckpt) = Checkpoint::from_bytes(data) {
        let again = Checkpoint::from_bytes(&ckpt.to_bytes()).expect("re-encoded checkpoint decodes");
        assert_eq!(again.model.classes, ckpt.model.classes);
    }
});
