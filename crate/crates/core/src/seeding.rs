//! Deterministic RNG derivation.
//!
//! Every random stream in the pipeline is a ChaCha8 generator keyed by a
//! global seed plus a label, so partitions and stub vectors for one author do
//! not shift when unrelated authors are added or removed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive_seed(seed: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.finalize().into()
}

pub fn derive_rng(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(seed, label))
}
