//! Seed derivation. Every random stream in the crate is a ChaCha generator
//! keyed by a root seed plus a namespace string, so that per-session and
//! per-chain streams are independent of processing order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StageRng = ChaCha8Rng;

pub fn derive_seed(root: u64, namespace: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update((namespace.len() as u64).to_le_bytes());
    hasher.update(namespace.as_bytes());
    hasher.finalize().into()
}

pub fn rng_for(root: u64, namespace: &str) -> StageRng {
    ChaCha8Rng::from_seed(derive_seed(root, namespace))
}

/// A fair coin keyed on `(root, namespace)`.
pub fn coin(root: u64, namespace: &str) -> bool {
    derive_seed(root, namespace)[0] & 1 == 1
}
