//! Deterministic seed derivation.
//!
//! Every random decision in the workspace flows from a single master seed.
//! Subsystems never share an RNG; instead each derives its own child seed
//! from the master seed plus a short purpose string (e.g. `"synth/eeg/ch3"`
//! or `"forest/tree/17"`). That keeps runs bit-reproducible while making the
//! generated streams statistically independent of one another, and it means
//! inserting a new consumer of randomness cannot silently shift the values
//! every other consumer sees.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a child seed from a master seed and a purpose label.
///
/// The derivation is the first eight bytes (little-endian) of
/// `SHA-256(master_le_bytes || purpose_utf8)`. It is stable across runs,
/// platforms, and versions of this crate.
pub fn derive(master: u64, purpose: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(purpose.as_bytes());
    let digest = hasher.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

/// Construct the workspace-standard RNG for a purpose.
///
/// ChaCha8 is used everywhere: it is seedable from a plain `u64`, fast, and
/// produces identical output on every platform we build for.
pub fn rng(master: u64, purpose: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, purpose))
}
