//! Labeled, reproducible randomness streams.
//!
//! One root seed fully determines every draw in a run. Each logical consumer
//! (source, channel, detector, adversary, sampling, ...) gets its own stream
//! whose seed is `SHA-256(root_seed_be || label)`, so adding parallelism or
//! reordering consumers never perturbs another stream's draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Derive the deterministic stream for `label` under `root_seed`.
pub fn stream(root_seed: u64, label: &str) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(root_seed.to_be_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha20Rng::from_seed(seed)
}

/// The standard set of streams one protocol round consumes.
pub struct RoundStreams {
    /// Alice's basis and bit choices.
    pub alice: ChaCha20Rng,
    /// Bob's basis choices in the unauthenticated baselines.
    pub bob: ChaCha20Rng,
    /// Source photon statistics.
    pub source: ChaCha20Rng,
    /// Channel loss.
    pub channel: ChaCha20Rng,
    /// Detector noise and mismatched-basis outcomes.
    pub detector: ChaCha20Rng,
    /// Adversary decisions.
    pub eve: ChaCha20Rng,
}

impl RoundStreams {
    pub fn derive(root_seed: u64) -> Self {
        RoundStreams {
            alice: stream(root_seed, "alice"),
            bob: stream(root_seed, "bob"),
            source: stream(root_seed, "source"),
            channel: stream(root_seed, "channel"),
            detector: stream(root_seed, "detector"),
            eve: stream(root_seed, "eve"),
        }
    }
}
