//! Deterministic, addressable random streams.
//!
//! Every stochastic component draws from a stream addressed by the master
//! seed plus a list of integer labels (ladder index, trajectory index, ...).
//! Streams with different addresses are statistically independent for all
//! practical purposes, and the same address always reproduces the same
//! draws, so parallel runs can hand out per-trajectory streams without
//! sharing any RNG state and still be bit-identical across reruns.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One splitmix64 finalizer round absorbing the word `v` into the hash `h`.
///
/// Constants are the reference splitmix64 ones; the construction is a plain
/// sponge: xor in the input, then scramble.
fn absorb(h: u64, v: u64) -> u64 {
    let mut z = (h ^ v).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the stream addressed by `labels` under the given master seed.
///
/// The label count is absorbed before the labels themselves, so addresses
/// of different shapes never collide by concatenation.
pub fn stream(master: u64, labels: &[u64]) -> ChaCha8Rng {
    let mut h = absorb(0x6C8E_9CF5_7093_2BD5, master);
    h = absorb(h, labels.len() as u64);
    for &label in labels {
        h = absorb(h, label);
    }
    let mut key = [0u8; 32];
    let mut z = h;
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        z = absorb(z, i as u64 + 1);
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Stream for one simulated trajectory of one ladder step.
pub fn trajectory_stream(master: u64, eps_index: u64, trajectory: u64) -> ChaCha8Rng {
    stream(master, &[eps_index, trajectory])
}
