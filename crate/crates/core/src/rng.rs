//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha8 stream. The 64-bit seed
//! selects the key and a label such as `"syn/exc/targets"` selects the stream
//! number via FNV-1a, so draws for one purpose never shift the draws of
//! another. Changing a synapse group's out-degree, for example, leaves the
//! neuron parameter draws untouched.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// FNV-1a over the label bytes.
pub fn label_hash(label: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    label
        .bytes()
        .fold(OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

pub fn stream(seed: u64, label: &str) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label_hash(label));
    rng
}

/// A derived 64-bit seed, for APIs that take a plain seed rather than a stream.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    stream(seed, label).next_u64()
}
