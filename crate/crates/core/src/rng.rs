//! Seed derivation and sparse Bernoulli sampling.
//!
//! Every party, channel and block draws from its own ChaCha8 stream derived
//! from a session seed and a small set of labels, so runs are reproducible
//! and independent streams never overlap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

/// Random source used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Stream labels for [`derive_rng`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Bob = 1,
    Alice = 2,
    ForwardChannel = 3,
    BackwardChannel = 4,
    Eve = 5,
    Message = 6,
    CodeConstruction = 7,
    Trial = 8,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    mix64(mix64(seed ^ mix64(stream as u64)) ^ index)
}

pub fn derive_rng(seed: u64, stream: Stream, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, stream, index))
}

/// Indices in `0..len` at which an independent Bernoulli(`p`) event fires,
/// sampled with geometric gaps rather than one draw per index.
pub fn bernoulli_positions<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> Vec<usize> {
    if len == 0 || p <= 0.0 {
        return Vec::new();
    }
    if p >= 1.0 {
        return (0..len).collect();
    }
    let gap = Geometric::new(p).expect("p in (0,1)");
    let mut out = Vec::with_capacity(((len as f64) * p * 1.2) as usize + 8);
    let mut pos: u64 = 0;
    loop {
        pos = pos.saturating_add(gap.sample(rng));
        if pos >= len as u64 {
            break;
        }
        out.push(pos as usize);
        pos += 1;
    }
    out
}
