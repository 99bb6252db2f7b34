//! Seed derivation and counter-based random streams.
//!
//! Every path owns a ChaCha stream addressed by `(seed, stream id)`, so a path's
//! draws never depend on how many other paths exist or which thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep derived seeds for different purposes apart.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum SeedTag {
    Params = 0x7061_7261_6d73,
    Paths = 0x7061_7468_7300,
    Init = 0x696e_6974_0000,
    Shuffle = 0x7368_7566_666c,
    Bootstrap = 0x626f_6f74_7374,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed, a purpose tag and an index into an independent seed.
pub fn derive_seed(master: u64, tag: SeedTag, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ tag as u64).wrapping_add(splitmix64(index)))
}

/// Stream `stream` of the ChaCha8 generator keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
