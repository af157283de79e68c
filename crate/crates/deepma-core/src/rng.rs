//! Deterministic random streams.
//!
//! Every stochastic draw in the crate comes from a ChaCha12 stream addressed
//! by (seed, purpose, index). Streams are independent and stateless from the
//! caller's point of view: rebuilding a stream for the same address replays
//! the same values, which is what makes reruns byte-identical and lets a
//! resumed training run reproduce the original trajectory exactly.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    ParamInit = 1,
    Shuffle = 2,
    Csi = 3,
    ChannelNoise = 4,
    SnrDraw = 5,
    DataGen = 6,
    Eval = 7,
    Detect = 8,
}

/// One addressed stream. Index occupies the high bits so purposes never
/// collide for any index below 2^56.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream((index << 8) | purpose as u64);
    rng
}

pub fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Circularly symmetric complex normal CN(0,1): each part N(0, 1/2).
pub fn complex_normal(rng: &mut ChaCha12Rng) -> Complex64 {
    let s = core::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(standard_normal(rng) * s, standard_normal(rng) * s)
}

pub fn uniform(rng: &mut ChaCha12Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    rng.gen_range(lo..hi)
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Well-mixed sub-seed for an addressed child generator (for example one
/// channel realization per training iteration). Pure, so a resumed run
/// reconstructs every child seed from its counters alone.
pub fn derive(seed: u64, purpose: Purpose, index: u64) -> u64 {
    let tagged = mix(seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(purpose as u64)));
    mix(tagged ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Fisher-Yates shuffle of 0..n.
pub fn permutation(n: usize, rng: &mut ChaCha12Rng) -> alloc::vec::Vec<usize> {
    let mut perm: alloc::vec::Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    perm
}
