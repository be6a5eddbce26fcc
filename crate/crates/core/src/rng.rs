//! Counter-based random streams.
//!
//! Every Monte Carlo routine splits its replicates into fixed-size blocks and
//! gives block `b` its own ChaCha stream keyed by `(seed, domain)` with stream
//! id `b`. Output therefore depends only on the seed, never on how many
//! worker threads processed the blocks.

use std::ops::Range;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Name recorded in sample metadata.
pub const GENERATOR: &str = "counter-v1";

/// Replicates per stream.
pub const BLOCK: usize = 1024;

pub(crate) const DOMAIN_SIMULATE: u64 = 0x5349_4d55;
pub(crate) const DOMAIN_RANDOM_ECF: u64 = 0x4543_4652;
pub(crate) const DOMAIN_BROWN_RESNICK: u64 = 0x4252_4d43;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream number `counter` of the generator keyed by
/// `(seed, domain)`.
pub fn stream(seed: u64, domain: u64, counter: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(domain));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(counter);
    rng
}

/// Uniform draw from the open interval `(0, 1)`.
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// Unit Fréchet variate by inversion, `-1 / ln U`.
#[inline]
pub fn unit_frechet<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -1.0 / open_unit(rng).ln()
}

/// Runs `f(rng, range)` for each block of `n` replicates in parallel and
/// returns the per-block results in block order.
pub fn map_blocks<T, F>(n: usize, seed: u64, domain: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, Range<usize>) -> T + Sync,
{
    let nblocks = n.div_ceil(BLOCK);
    (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, domain, b as u64);
            let lo = b * BLOCK;
            f(&mut rng, lo..(lo + BLOCK).min(n))
        })
        .collect()
}

/// Same block layout as [`map_blocks`] for deterministic reductions that
/// need no randomness.
pub fn map_ranges<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
{
    (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| f(b * BLOCK..((b + 1) * BLOCK).min(n)))
        .collect()
}
