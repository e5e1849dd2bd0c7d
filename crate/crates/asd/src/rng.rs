//! Deterministic substream derivation from a single master seed.
//!
//! Every randomized routine takes a master seed plus a small integer path
//! (run index, stub-class pair, trial number, ...) and derives an independent
//! counter-based stream. Results are therefore reproducible regardless of
//! thread scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a stream from `master` and a path of substream ids.
///
/// Different paths give statistically independent streams; the same
/// (master, path) always gives the same stream.
pub fn stream(master: u64, path: &[u64]) -> Stream {
    let mut state = master;
    // absorb the path into the splitmix state, one id at a time
    let mut acc = splitmix64(&mut state);
    for &id in path {
        state ^= id.wrapping_mul(0xd6e8_feb8_6659_fd93);
        acc ^= splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    let mut s = acc;
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    Stream::from_seed(seed)
}
