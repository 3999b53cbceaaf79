//! Counter-based random streams for realizations.
//!
//! Every realization draws from its own ChaCha8 stream selected by
//! `(master seed, L, realization index)`. Results therefore do not depend on which
//! thread evaluates which realization, nor on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Bits reserved for the realization index inside the 64-bit stream id.
const INDEX_BITS: u32 = 40;

/// Stream id for realization `index` of an RVE of size `l`.
///
/// Distinct `(l, index)` pairs map to distinct ChaCha streams as long as
/// `index < 2^40` and `l < 2^24`.
pub fn stream_id(l: usize, index: u64) -> u64 {
    debug_assert!(index < (1u64 << INDEX_BITS));
    ((l as u64) << INDEX_BITS) | (index & ((1u64 << INDEX_BITS) - 1))
}

/// Generator positioned at the start of the stream for `(seed, l, index)`.
pub fn realization_rng(seed: u64, l: usize, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(l, index));
    rng.set_word_pos(0);
    rng
}
