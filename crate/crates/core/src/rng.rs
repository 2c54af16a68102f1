//! Counter-based random streams.
//!
//! Every unit of work (a block or cluster inside one iteration, one seed of an
//! experiment) gets its own ChaCha stream addressed by `(root, tag, index)`.
//! Adding units or changing the thread count never perturbs existing streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a root seed with a tag into a new 64-bit key.
pub fn derive_key(root: u64, tag: u64) -> u64 {
    splitmix(splitmix(root) ^ tag.rotate_left(17) ^ 0x5851_f42d_4c95_7f2d)
}

/// Stream `index` under the key derived from `(root, tag)`.
pub fn stream(root: u64, tag: u64, index: u64) -> StreamRng {
    let key = derive_key(root, tag);
    let mut seed = [0u8; 32];
    for (i, chunk) in seed.chunks_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix(key.wrapping_add(i as u64)).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(index);
    rng
}
