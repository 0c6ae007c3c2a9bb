//! Named, order-independent random streams.
//!
//! Every consumer of randomness asks for `(root, tag, index)`. The derived
//! seed depends only on those three values, so adding a new test signal or a
//! new method never shifts the draws of an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the stream `(root, tag, index)`.
pub fn stream_seed(root: u64, tag: &str, index: u64) -> u64 {
    let mut h = splitmix64(root);
    for chunk in tag.as_bytes().chunks(8) {
        let mut buf = [0u8; 8];
        buf[..chunk.len()].copy_from_slice(chunk);
        h = splitmix64(h ^ u64::from_le_bytes(buf));
    }
    h = splitmix64(h ^ tag.len() as u64);
    splitmix64(h ^ index)
}

pub fn stream(root: u64, tag: &str, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(stream_seed(root, tag, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = stream(7, "library", 3).random_iter().take(4).collect();
        let b: Vec<u64> = stream(7, "library", 3).random_iter().take(4).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn tags_and_indices_separate_streams() {
        let s = stream_seed(1, "test", 0);
        assert_ne!(s, stream_seed(1, "test", 1));
        assert_ne!(s, stream_seed(1, "tests", 0));
        assert_ne!(s, stream_seed(2, "test", 0));
        // zero-padding of the last tag chunk must not alias
        assert_ne!(stream_seed(1, "a", 0), stream_seed(1, "a\0", 0));
    }
}
