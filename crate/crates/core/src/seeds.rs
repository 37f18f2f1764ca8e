//! Seed derivation.
//!
//! Every random stream in the crate is derived from one user-supplied 64-bit
//! seed. A child seed is `splitmix64(parent ^ splitmix64(tag))`, where `tag` is
//! either an integer index or the FNV-1a hash of a stream name. Streams used by
//! the pipeline:
//!
//! | stream                     | derivation                                  |
//! |----------------------------|---------------------------------------------|
//! | run `i` of an experiment   | the `i`-th seed of the seed list, verbatim  |
//! | speaker training           | `derive_named(run, "speaker")`              |
//! | listener training          | `derive_named(run, "listener")`             |
//! | validation triple choice   | `derive_named(run, "validation")`           |
//! | per-triple sampling        | `derive(derive_named(run, stage), index)`   |
//! | single `predict` query     | `derive_named(seed, "predict")`             |
//! | vector partition per label | `derive_named(partition_seed, label)`       |
//!
//! `stage` is `"validation-sampling"` or `"test-sampling"`.
//!
//! Because per-triple streams depend only on the triple index, evaluating
//! triples in any order or in parallel gives identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// The SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn derive(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index))
}

pub fn derive_named(parent: u64, name: &str) -> u64 {
    derive(parent, fnv1a(name.as_bytes()))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn named_streams_differ() {
        assert_ne!(derive_named(7, "speaker"), derive_named(7, "listener"));
        assert_ne!(derive(7, 0), derive(7, 1));
        assert_eq!(derive_named(7, "speaker"), derive_named(7, "speaker"));
    }
}
