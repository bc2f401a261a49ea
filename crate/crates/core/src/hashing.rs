//! Seeded element hashing and per-filter position derivation.
//!
//! Every element is digested once into 128 bits; the `k` per-filter bit
//! positions are then derived by double hashing, `(a + i*b) mod s`. The
//! second digest half is forced odd so the stride never degenerates when
//! `s` is even.

use xxhash_rust::xxh3::{xxh3_128_with_seed, xxh3_64_with_seed};

/// Identifier of the hash family, recorded in report headers so results
/// can be reproduced bit-for-bit.
pub const HASH_FAMILY: &str = "xxh3-128";

/// Named sub-stream labels used to split one master seed into independent
/// seeds per randomness consumer.
pub mod domains {
    pub const HASHING: &str = "hashing";
    pub const RESERVOIR: &str = "reservoir";
    pub const DELETIONS: &str = "deletions";
    pub const GENERATOR: &str = "generator";
    pub const SBF_DECREMENTS: &str = "sbf-decrements";
    pub const ORACLE: &str = "oracle";
}

/// Derive the seed for a named sub-stream from the master seed.
///
/// Changing how one consumer draws randomness does not perturb the others,
/// since each consumer owns a generator seeded from its own label.
pub fn derive_seed(master: u64, domain: &str) -> u64 {
    xxh3_64_with_seed(domain.as_bytes(), master)
}

/// Two independent 64-bit digests of an element's bytes.
///
/// `b` is always odd; see [`digest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElementDigest {
    a: u64,
    b: u64,
}

impl ElementDigest {
    /// Build a digest from raw halves, forcing `b` odd.
    pub fn new(a: u64, b: u64) -> Self {
        ElementDigest { a, b: b | 1 }
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    pub fn b(&self) -> u64 {
        self.b
    }
}

/// Digest an element under a seed. Deterministic: equal bytes under equal
/// seeds yield equal digests, across runs and platforms. Empty input is
/// fine.
pub fn digest(element: &[u8], seed: u64) -> ElementDigest {
    let h = xxh3_128_with_seed(element, seed);
    ElementDigest::new(h as u64, (h >> 64) as u64)
}

/// Iterator over the `k` positions `(a + i*b) mod s`, one per filter.
///
/// Runs in exact integer arithmetic: the state keeps `a mod s` and
/// `b mod s` and steps by modular addition, so no wrap-around artifacts
/// creep in for any `s`.
#[derive(Debug, Clone, Copy)]
pub struct Positions {
    current: u64,
    step: u64,
    filter_bits: u64,
    remaining: u32,
}

impl Iterator for Positions {
    type Item = u64;

    #[inline]
    fn next(&mut self) -> Option<u64> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let pos = self.current;
        self.current += self.step;
        if self.current >= self.filter_bits {
            self.current -= self.filter_bits;
        }
        Some(pos)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining as usize, Some(self.remaining as usize))
    }
}

impl ExactSizeIterator for Positions {}

/// Positions of an element in each of `k` filters of `s` bits.
///
/// Requires `k >= 1` and `s >= 1`; every yielded position is `< s`.
pub fn positions(digest: ElementDigest, num_filters: u32, filter_bits: u64) -> Positions {
    assert!(num_filters >= 1, "num_filters must be >= 1");
    assert!(filter_bits >= 1, "filter_bits must be >= 1");
    // filter_bits < 2^63 keeps `current + step` overflow-free.
    assert!(filter_bits < 1 << 63, "filter_bits out of range");
    Positions {
        current: digest.a % filter_bits,
        step: digest.b % filter_bits,
        filter_bits,
        remaining: num_filters,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_deterministic() {
        assert_eq!(digest(b"abc", 7), digest(b"abc", 7));
    }

    #[test]
    fn digest_separates_nearby_inputs() {
        assert_ne!(digest(b"abc", 7), digest(b"abd", 7));
    }

    #[test]
    fn digest_accepts_empty_input() {
        let d = digest(b"", 0);
        assert_eq!(d, digest(b"", 0));
        assert_eq!(d.b() & 1, 1);
    }

    #[test]
    fn digest_b_always_odd() {
        for i in 0u64..512 {
            assert_eq!(digest(&i.to_le_bytes(), i).b() & 1, 1);
        }
    }

    #[test]
    fn positions_by_definition() {
        let d = ElementDigest::new(5, 3);
        let got: Vec<u64> = positions(d, 3, 10).collect();
        assert_eq!(got, vec![5, 8, 1]);
    }

    #[test]
    fn positions_full_stride() {
        let d = ElementDigest::new(0, 1);
        let got: Vec<u64> = positions(d, 4, 4).collect();
        assert_eq!(got, vec![0, 1, 2, 3]);
    }

    #[test]
    fn single_position_is_a_mod_s() {
        let d = digest(b"element", 99);
        let got: Vec<u64> = positions(d, 1, 777).collect();
        assert_eq!(got, vec![d.a() % 777]);
    }

    #[test]
    fn derive_seed_separates_domains() {
        let a = derive_seed(1, domains::HASHING);
        let b = derive_seed(1, domains::RESERVOIR);
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(1, domains::HASHING));
    }

    /// Chi-squared uniformity of the first derived position over s = 1024,
    /// one million elements. The 0.999 quantile for 1023 degrees of
    /// freedom comes from the Wilson-Hilferty approximation.
    #[test]
    fn positions_are_uniform() {
        const S: u64 = 1024;
        const N: u64 = 1_000_000;
        let mut counts = vec![0u64; S as usize];
        for i in 0..N {
            let d = digest(&i.to_le_bytes(), 12345);
            let p = positions(d, 1, S).next().unwrap();
            counts[p as usize] += 1;
        }
        let expected = N as f64 / S as f64;
        let stat: f64 = counts
            .iter()
            .map(|&c| {
                let diff = c as f64 - expected;
                diff * diff / expected
            })
            .sum();

        let df = (S - 1) as f64;
        let z = 3.090_232_306_167_813; // Phi^-1(0.999)
        let t = 1.0 - 2.0 / (9.0 * df) + z * (2.0 / (9.0 * df)).sqrt();
        let critical = df * t * t * t;
        assert!(
            stat < critical,
            "chi-squared {stat:.1} rejects uniformity (critical {critical:.1})"
        );
    }
}
