//! Fixed-size bit array packed into 64-bit words.
//!
//! Bit `b` lives at word `b / 64`, bit index `b % 64`, which is also the
//! on-disk layout of filter snapshots.

/// A fixed-length array of bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSet {
    words: Vec<u64>,
    len: u64,
}

impl BitSet {
    /// All-zero bit set of `len` bits.
    pub fn new(len: u64) -> Self {
        assert!(len >= 1, "bit set length must be >= 1");
        let words = vec![0u64; len.div_ceil(64) as usize];
        BitSet { words, len }
    }

    /// Rebuild from packed words. Fails if the word count does not match
    /// `len` or any bit beyond `len` is set.
    pub fn from_words(words: Vec<u64>, len: u64) -> Option<Self> {
        if len == 0 || words.len() as u64 != len.div_ceil(64) {
            return None;
        }
        let tail = len % 64;
        if tail != 0 {
            let last = *words.last().unwrap();
            if last >> tail != 0 {
                return None;
            }
        }
        Some(BitSet { words, len })
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, idx: u64) -> bool {
        debug_assert!(idx < self.len);
        self.words[(idx / 64) as usize] >> (idx % 64) & 1 == 1
    }

    /// Set bit `idx`; returns true if it was previously clear.
    #[inline]
    pub fn set(&mut self, idx: u64) -> bool {
        debug_assert!(idx < self.len);
        let word = &mut self.words[(idx / 64) as usize];
        let mask = 1u64 << (idx % 64);
        let was_clear = *word & mask == 0;
        *word |= mask;
        was_clear
    }

    /// Clear bit `idx`; returns true if it was previously set.
    #[inline]
    pub fn clear(&mut self, idx: u64) -> bool {
        debug_assert!(idx < self.len);
        let word = &mut self.words[(idx / 64) as usize];
        let mask = 1u64 << (idx % 64);
        let was_set = *word & mask != 0;
        *word &= !mask;
        was_set
    }

    /// Full population count.
    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Index of the `rank`-th set bit (0-based), or None if fewer than
    /// `rank + 1` bits are set.
    pub fn select_set_bit(&self, rank: u64) -> Option<u64> {
        let mut remaining = rank;
        for (wi, &word) in self.words.iter().enumerate() {
            let pop = word.count_ones() as u64;
            if remaining < pop {
                let mut w = word;
                for _ in 0..remaining {
                    w &= w - 1; // drop lowest set bit
                }
                return Some(wi as u64 * 64 + w.trailing_zeros() as u64);
            }
            remaining -= pop;
        }
        None
    }
}
