//! Comparison filters sharing the [`Decision`] interface: a classic Bloom
//! filter and a stability-seeking counter filter that continuously evicts
//! stale entries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bitset::BitSet;
use crate::decision::{Decision, DedupFilter, Verdict};
use crate::hashing::{self, domains};

/// Classic Bloom filter over `m` bits with `k` hashed positions per
/// element. Bits only ever get set, so it never reports a false negative.
#[derive(Debug, Clone)]
pub struct ClassicBloom {
    bits: BitSet,
    num_hashes: u32,
    inserted_count: u64,
    ones: u64,
    hash_seed: u64,
}

impl ClassicBloom {
    pub fn new(memory_bits: u64, num_hashes: u32, master_seed: u64) -> Self {
        assert!(memory_bits >= 1, "memory_bits must be >= 1");
        assert!(num_hashes >= 1, "num_hashes must be >= 1");
        ClassicBloom {
            bits: BitSet::new(memory_bits),
            num_hashes,
            inserted_count: 0,
            ones: 0,
            hash_seed: hashing::derive_seed(master_seed, domains::HASHING),
        }
    }

    pub fn num_bits(&self) -> u64 {
        self.bits.len()
    }

    pub fn num_hashes(&self) -> u32 {
        self.num_hashes
    }

    /// Elements processed so far.
    pub fn inserted_count(&self) -> u64 {
        self.inserted_count
    }

    /// Membership probe without insertion.
    pub fn probe(&self, element: &[u8]) -> Verdict {
        let digest = hashing::digest(element, self.hash_seed);
        let all_set = hashing::positions(digest, self.num_hashes, self.bits.len())
            .all(|pos| self.bits.get(pos));
        if all_set {
            Verdict::Duplicate
        } else {
            Verdict::Distinct
        }
    }

    /// Probe the element's positions, then set them all.
    pub fn process(&mut self, element: &[u8]) -> Decision {
        let digest = hashing::digest(element, self.hash_seed);
        let mut all_set = true;
        let mut any_written = false;
        for pos in hashing::positions(digest, self.num_hashes, self.bits.len()) {
            if self.bits.set(pos) {
                self.ones += 1;
                all_set = false;
                any_written = true;
            }
        }
        self.inserted_count += 1;
        Decision {
            verdict: if all_set {
                Verdict::Duplicate
            } else {
                Verdict::Distinct
            },
            inserted: any_written,
        }
    }
}

impl DedupFilter for ClassicBloom {
    fn process(&mut self, element: &[u8]) -> Decision {
        ClassicBloom::process(self, element)
    }

    fn ones_total(&self) -> u64 {
        self.ones
    }

    fn algorithm(&self) -> &'static str {
        "bloom"
    }

    fn params(&self) -> Vec<(&'static str, String)> {
        vec![
            ("m", self.bits.len().to_string()),
            ("k", self.num_hashes.to_string()),
        ]
    }
}

/// Counter-cell filter with continuous random eviction, reconstructed from
/// its published description as a best-effort baseline.
///
/// Each element probes `k` cells (duplicate iff all are non-zero), then
/// `decrements` distinct uniformly chosen cells lose one (floored at
/// zero), then the probed cells are raised to the counter maximum. Under
/// a matched memory budget of `M` bits and `d`-bit cells the filter gets
/// `floor(M / d)` cells.
#[derive(Debug, Clone)]
pub struct SbfBank {
    cells: Vec<u8>,
    max_value: u8,
    counter_bits: u8,
    num_hashes: u32,
    decrements: u64,
    nonzero: u64,
    hash_seed: u64,
    rng: ChaCha8Rng,
    victims: VictimSampler,
}

impl SbfBank {
    /// `memory_bits` is the bit budget; the cell count is
    /// `floor(memory_bits / counter_bits)`. Requires `1 <= counter_bits
    /// <= 8`, at least one cell, and `decrements` no larger than the cell
    /// count.
    pub fn new(
        memory_bits: u64,
        num_hashes: u32,
        counter_bits: u8,
        decrements: u64,
        master_seed: u64,
    ) -> Self {
        assert!(
            (1..=8).contains(&counter_bits),
            "counter_bits must lie in 1..=8"
        );
        assert!(num_hashes >= 1, "num_hashes must be >= 1");
        let num_cells = memory_bits / counter_bits as u64;
        assert!(num_cells >= 1, "memory_bits too small for a single cell");
        assert!(
            decrements <= num_cells,
            "decrements cannot exceed the cell count"
        );
        let max_value = if counter_bits == 8 {
            u8::MAX
        } else {
            (1u8 << counter_bits) - 1
        };
        SbfBank {
            cells: vec![0; num_cells as usize],
            max_value,
            counter_bits,
            num_hashes,
            decrements,
            nonzero: 0,
            hash_seed: hashing::derive_seed(master_seed, domains::HASHING),
            rng: ChaCha8Rng::seed_from_u64(hashing::derive_seed(
                master_seed,
                domains::SBF_DECREMENTS,
            )),
            victims: VictimSampler::new(num_cells, decrements),
        }
    }

    /// Decrement count balancing the counter mass written per element:
    /// each element raises `k` cells to `Max`, so `k * Max` decrements
    /// drain at the same rate.
    pub fn default_decrements(num_hashes: u32, counter_bits: u8) -> u64 {
        let max_value = if counter_bits == 8 {
            u8::MAX as u64
        } else {
            (1u64 << counter_bits) - 1
        };
        num_hashes as u64 * max_value
    }

    pub fn num_cells(&self) -> u64 {
        self.cells.len() as u64
    }

    pub fn num_hashes(&self) -> u32 {
        self.num_hashes
    }

    pub fn max_value(&self) -> u8 {
        self.max_value
    }

    pub fn decrements(&self) -> u64 {
        self.decrements
    }

    /// Count of non-zero cells.
    pub fn nonzero_cells(&self) -> u64 {
        self.nonzero
    }

    /// Probe, age, insert: verdict from the probed cells, one saturating
    /// decrement on `decrements` distinct random cells, then the probed
    /// cells are set to the maximum.
    pub fn process(&mut self, element: &[u8]) -> Decision {
        let num_cells = self.cells.len() as u64;
        let digest = hashing::digest(element, self.hash_seed);

        let mut all_nonzero = true;
        for pos in hashing::positions(digest, self.num_hashes, num_cells) {
            if self.cells[pos as usize] == 0 {
                all_nonzero = false;
            }
        }

        // Distinct uniform victims: each cell ages at most once per
        // element, so a cell set in the previous step survives at least
        // one round whenever the maximum is at least 2.
        self.victims.reset();
        for _ in 0..self.decrements {
            let idx = self.victims.draw(&mut self.rng);
            let cell = &mut self.cells[idx as usize];
            if *cell > 0 {
                *cell -= 1;
                if *cell == 0 {
                    self.nonzero -= 1;
                }
            }
        }

        for pos in hashing::positions(digest, self.num_hashes, num_cells) {
            let cell = &mut self.cells[pos as usize];
            if *cell == 0 {
                self.nonzero += 1;
            }
            *cell = self.max_value;
        }

        Decision {
            verdict: if all_nonzero {
                Verdict::Duplicate
            } else {
                Verdict::Distinct
            },
            inserted: true,
        }
    }
}

impl DedupFilter for SbfBank {
    fn process(&mut self, element: &[u8]) -> Decision {
        SbfBank::process(self, element)
    }

    fn ones_total(&self) -> u64 {
        self.nonzero
    }

    fn algorithm(&self) -> &'static str {
        "sbf"
    }

    fn params(&self) -> Vec<(&'static str, String)> {
        vec![
            ("cells", self.cells.len().to_string()),
            ("k", self.num_hashes.to_string()),
            ("counter_bits", self.counter_bits.to_string()),
            ("max", self.max_value.to_string()),
            ("decrements", self.decrements.to_string()),
        ]
    }
}

/// Draws distinct uniform cell indices for one aging round.
///
/// Small rounds reject duplicates against a scratch list; rounds that ask
/// for a large share of the cells switch to a partial Fisher-Yates pass
/// over a persistent index pool, keeping the per-element cost at
/// O(decrements) even when decrements approaches the cell count.
#[derive(Debug, Clone)]
enum VictimSampler {
    Rejection { num_cells: u64, scratch: Vec<u64> },
    Shuffle { pool: Vec<u64>, taken: u64 },
}

const REJECTION_LIMIT: u64 = 64;

impl VictimSampler {
    fn new(num_cells: u64, decrements: u64) -> Self {
        if decrements <= REJECTION_LIMIT && decrements <= num_cells / 2 {
            VictimSampler::Rejection {
                num_cells,
                scratch: Vec::with_capacity(decrements as usize),
            }
        } else {
            VictimSampler::Shuffle {
                pool: (0..num_cells).collect(),
                taken: 0,
            }
        }
    }

    fn reset(&mut self) {
        match self {
            VictimSampler::Rejection { scratch, .. } => scratch.clear(),
            VictimSampler::Shuffle { taken, .. } => *taken = 0,
        }
    }

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> u64 {
        match self {
            VictimSampler::Rejection { num_cells, scratch } => loop {
                let idx = rng.random_range(0..*num_cells);
                if !scratch.contains(&idx) {
                    scratch.push(idx);
                    return idx;
                }
            },
            VictimSampler::Shuffle { pool, taken } => {
                let t = *taken as usize;
                let j = rng.random_range(t as u64..pool.len() as u64) as usize;
                pool.swap(t, j);
                *taken += 1;
                pool[t]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory;

    #[test]
    fn fresh_bloom_reports_distinct() {
        let mut bloom = ClassicBloom::new(1024, 4, 1);
        assert_eq!(bloom.probe(b"x"), Verdict::Distinct);
        assert_eq!(bloom.process(b"x").verdict, Verdict::Distinct);
    }

    #[test]
    fn bloom_never_forgets() {
        let mut bloom = ClassicBloom::new(4096, 4, 1);
        for i in 0u64..200 {
            bloom.process(&i.to_le_bytes());
        }
        for i in 0u64..200 {
            assert_eq!(bloom.process(&i.to_le_bytes()).verdict, Verdict::Duplicate);
        }
    }

    #[test]
    fn bloom_ones_only_grow() {
        let mut bloom = ClassicBloom::new(512, 3, 5);
        let mut prev = 0;
        for i in 0u64..400 {
            bloom.process(&i.to_le_bytes());
            assert!(bloom.ones_total() >= prev);
            prev = bloom.ones_total();
        }
    }

    #[test]
    fn bloom_fpr_tracks_formula() {
        // n = m/8, k = 6: expected FPR about 2.16%.
        let n = 20_000u64;
        let m = 8 * n;
        let mut bloom = ClassicBloom::new(m, 6, 42);
        for i in 0..n {
            bloom.process(&i.to_le_bytes());
        }
        let probes = 100_000u64;
        let mut fp = 0u64;
        for i in 0..probes {
            if bloom.probe(&(n + i).to_le_bytes()) == Verdict::Duplicate {
                fp += 1;
            }
        }
        let observed = fp as f64 / probes as f64;
        let predicted = theory::classic_fpr(n, m, 6);
        assert!(
            (observed - predicted).abs() / predicted < 0.2,
            "observed {observed:.5} vs predicted {predicted:.5}"
        );
    }

    #[test]
    fn fresh_sbf_reports_distinct() {
        let mut sbf = SbfBank::new(1024, 3, 3, 21, 1);
        assert_eq!(sbf.process(b"x").verdict, Verdict::Distinct);
    }

    #[test]
    fn immediate_repeat_is_duplicate() {
        // Max = 7 >= 2 and distinct victims mean one aging round cannot
        // zero a freshly set cell.
        let mut sbf = SbfBank::new(1024, 3, 3, 21, 1);
        for i in 0u64..500 {
            let elem = i.to_le_bytes();
            sbf.process(&elem);
            assert_eq!(sbf.process(&elem).verdict, Verdict::Duplicate, "at {i}");
        }
    }

    #[test]
    fn cells_stay_in_range_and_nonzero_count_matches() {
        let mut sbf = SbfBank::new(512, 2, 2, 6, 9);
        for i in 0u64..50_000 {
            sbf.process(&(i % 64).to_le_bytes());
        }
        assert!(sbf.cells.iter().all(|&c| c <= sbf.max_value()));
        let recount = sbf.cells.iter().filter(|&&c| c > 0).count() as u64;
        assert_eq!(recount, sbf.nonzero_cells());
    }

    #[test]
    fn long_uniform_stream_stabilizes() {
        // Ones-count drift per 1K window falls under 0.5% of the cell
        // count once the aging and insertion rates balance. 64K cells
        // keep residual per-window noise well inside the bound.
        let mut sbf = SbfBank::new(3 * 65536, 3, 3, 21, 7);
        let cells = sbf.num_cells();
        let mut prev = 0i64;
        let mut deltas = Vec::new();
        for i in 0u64..400_000 {
            sbf.process(&(i % 100_000).to_le_bytes());
            if (i + 1) % 1000 == 0 {
                let now = sbf.nonzero_cells() as i64;
                deltas.push((now - prev).unsigned_abs());
                prev = now;
            }
        }
        let tail = &deltas[deltas.len() - 100..];
        let bound = cells / 200; // 0.5%
        assert!(
            tail.iter().all(|&d| d < bound),
            "late windows still drifting: {:?}",
            &tail[..10]
        );
    }

    #[test]
    fn default_decrements_balance_mass() {
        assert_eq!(SbfBank::default_decrements(3, 3), 21);
        assert_eq!(SbfBank::default_decrements(1, 1), 1);
        assert_eq!(SbfBank::default_decrements(2, 8), 510);
    }

    #[test]
    fn sbf_heavy_aging_stays_linear() {
        // Half the cells age per element: the sampler's shuffle path keeps
        // this O(decrements) instead of degenerating into rejection churn.
        let mut sbf = SbfBank::new(300_000, 2, 3, 50_000, 5);
        assert_eq!(sbf.num_cells(), 100_000);
        for i in 0u64..20 {
            sbf.process(&i.to_le_bytes());
        }
        assert!(sbf.nonzero_cells() <= 40);
        let recount = sbf.cells.iter().filter(|&&c| c > 0).count() as u64;
        assert_eq!(recount, sbf.nonzero_cells());
    }

    #[test]
    fn sbf_decrement_victims_are_distinct() {
        // With decrements == cell count, every cell ages exactly once per
        // element: starting from a saturated bank, one step leaves every
        // cell at Max - 1 except the freshly re-set position.
        let mut sbf = SbfBank::new(64, 1, 8, 8, 3);
        assert_eq!(sbf.num_cells(), 8);
        sbf.cells.fill(255);
        sbf.nonzero = 8;

        let elem = 77u64.to_le_bytes();
        let digest = hashing::digest(&elem, sbf.hash_seed);
        let hit = hashing::positions(digest, 1, 8).next().unwrap();
        sbf.process(&elem);
        for (idx, &cell) in sbf.cells.iter().enumerate() {
            let expected = if idx as u64 == hit { 255 } else { 254 };
            assert_eq!(cell, expected, "cell {idx}");
        }
    }
}
