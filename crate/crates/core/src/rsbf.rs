//! The reservoir-sampling Bloom filter bank.
//!
//! A bank is `k` Bloom filters of `s` bits each. Elements are hashed to one
//! position per filter. The first `s` stream elements are always inserted
//! and nothing is ever reset during that fill phase. From element `s + 1`
//! on, element `i` is inserted with probability `s / i`; each insertion
//! also resets one uniformly chosen position per filter (skipped when the
//! choice collides with the element's own position), which keeps the ones
//! count near-constant. Once `s / i` falls below the floor `p*`, any
//! element judged distinct is force-inserted: in every filter where its bit
//! is clear, one currently-set bit is swapped out for it, leaving the ones
//! count untouched.
//!
//! # Snapshot format
//!
//! [`FilterBank::snapshot`] emits a versioned little-endian byte layout:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0      | 4    | magic `RSBF` |
//! | 4      | 2    | format version (`1`) |
//! | 6      | 2    | reserved (`0`) |
//! | 8      | 8    | memory budget in bits |
//! | 16     | 4    | number of filters `k` |
//! | 20     | 4    | reserved (`0`) |
//! | 24     | 8    | bits per filter `s` |
//! | 32     | 8    | FPR threshold (f64 bits) |
//! | 40     | 8    | `p*` (f64 bits) |
//! | 48     | 8    | elements seen |
//! | 56     | 8    | hash seed |
//! | 64     | 32+16| accept RNG: seed, word position |
//! | 112    | 32+16| evict RNG: seed, word position |
//! | 160    | ...  | `k` bit arrays, `ceil(s/64)` words each |
//!
//! Bit `b` of a filter sits in word `b / 64` at bit index `b % 64`. Unused
//! bits in each final word must be zero.

use std::error::Error;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bitset::BitSet;
use crate::decision::{Decision, DedupFilter, Verdict};
use crate::hashing::{self, domains};
use crate::theory;

const SNAPSHOT_MAGIC: [u8; 4] = *b"RSBF";
const SNAPSHOT_VERSION: u16 = 1;
const SNAPSHOT_HEADER_LEN: usize = 160;

/// Planned filter layout: memory budget, filter count and size, plus the
/// two probability knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterPlan {
    memory_bits: u64,
    num_filters: u32,
    filter_bits: u64,
    fpr_threshold: f64,
    p_star: f64,
}

impl FilterPlan {
    /// Build a plan from explicit components, validating every invariant.
    pub fn new(
        memory_bits: u64,
        num_filters: u32,
        filter_bits: u64,
        fpr_threshold: f64,
        p_star: f64,
    ) -> Result<Self, PlanError> {
        if !(fpr_threshold > 0.0 && fpr_threshold < 1.0) {
            return Err(PlanError::FprOutOfRange(fpr_threshold));
        }
        if !(p_star > 0.0 && p_star < 1.0) {
            return Err(PlanError::PStarOutOfRange(p_star));
        }
        if num_filters < 1 || filter_bits < 1 {
            return Err(PlanError::EmptyLayout);
        }
        if filter_bits >= 1 << 62 {
            return Err(PlanError::FilterTooLarge(filter_bits));
        }
        match (num_filters as u64).checked_mul(filter_bits) {
            Some(total) if total <= memory_bits => {}
            _ => {
                return Err(PlanError::OverBudget {
                    num_filters,
                    filter_bits,
                    memory_bits,
                })
            }
        }
        Ok(FilterPlan {
            memory_bits,
            num_filters,
            filter_bits,
            fpr_threshold,
            p_star,
        })
    }

    pub fn memory_bits(&self) -> u64 {
        self.memory_bits
    }

    pub fn num_filters(&self) -> u32 {
        self.num_filters
    }

    pub fn filter_bits(&self) -> u64 {
        self.filter_bits
    }

    pub fn fpr_threshold(&self) -> f64 {
        self.fpr_threshold
    }

    pub fn p_star(&self) -> f64 {
        self.p_star
    }
}

/// Plan `(k, s)` from a memory budget and target FPR.
///
/// `k` is the half-up rounding of the arithmetic mean of 1 and
/// `ln(FPR_t) / ln(1 - 1/e)`, balancing the low-FPR and low-FNR extremes;
/// `s` is `floor(M / k)`. Thresholds at or above `1 - 1/e` have no
/// solution and are rejected; pass a filter count explicitly through
/// [`FilterPlan::new`] or use [`plan_low_fnr`] in that case.
pub fn plan(memory_bits: u64, fpr_threshold: f64, p_star: f64) -> Result<FilterPlan, PlanError> {
    let k_raw = checked_k_raw(fpr_threshold)?;
    let k = round_half_up((1.0 + k_raw) / 2.0).max(1) as u32;
    layout_with_k(memory_bits, k, fpr_threshold, p_star)
}

/// Low-FNR override: a single filter spanning the whole budget.
pub fn plan_low_fnr(
    memory_bits: u64,
    fpr_threshold: f64,
    p_star: f64,
) -> Result<FilterPlan, PlanError> {
    if !(fpr_threshold > 0.0 && fpr_threshold < 1.0) {
        return Err(PlanError::FprOutOfRange(fpr_threshold));
    }
    layout_with_k(memory_bits, 1, fpr_threshold, p_star)
}

/// Low-FPR override: `k` rounded from `ln(FPR_t) / ln(1 - 1/e)` directly.
pub fn plan_low_fpr(
    memory_bits: u64,
    fpr_threshold: f64,
    p_star: f64,
) -> Result<FilterPlan, PlanError> {
    let k_raw = checked_k_raw(fpr_threshold)?;
    let k = round_half_up(k_raw).max(1) as u32;
    layout_with_k(memory_bits, k, fpr_threshold, p_star)
}

fn checked_k_raw(fpr_threshold: f64) -> Result<f64, PlanError> {
    if !(fpr_threshold > 0.0 && fpr_threshold < 1.0) {
        return Err(PlanError::FprOutOfRange(fpr_threshold));
    }
    let k_raw = theory::plan_k_raw(fpr_threshold);
    if k_raw < 1.0 {
        return Err(PlanError::FprAboveFormulaRange(fpr_threshold));
    }
    Ok(k_raw)
}

fn layout_with_k(
    memory_bits: u64,
    k: u32,
    fpr_threshold: f64,
    p_star: f64,
) -> Result<FilterPlan, PlanError> {
    let s = memory_bits / k as u64;
    if s < 2 {
        return Err(PlanError::MemoryTooSmall {
            memory_bits,
            num_filters: k,
        });
    }
    FilterPlan::new(memory_bits, k, s, fpr_threshold, p_star)
}

fn round_half_up(x: f64) -> u64 {
    (x + 0.5).floor() as u64
}

/// Why a plan could not be built.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanError {
    FprOutOfRange(f64),
    /// `FPR_t >= 1 - 1/e`, where the planning formula yields `k < 1`.
    FprAboveFormulaRange(f64),
    PStarOutOfRange(f64),
    MemoryTooSmall {
        memory_bits: u64,
        num_filters: u32,
    },
    EmptyLayout,
    FilterTooLarge(u64),
    OverBudget {
        num_filters: u32,
        filter_bits: u64,
        memory_bits: u64,
    },
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanError::FprOutOfRange(v) => write!(f, "FPR threshold {v} must lie in (0, 1)"),
            PlanError::FprAboveFormulaRange(v) => write!(
                f,
                "FPR threshold {v} is >= 1 - 1/e (~0.632), outside the planning formula's \
                 range; choose a filter count explicitly instead"
            ),
            PlanError::PStarOutOfRange(v) => write!(f, "p* {v} must lie in (0, 1)"),
            PlanError::MemoryTooSmall {
                memory_bits,
                num_filters,
            } => write!(
                f,
                "{memory_bits} bits cannot hold {num_filters} filters of at least 2 bits each"
            ),
            PlanError::EmptyLayout => write!(f, "filter count and filter size must be >= 1"),
            PlanError::FilterTooLarge(s) => write!(f, "filter size {s} bits is out of range"),
            PlanError::OverBudget {
                num_filters,
                filter_bits,
                memory_bits,
            } => write!(
                f,
                "{num_filters} filters x {filter_bits} bits exceed the {memory_bits}-bit budget"
            ),
        }
    }
}

impl Error for PlanError {}

/// The filter bank: `k` bit arrays with maintained ones counts, a stream
/// position, and two seeded generators (insertion acceptance and eviction
/// choices draw from separate sub-streams).
///
/// Single writer: [`FilterBank::process`] needs exclusive access, while
/// [`FilterBank::probe`] and the read-only accessors never mutate.
#[derive(Debug, Clone)]
pub struct FilterBank {
    plan: FilterPlan,
    filters: Vec<BitSet>,
    ones: Vec<u64>,
    elements_seen: u64,
    hash_seed: u64,
    accept_rng: ChaCha8Rng,
    evict_rng: ChaCha8Rng,
}

impl FilterBank {
    /// Fresh all-zero bank. Sub-seeds for hashing, acceptance draws and
    /// eviction draws are derived from `master_seed` by name.
    pub fn new(plan: FilterPlan, master_seed: u64) -> Self {
        let filters = (0..plan.num_filters)
            .map(|_| BitSet::new(plan.filter_bits))
            .collect();
        FilterBank {
            plan,
            filters,
            ones: vec![0; plan.num_filters as usize],
            elements_seen: 0,
            hash_seed: hashing::derive_seed(master_seed, domains::HASHING),
            accept_rng: ChaCha8Rng::seed_from_u64(hashing::derive_seed(
                master_seed,
                domains::RESERVOIR,
            )),
            evict_rng: ChaCha8Rng::seed_from_u64(hashing::derive_seed(
                master_seed,
                domains::DELETIONS,
            )),
        }
    }

    pub fn plan(&self) -> &FilterPlan {
        &self.plan
    }

    pub fn elements_seen(&self) -> u64 {
        self.elements_seen
    }

    /// Maintained per-filter set-bit counts.
    pub fn ones_counts(&self) -> &[u64] {
        &self.ones
    }

    /// Mean fraction of set bits across the filters.
    pub fn ones_fraction(&self) -> f64 {
        let total: u64 = self.ones.iter().sum();
        total as f64 / (self.plan.num_filters as u64 * self.plan.filter_bits) as f64
    }

    /// Probe without mutating: duplicate iff the element's bit is set in
    /// every filter.
    pub fn probe(&self, element: &[u8]) -> Verdict {
        let digest = hashing::digest(element, self.hash_seed);
        self.probe_digest(digest)
    }

    fn probe_digest(&self, digest: hashing::ElementDigest) -> Verdict {
        let all_set = hashing::positions(digest, self.plan.num_filters, self.plan.filter_bits)
            .enumerate()
            .all(|(j, pos)| self.filters[j].get(pos));
        if all_set {
            Verdict::Duplicate
        } else {
            Verdict::Distinct
        }
    }

    /// One full processing step: probe, then insert by reservoir
    /// probability (with one random reset per filter after the fill
    /// phase), or force-insert a distinct element once the insert
    /// probability sits below `p*`.
    pub fn process(&mut self, element: &[u8]) -> Decision {
        let i = self.elements_seen + 1;
        let s = self.plan.filter_bits;
        let digest = hashing::digest(element, self.hash_seed);
        let verdict = self.probe_digest(digest);

        let u: f64 = self.accept_rng.random();
        let insert_prob = s as f64 / i as f64;
        let mut inserted = false;

        if i <= s || u <= insert_prob {
            for (j, pos) in hashing::positions(digest, self.plan.num_filters, s).enumerate() {
                if i > s {
                    // Uniform over all s positions; resetting an already
                    // clear bit is a no-op, and the element's own position
                    // is never the victim.
                    let victim = self.evict_rng.random_range(0..s);
                    if victim != pos && self.filters[j].clear(victim) {
                        self.ones[j] -= 1;
                    }
                }
                if self.filters[j].set(pos) {
                    self.ones[j] += 1;
                }
            }
            inserted = true;
        } else if insert_prob < self.plan.p_star && verdict == Verdict::Distinct {
            for (j, pos) in hashing::positions(digest, self.plan.num_filters, s).enumerate() {
                if self.filters[j].get(pos) {
                    continue;
                }
                if self.ones[j] > 0 {
                    // Swap a uniformly chosen set bit for the element's
                    // bit; the ones count is unchanged.
                    let rank = self.evict_rng.random_range(0..self.ones[j]);
                    let victim = self.filters[j]
                        .select_set_bit(rank)
                        .expect("rank is below the maintained ones count");
                    self.filters[j].clear(victim);
                    self.filters[j].set(pos);
                } else {
                    self.filters[j].set(pos);
                    self.ones[j] += 1;
                }
                inserted = true;
            }
        }

        self.elements_seen = i;
        Decision { verdict, inserted }
    }

    /// Serialize the complete bank state (layout, stream position, both
    /// RNG states, bit arrays) into the documented byte format.
    pub fn snapshot(&self) -> Vec<u8> {
        let words_per_filter = self.plan.filter_bits.div_ceil(64) as usize;
        let mut out =
            Vec::with_capacity(SNAPSHOT_HEADER_LEN + self.filters.len() * words_per_filter * 8);
        out.extend_from_slice(&SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&self.plan.memory_bits.to_le_bytes());
        out.extend_from_slice(&self.plan.num_filters.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&self.plan.filter_bits.to_le_bytes());
        out.extend_from_slice(&self.plan.fpr_threshold.to_bits().to_le_bytes());
        out.extend_from_slice(&self.plan.p_star.to_bits().to_le_bytes());
        out.extend_from_slice(&self.elements_seen.to_le_bytes());
        out.extend_from_slice(&self.hash_seed.to_le_bytes());
        out.extend_from_slice(&self.accept_rng.get_seed());
        out.extend_from_slice(&self.accept_rng.get_word_pos().to_le_bytes());
        out.extend_from_slice(&self.evict_rng.get_seed());
        out.extend_from_slice(&self.evict_rng.get_word_pos().to_le_bytes());
        for filter in &self.filters {
            for word in filter.words() {
                out.extend_from_slice(&word.to_le_bytes());
            }
        }
        out
    }

    /// Rebuild a bank from [`FilterBank::snapshot`] bytes. The result is
    /// bit- and RNG-state-identical to the snapshotted bank; ones counts
    /// are recounted from the bit arrays.
    pub fn restore(bytes: &[u8]) -> Result<Self, SnapshotError> {
        if bytes.len() < SNAPSHOT_HEADER_LEN {
            return Err(SnapshotError::Truncated);
        }
        if bytes[0..4] != SNAPSHOT_MAGIC {
            return Err(SnapshotError::BadMagic);
        }
        let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
        if version != SNAPSHOT_VERSION {
            return Err(SnapshotError::UnsupportedVersion(version));
        }
        let memory_bits = read_u64(bytes, 8);
        let num_filters = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
        let filter_bits = read_u64(bytes, 24);
        let fpr_threshold = f64::from_bits(read_u64(bytes, 32));
        let p_star = f64::from_bits(read_u64(bytes, 40));
        let elements_seen = read_u64(bytes, 48);
        let hash_seed = read_u64(bytes, 56);

        let plan = FilterPlan::new(memory_bits, num_filters, filter_bits, fpr_threshold, p_star)
            .map_err(SnapshotError::InvalidPlan)?;

        let accept_rng = read_rng(bytes, 64);
        let evict_rng = read_rng(bytes, 112);

        // Wide arithmetic: a crafted header can claim layouts whose byte
        // size overflows usize.
        let words_per_filter = filter_bits.div_ceil(64);
        let expected =
            SNAPSHOT_HEADER_LEN as u128 + num_filters as u128 * words_per_filter as u128 * 8;
        if bytes.len() as u128 != expected {
            return Err(SnapshotError::LengthMismatch {
                expected,
                found: bytes.len() as u128,
            });
        }
        let words_per_filter = words_per_filter as usize;

        let mut filters = Vec::with_capacity(num_filters as usize);
        let mut ones = Vec::with_capacity(num_filters as usize);
        let mut offset = SNAPSHOT_HEADER_LEN;
        for _ in 0..num_filters {
            let words: Vec<u64> = (0..words_per_filter)
                .map(|w| read_u64(bytes, offset + w * 8))
                .collect();
            offset += words_per_filter * 8;
            let filter =
                BitSet::from_words(words, filter_bits).ok_or(SnapshotError::StrayTailBits)?;
            ones.push(filter.count_ones());
            filters.push(filter);
        }

        Ok(FilterBank {
            plan,
            filters,
            ones,
            elements_seen,
            hash_seed,
            accept_rng,
            evict_rng,
        })
    }
}

fn read_u64(bytes: &[u8], offset: usize) -> u64 {
    u64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap())
}

fn read_rng(bytes: &[u8], offset: usize) -> ChaCha8Rng {
    let seed: [u8; 32] = bytes[offset..offset + 32].try_into().unwrap();
    let word_pos = u128::from_le_bytes(bytes[offset + 32..offset + 48].try_into().unwrap());
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_word_pos(word_pos);
    rng
}

impl DedupFilter for FilterBank {
    fn process(&mut self, element: &[u8]) -> Decision {
        FilterBank::process(self, element)
    }

    fn ones_total(&self) -> u64 {
        self.ones.iter().sum()
    }

    fn algorithm(&self) -> &'static str {
        "rsbf"
    }

    fn params(&self) -> Vec<(&'static str, String)> {
        vec![
            ("k", self.plan.num_filters.to_string()),
            ("s", self.plan.filter_bits.to_string()),
        ]
    }
}

/// Why a snapshot could not be restored.
#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotError {
    Truncated,
    BadMagic,
    UnsupportedVersion(u16),
    InvalidPlan(PlanError),
    LengthMismatch { expected: u128, found: u128 },
    StrayTailBits,
}

impl fmt::Display for SnapshotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SnapshotError::Truncated => write!(f, "snapshot shorter than its header"),
            SnapshotError::BadMagic => write!(f, "snapshot magic mismatch"),
            SnapshotError::UnsupportedVersion(v) => write!(f, "unsupported snapshot version {v}"),
            SnapshotError::InvalidPlan(e) => write!(f, "snapshot header invalid: {e}"),
            SnapshotError::LengthMismatch { expected, found } => {
                write!(
                    f,
                    "snapshot length {found} does not match header ({expected} expected)"
                )
            }
            SnapshotError::StrayTailBits => write!(f, "bits set beyond the filter length"),
        }
    }
}

impl Error for SnapshotError {}
