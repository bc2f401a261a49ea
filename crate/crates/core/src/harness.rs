//! Stream generation, file ingestion, exact ground truth, and windowed
//! accuracy measurement.
//!
//! [`evaluate`] replays a stream through a filter and an exact-membership
//! oracle in lockstep and emits one [`MetricsWindow`] per `window_size`
//! records plus a final summary row. A false positive is a truly distinct
//! element judged duplicate; a false negative is a truly duplicate element
//! judged distinct. Cumulative rates are conditional: false positives over
//! true-distinct count, false negatives over true-duplicate count.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::error::Error;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decision::{DedupFilter, Verdict};
use crate::hashing::{self, domains};

/// Where stream elements come from: uniform draws over `{0..U-1}`, or a
/// draw-without-replacement stream in which every element is distinct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Universe {
    Uniform(u64),
    AllDistinct,
}

impl fmt::Display for Universe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Universe::Uniform(u) => write!(f, "{u}"),
            Universe::AllDistinct => write!(f, "all-distinct"),
        }
    }
}

/// Description of a synthetic stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamSpec {
    pub length: u64,
    pub universe: Universe,
    pub seed: u64,
}

/// Expected fraction of distinct elements when `length` elements are drawn
/// uniformly from a universe of size `universe`:
/// `(U/m) * (1 - (1 - 1/U)^m)`.
pub fn expected_distinct_fraction(universe: u64, length: u64) -> f64 {
    assert!(universe >= 1 && length >= 1);
    let m = length as f64;
    let u = universe as f64;
    let dup_free = (m * (-1.0 / u).ln_1p()).exp();
    (u / m) * (1.0 - dup_free)
}

/// Problems with a requested stream parameterization.
#[derive(Debug, Clone, PartialEq)]
pub enum HarnessError {
    FractionOutOfRange(f64),
    FractionUnreachable(f64),
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::FractionOutOfRange(d) => {
                write!(f, "distinct fraction {d} must lie in (0, 1]")
            }
            HarnessError::FractionUnreachable(d) => {
                write!(
                    f,
                    "no finite universe reaches distinct fraction {d}; use 1.0"
                )
            }
        }
    }
}

impl Error for HarnessError {}

/// Smallest universe whose expected distinct fraction reaches `fraction`,
/// found by bisection over the monotone expectation. `fraction == 1`
/// returns the without-replacement sentinel.
pub fn solve_universe(length: u64, fraction: f64) -> Result<Universe, HarnessError> {
    assert!(length >= 1, "length must be >= 1");
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(HarnessError::FractionOutOfRange(fraction));
    }
    if fraction == 1.0 {
        return Ok(Universe::AllDistinct);
    }
    let mut hi = 1u64;
    while expected_distinct_fraction(hi, length) < fraction {
        if hi >= 1 << 62 {
            return Err(HarnessError::FractionUnreachable(fraction));
        }
        hi *= 2;
    }
    let mut lo = 1u64;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if expected_distinct_fraction(mid, length) >= fraction {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Universe::Uniform(lo))
}

/// A stream of borrowed element byte slices. `Ok(None)` marks the end.
pub trait ElementSource {
    fn next_element(&mut self) -> io::Result<Option<&[u8]>>;
}

/// Deterministic synthetic stream of fixed-width 8-byte little-endian
/// records.
pub struct GeneratedStream {
    remaining: u64,
    index: u64,
    mode: GenMode,
    buf: [u8; 8],
}

enum GenMode {
    Uniform { universe: u64, rng: Box<ChaCha8Rng> },
    AllDistinct { seed: u64 },
}

impl GeneratedStream {
    pub fn new(spec: StreamSpec) -> Self {
        let mode = match spec.universe {
            Universe::Uniform(u) => {
                assert!(u >= 1, "universe must be >= 1");
                GenMode::Uniform {
                    universe: u,
                    rng: Box::new(ChaCha8Rng::seed_from_u64(hashing::derive_seed(
                        spec.seed,
                        domains::GENERATOR,
                    ))),
                }
            }
            Universe::AllDistinct => GenMode::AllDistinct { seed: spec.seed },
        };
        GeneratedStream {
            remaining: spec.length,
            index: 0,
            mode,
            buf: [0; 8],
        }
    }
}

impl ElementSource for GeneratedStream {
    fn next_element(&mut self) -> io::Result<Option<&[u8]>> {
        if self.remaining == 0 {
            return Ok(None);
        }
        self.remaining -= 1;
        let value = match &mut self.mode {
            GenMode::Uniform { universe, rng } => rng.random_range(0..*universe),
            // A 64-bit bijection of the index never repeats.
            GenMode::AllDistinct { seed } => mix64(*seed ^ self.index),
        };
        self.index += 1;
        self.buf = value.to_le_bytes();
        Ok(Some(&self.buf))
    }
}

/// SplitMix64 finalizer; a bijection on `u64`.
fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58476d1ce4e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Consecutive 8-byte records; a trailing partial record is an error.
pub struct BinaryRecordSource<R> {
    reader: R,
    buf: [u8; 8],
}

impl<R: Read> BinaryRecordSource<R> {
    pub fn new(reader: R) -> Self {
        BinaryRecordSource {
            reader,
            buf: [0; 8],
        }
    }
}

impl<R: Read> ElementSource for BinaryRecordSource<R> {
    fn next_element(&mut self) -> io::Result<Option<&[u8]>> {
        let mut filled = 0;
        while filled < 8 {
            match self.reader.read(&mut self.buf[filled..])? {
                0 if filled == 0 => return Ok(None),
                0 => {
                    return Err(io::Error::new(
                        io::ErrorKind::UnexpectedEof,
                        format!("trailing partial record of {filled} bytes"),
                    ))
                }
                n => filled += n,
            }
        }
        Ok(Some(&self.buf))
    }
}

/// Newline-delimited records: each line's bytes, without the terminator,
/// is one element. A final line without a newline still counts.
pub struct LineRecordSource<R> {
    reader: R,
    buf: Vec<u8>,
}

impl<R: BufRead> LineRecordSource<R> {
    pub fn new(reader: R) -> Self {
        LineRecordSource {
            reader,
            buf: Vec::new(),
        }
    }
}

impl<R: BufRead> ElementSource for LineRecordSource<R> {
    fn next_element(&mut self) -> io::Result<Option<&[u8]>> {
        self.buf.clear();
        let n = self.reader.read_until(b'\n', &mut self.buf)?;
        if n == 0 {
            return Ok(None);
        }
        if self.buf.last() == Some(&b'\n') {
            self.buf.pop();
        }
        Ok(Some(&self.buf))
    }
}

pub fn open_binary(path: &Path) -> io::Result<BinaryRecordSource<BufReader<File>>> {
    Ok(BinaryRecordSource::new(BufReader::new(File::open(path)?)))
}

pub fn open_lines(path: &Path) -> io::Result<LineRecordSource<BufReader<File>>> {
    Ok(LineRecordSource::new(BufReader::new(File::open(path)?)))
}

/// Exact membership ground truth.
///
/// Elements are keyed by a 64-bit digest; on a digest collision the full
/// bytes are compared, so the answer is exact regardless of hash quality.
/// Short elements are stored inline to keep desk-scale streams cheap.
pub struct ExactOracle {
    hash_seed: u64,
    buckets: HashMap<u64, Bucket>,
    distinct: u64,
}

enum Stored {
    Inline { len: u8, data: [u8; 15] },
    Heap(Box<[u8]>),
}

impl Stored {
    fn new(element: &[u8]) -> Self {
        if element.len() <= 15 {
            let mut data = [0u8; 15];
            data[..element.len()].copy_from_slice(element);
            Stored::Inline {
                len: element.len() as u8,
                data,
            }
        } else {
            Stored::Heap(element.into())
        }
    }

    fn as_slice(&self) -> &[u8] {
        match self {
            Stored::Inline { len, data } => &data[..*len as usize],
            Stored::Heap(b) => b,
        }
    }
}

enum Bucket {
    One(Stored),
    Many(Vec<Stored>),
}

impl ExactOracle {
    pub fn new(master_seed: u64) -> Self {
        ExactOracle {
            hash_seed: hashing::derive_seed(master_seed, domains::ORACLE),
            buckets: HashMap::new(),
            distinct: 0,
        }
    }

    /// Record the element; returns whether it had been seen before.
    pub fn observe(&mut self, element: &[u8]) -> bool {
        let key = hashing::digest(element, self.hash_seed).a();
        match self.buckets.entry(key) {
            Entry::Vacant(slot) => {
                slot.insert(Bucket::One(Stored::new(element)));
                self.distinct += 1;
                false
            }
            Entry::Occupied(mut slot) => {
                let bucket = slot.get_mut();
                let seen = match bucket {
                    Bucket::One(existing) => existing.as_slice() == element,
                    Bucket::Many(all) => all.iter().any(|e| e.as_slice() == element),
                };
                if !seen {
                    self.distinct += 1;
                    match bucket {
                        Bucket::One(existing) => {
                            let moved = std::mem::replace(existing, Stored::new(b""));
                            *bucket = Bucket::Many(vec![moved, Stored::new(element)]);
                        }
                        Bucket::Many(all) => all.push(Stored::new(element)),
                    }
                }
                seen
            }
        }
    }

    pub fn distinct_count(&self) -> u64 {
        self.distinct
    }
}

/// Accuracy and occupancy telemetry for one window of the stream, or the
/// whole stream when `summary` is set (the window fields then hold
/// cumulative totals).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsWindow {
    pub end_index: u64,
    pub window_fp: u64,
    pub window_fn: u64,
    pub window_true_distinct: u64,
    pub window_true_duplicate: u64,
    pub cum_fpr: f64,
    pub cum_fnr: f64,
    pub ones_total: u64,
    pub ones_delta: i64,
    pub summary: bool,
}

/// Replay `source` through `filter` against an exact oracle; returns one
/// row per `window_size` records plus a summary row.
pub fn evaluate(
    filter: &mut dyn DedupFilter,
    source: &mut dyn ElementSource,
    window_size: u64,
    master_seed: u64,
) -> io::Result<Vec<MetricsWindow>> {
    assert!(window_size >= 1, "window_size must be >= 1");
    let mut oracle = ExactOracle::new(master_seed);
    let mut rows = Vec::new();

    let mut index = 0u64;
    let mut window = Tally::default();
    let mut cum = Tally::default();
    let mut prev_ones = filter.ones_total() as i64;

    let mut flush =
        |window: Tally, cum: &Tally, index: u64, ones_total: u64, prev_ones: &mut i64| {
            rows.push(MetricsWindow {
                end_index: index,
                window_fp: window.fp,
                window_fn: window.fneg,
                window_true_distinct: window.distinct,
                window_true_duplicate: window.duplicate,
                cum_fpr: rate(cum.fp, cum.distinct),
                cum_fnr: rate(cum.fneg, cum.duplicate),
                ones_total,
                ones_delta: ones_total as i64 - *prev_ones,
                summary: false,
            });
            *prev_ones = ones_total as i64;
        };

    while let Some(element) = source.next_element()? {
        index += 1;
        let was_seen = oracle.observe(element);
        let decision = filter.process(element);
        window.record(was_seen, decision.verdict);
        cum.record(was_seen, decision.verdict);
        if index.is_multiple_of(window_size) {
            flush(
                std::mem::take(&mut window),
                &cum,
                index,
                filter.ones_total(),
                &mut prev_ones,
            );
        }
    }
    if !index.is_multiple_of(window_size) {
        flush(
            std::mem::take(&mut window),
            &cum,
            index,
            filter.ones_total(),
            &mut prev_ones,
        );
    }

    rows.push(MetricsWindow {
        end_index: index,
        window_fp: cum.fp,
        window_fn: cum.fneg,
        window_true_distinct: cum.distinct,
        window_true_duplicate: cum.duplicate,
        cum_fpr: rate(cum.fp, cum.distinct),
        cum_fnr: rate(cum.fneg, cum.duplicate),
        ones_total: filter.ones_total(),
        ones_delta: 0,
        summary: true,
    });
    Ok(rows)
}

#[derive(Default)]
struct Tally {
    fp: u64,
    fneg: u64,
    distinct: u64,
    duplicate: u64,
}

impl Tally {
    fn record(&mut self, was_seen: bool, verdict: Verdict) {
        match (was_seen, verdict) {
            (false, Verdict::Duplicate) => {
                self.distinct += 1;
                self.fp += 1;
            }
            (false, Verdict::Distinct) => self.distinct += 1,
            (true, Verdict::Distinct) => {
                self.duplicate += 1;
                self.fneg += 1;
            }
            (true, Verdict::Duplicate) => self.duplicate += 1,
        }
    }
}

fn rate(numerator: u64, denominator: u64) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}
