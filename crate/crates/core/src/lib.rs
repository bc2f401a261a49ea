//! Streaming deduplication with a reservoir-sampling Bloom filter.
//!
//! The centerpiece is [`rsbf::FilterBank`]: `k` Bloom filters of `s` bits
//! each, fed by reservoir-probability insertion with random-bit eviction and
//! a probability-floor force-insert path that keeps false negatives in check
//! on long streams. Around it sit comparison baselines ([`baselines`]),
//! closed-form predictors for the filter's error and convergence behaviour
//! ([`theory`]), and a measurement harness ([`harness`]) that replays
//! synthetic or file-backed streams against an exact oracle and reports
//! windowed false-positive/false-negative rates.
//!
//! All randomness is seeded and split into named sub-streams
//! ([`hashing::derive_seed`]), so identical inputs yield identical reports.

pub mod baselines;
pub mod bitset;
pub mod decision;
pub mod harness;
pub mod hashing;
pub mod rsbf;
pub mod theory;

pub use decision::{Decision, DedupFilter, Verdict};
pub use rsbf::{FilterBank, FilterPlan};
