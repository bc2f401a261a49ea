//! The verdict interface shared by every filter in the crate.

use std::fmt;

/// Per-element verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Distinct,
    Duplicate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Distinct => write!(f, "DISTINCT"),
            Verdict::Duplicate => write!(f, "DUPLICATE"),
        }
    }
}

/// Outcome of processing one stream element.
///
/// `verdict` is `Duplicate` iff all probed positions were set at probe
/// time. `inserted` records whether the call wrote any positions for this
/// element (the written values may equal the old ones when the element's
/// bits were already set).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub verdict: Verdict,
    pub inserted: bool,
}

/// A streaming duplicate detector: one decision per element, plus the
/// occupancy telemetry the measurement harness tracks.
pub trait DedupFilter {
    /// Classify the element and update filter state.
    fn process(&mut self, element: &[u8]) -> Decision;

    /// Total set bits (or non-zero cells) across the structure.
    fn ones_total(&self) -> u64;

    /// Short algorithm tag for reports.
    fn algorithm(&self) -> &'static str;

    /// Effective parameters, for self-describing report headers.
    fn params(&self) -> Vec<(&'static str, String)>;
}
