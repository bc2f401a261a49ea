//! Closed-form predictors for filter error rates and convergence.
//!
//! Everything here is a pure function of its arguments. Probability
//! outputs are clamped to `[0, 1]`; where an expression is only meaningful
//! in part of the parameter space, the result carries a `valid` flag
//! instead of rejecting the input, so parameter sweeps never abort
//! half-way.

use std::f64::consts::{E, LN_2};

/// False positive rate of a classic Bloom filter with `n` inserted
/// elements, `m` bits and `k` hash functions: `(1 - e^(-kn/m))^k`.
pub fn classic_fpr(inserted: u64, bits: u64, num_hashes: u32) -> f64 {
    assert!(bits >= 1, "bits must be >= 1");
    assert!(num_hashes >= 1, "num_hashes must be >= 1");
    let exponent = -(num_hashes as f64) * inserted as f64 / bits as f64;
    clamp_probability((1.0 - exponent.exp()).powi(num_hashes as i32))
}

/// Hash count minimizing classic Bloom FPR: `ln 2 * m / n` (unrounded).
pub fn optimal_k(bits: u64, inserted: u64) -> f64 {
    assert!(inserted >= 1, "inserted must be >= 1");
    LN_2 * bits as f64 / inserted as f64
}

/// `ln(FPR_t) / ln(1 - 1/e)`: the filter count at which the early-stream
/// false positive probability equals the requested threshold.
pub fn plan_k_raw(fpr_threshold: f64) -> f64 {
    assert!(
        fpr_threshold > 0.0 && fpr_threshold < 1.0,
        "fpr_threshold must lie in (0, 1)"
    );
    fpr_threshold.ln() / (1.0 - 1.0 / E).ln()
}

/// A probability bound plus a flag telling whether the inputs sat inside
/// the expression's validity range (no clamping was needed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FprBound {
    pub value: f64,
    pub valid: bool,
}

/// Upper bound on the reservoir-filter false positive probability at
/// stream position `m + 1`:
/// `((U-1)/U)^m * [1 - k*s/m + ((1 - 1/e) * s/m)^k]`.
///
/// The bracket can go negative when `m` is not much larger than `k*s`;
/// the result is then clamped to 0 and flagged invalid.
pub fn rsbf_fpr_bound(
    stream_length: u64,
    filter_bits: u64,
    num_filters: u32,
    universe: u64,
) -> FprBound {
    assert!(filter_bits >= 1, "filter_bits must be >= 1");
    assert!(
        stream_length >= filter_bits,
        "stream_length must be >= filter_bits"
    );
    assert!(num_filters >= 1, "num_filters must be >= 1");
    assert!(universe >= 2, "universe must be >= 2");

    let m = stream_length as f64;
    let s = filter_bits as f64;
    let k = num_filters as f64;
    // ((U-1)/U)^m as exp(m * ln(1 - 1/U)) to dodge pow-loop cost and
    // underflow in the base.
    let unique = (m * (-1.0 / universe as f64).ln_1p()).exp();
    let bracket = 1.0 - k * s / m + ((1.0 - 1.0 / E) * s / m).powi(num_filters as i32);
    FprBound {
        value: clamp_probability(unique * bracket),
        valid: bracket >= 0.0,
    }
}

/// A false-negative bound plus its large-stream asymptote `k/U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FnrBound {
    pub value: f64,
    pub asymptote: f64,
    pub valid: bool,
}

/// Upper bound on the reservoir-filter false negative probability at
/// stream position `m + 1`: `k * (m - s) / (U * m)`, tending to `k / U`.
pub fn rsbf_fnr_bound(
    stream_length: u64,
    filter_bits: u64,
    num_filters: u32,
    universe: u64,
) -> FnrBound {
    assert!(filter_bits >= 1, "filter_bits must be >= 1");
    assert!(
        stream_length >= filter_bits,
        "stream_length must be >= filter_bits"
    );
    assert!(num_filters >= 1, "num_filters must be >= 1");
    assert!(universe >= 1, "universe must be >= 1");

    let m = stream_length as f64;
    let s = filter_bits as f64;
    let k = num_filters as f64;
    let raw = k * (m - s) / (universe as f64 * m);
    FnrBound {
        value: clamp_probability(raw),
        asymptote: clamp_probability(k / universe as f64),
        valid: raw <= 1.0,
    }
}

/// One-step drift of the expected ones count under reservoir insertion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnesStep {
    /// `epsilon = 1 - lambda * (2s - 1) / s^2`; always in `[-1, 1]`.
    pub epsilon: f64,
    /// `lambda + p_i * epsilon`.
    pub expected_next: f64,
}

/// Expected ones count after one insertion step, given the current count
/// `ones` in a filter of `filter_bits` bits and insert probability
/// `insert_prob`.
pub fn expected_ones_step(ones: f64, filter_bits: u64, insert_prob: f64) -> OnesStep {
    let s = filter_bits as f64;
    assert!(filter_bits >= 1, "filter_bits must be >= 1");
    assert!((0.0..=s).contains(&ones), "ones must lie in [0, s]");
    assert!(
        (0.0..=1.0).contains(&insert_prob),
        "insert_prob must lie in [0, 1]"
    );

    let epsilon = 1.0 - ones * (2.0 * s - 1.0) / (s * s);
    assert!(epsilon.abs() <= 1.0 + 1e-12, "epsilon out of range");
    OnesStep {
        epsilon,
        expected_next: ones + insert_prob * epsilon,
    }
}

/// Variance of the one-step ones-count change at occupancy fraction
/// `beta`: `p_i * (beta^2 + (beta - 1)^2) - p_i^2`.
pub fn ones_variance(beta: f64, insert_prob: f64) -> f64 {
    assert!((0.0..=1.0).contains(&beta), "beta must lie in [0, 1]");
    assert!(
        (0.0..=1.0).contains(&insert_prob),
        "insert_prob must lie in [0, 1]"
    );
    insert_prob * (beta * beta + (beta - 1.0) * (beta - 1.0)) - insert_prob * insert_prob
}

/// FPR right after the fill phase (first `s` elements), in exact and
/// large-`s` approximate form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialFpr {
    /// `(1 - (1 - 1/s)^s)^k`
    pub exact: f64,
    /// `(1 - 1/e)^k`
    pub approx: f64,
}

pub fn initial_fpr_components(filter_bits: u64, num_filters: u32) -> InitialFpr {
    assert!(filter_bits >= 1, "filter_bits must be >= 1");
    assert!(num_filters >= 1, "num_filters must be >= 1");
    let s = filter_bits as f64;
    let set_prob = 1.0 - (s * (-1.0 / s).ln_1p()).exp();
    InitialFpr {
        exact: clamp_probability(set_prob.powi(num_filters as i32)),
        approx: clamp_probability((1.0 - 1.0 / E).powi(num_filters as i32)),
    }
}

fn clamp_probability(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}
