//! Acceptance suite: one test per criterion, each printing a
//! `ACCEPTANCE <n> <name>: PASS/FAIL` line (visible with
//! `cargo test --test acceptance -- --nocapture`).
//!
//! Reference accuracy numbers are desk-scale reproductions with fixed
//! tolerances and fixed seeds; timing gates use generous wall-clock
//! budgets so they hold on slow machines.

use std::collections::HashSet;
use std::process::Command;
use std::time::{Duration, Instant};

use rsbf_core::baselines::{ClassicBloom, SbfBank};
use rsbf_core::harness::{
    evaluate, solve_universe, GeneratedStream, MetricsWindow, StreamSpec, Universe,
};
use rsbf_core::rsbf::{plan, FilterBank, FilterPlan};
use rsbf_core::theory;
use rsbf_core::{DedupFilter, Verdict};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn verdict_word(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Evaluate one filter over a generated stream and return the summary row.
fn run_summary(
    filter: &mut dyn DedupFilter,
    length: u64,
    universe: Universe,
    seed: u64,
) -> MetricsWindow {
    let spec = StreamSpec {
        length,
        universe,
        seed,
    };
    let rows = evaluate(filter, &mut GeneratedStream::new(spec), 1000, seed).unwrap();
    *rows.last().unwrap()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Criterion 1: 100K records at 76% distinct, 16384-bit budget. The mean
/// false negative rate over five seeds lands within 0.845 +/- 0.03 and
/// the false positive rate within 0.112 +/- 0.02, in under five seconds.
#[test]
fn criterion_01_small_memory_accuracy() {
    let started = Instant::now();
    let universe = solve_universe(100_000, 0.76).unwrap();
    let mut fnrs = Vec::new();
    let mut fprs = Vec::new();
    for seed in SEEDS {
        let mut bank = FilterBank::new(plan(16384, 0.1, 0.03).unwrap(), seed);
        let summary = run_summary(&mut bank, 100_000, universe, seed);
        fnrs.push(summary.cum_fnr);
        fprs.push(summary.cum_fpr);
    }
    let elapsed = started.elapsed();
    let (fnr, fpr) = (mean(&fnrs), mean(&fprs));
    let ok = (fnr - 0.845).abs() <= 0.03
        && (fpr - 0.112).abs() <= 0.02
        && elapsed < Duration::from_secs(5);
    println!(
        "ACCEPTANCE 01 small-memory-accuracy: {} (mean cum_fnr={fnr:.4} target 0.845+/-0.03, \
         mean cum_fpr={fpr:.4} target 0.112+/-0.02, elapsed {elapsed:.2?} limit 5s)",
        verdict_word(ok)
    );
    assert!(
        (fnr - 0.845).abs() <= 0.03,
        "cum_fnr {fnr:.4} outside 0.845 +/- 0.03"
    );
    assert!(
        (fpr - 0.112).abs() <= 0.02,
        "cum_fpr {fpr:.4} outside 0.112 +/- 0.02"
    );
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
}

/// Criterion 2: the same streams with a 4194304-bit budget. The false
/// positive gate (<= 0.0005) holds. The reference false negative band
/// 0.063 +/- 0.02 is structurally unreachable here and the assertion is
/// expected to fail: with s = 1398101 > 100000, the whole stream sits in
/// the always-insert fill phase, no bit is ever reset (the behaviour
/// criterion 6 pins), so no false negative can occur and the measured
/// rate is exactly 0.
#[test]
fn criterion_02_large_memory_accuracy() {
    let started = Instant::now();
    let universe = solve_universe(100_000, 0.76).unwrap();
    let mut fnrs = Vec::new();
    let mut fprs = Vec::new();
    for seed in SEEDS {
        let mut bank = FilterBank::new(plan(4_194_304, 0.1, 0.03).unwrap(), seed);
        let summary = run_summary(&mut bank, 100_000, universe, seed);
        fnrs.push(summary.cum_fnr);
        fprs.push(summary.cum_fpr);
    }
    let elapsed = started.elapsed();
    let (fnr, fpr) = (mean(&fnrs), mean(&fprs));
    let fnr_ok = (fnr - 0.063).abs() <= 0.02;
    let ok = fnr_ok && fpr <= 0.0005 && elapsed < Duration::from_secs(5);
    println!(
        "ACCEPTANCE 02 large-memory-accuracy: {} (mean cum_fnr={fnr} target 0.063+/-0.02, \
         mean cum_fpr={fpr:.6} limit 0.0005, elapsed {elapsed:.2?} limit 5s)",
        verdict_word(ok)
    );
    assert!(fpr <= 0.0005, "cum_fpr {fpr:.6} above 0.0005");
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    assert!(
        fnr_ok,
        "cum_fnr {fnr} outside 0.063 +/- 0.02; unreachable by construction: s=1398101 \
         exceeds the 100000-record stream, every element is always inserted during the \
         fill phase and nothing is ever reset, so false negatives cannot occur at this \
         memory size (see criterion 6, which requires exactly that no-reset behaviour)"
    );
}

/// Criterion 3: 10M records at 49% distinct, 16384-bit budget, within
/// 0.875 +/- 0.03 false negatives and 0.125 +/- 0.02 false positives,
/// in under two minutes.
#[test]
fn criterion_03_ten_million_record_accuracy() {
    let started = Instant::now();
    let universe = solve_universe(10_000_000, 0.49).unwrap();
    let mut bank = FilterBank::new(plan(16384, 0.1, 0.03).unwrap(), 1);
    let summary = run_summary(&mut bank, 10_000_000, universe, 1);
    let elapsed = started.elapsed();
    let (fnr, fpr) = (summary.cum_fnr, summary.cum_fpr);
    let distinct_fraction = summary.window_true_distinct as f64 / 10_000_000.0;
    let ok = (fnr - 0.875).abs() <= 0.03
        && (fpr - 0.125).abs() <= 0.02
        && elapsed < Duration::from_secs(120);
    println!(
        "ACCEPTANCE 03 ten-million-record-accuracy: {} (cum_fnr={fnr:.4} target 0.875+/-0.03, \
         cum_fpr={fpr:.4} target 0.125+/-0.02, distinct fraction {distinct_fraction:.4}, \
         elapsed {elapsed:.2?} limit 120s)",
        verdict_word(ok)
    );
    assert!(
        (distinct_fraction - 0.49).abs() < 0.01,
        "stream missed its 49% distinct label: {distinct_fraction:.4}"
    );
    assert!(
        (fnr - 0.875).abs() <= 0.03,
        "cum_fnr {fnr:.4} outside 0.875 +/- 0.03"
    );
    assert!(
        (fpr - 0.125).abs() <= 0.02,
        "cum_fpr {fpr:.4} outside 0.125 +/- 0.02"
    );
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
}

/// Criterion 4: the planner solves FPR_t = 0.1 to k_raw = 5.020 +/- 0.001
/// and picks k = 3.
#[test]
fn criterion_04_parameter_planner() {
    let k_raw = theory::plan_k_raw(0.1);
    let layout = plan(16384, 0.1, 0.03).unwrap();
    let ok = (k_raw - 5.020).abs() <= 0.001 && layout.num_filters() == 3;
    println!(
        "ACCEPTANCE 04 parameter-planner: {} (k_raw={k_raw:.6} target 5.020+/-0.001, k={})",
        verdict_word(ok),
        layout.num_filters()
    );
    assert!((k_raw - 5.020).abs() <= 0.001);
    assert_eq!(layout.num_filters(), 3);
}

/// Criterion 5: over one million processed elements, no per-filter ones
/// count ever moves by more than one in a single step.
#[test]
fn criterion_05_step_invariant() {
    // Small filters with a high p* exercise fill, reservoir and
    // force-insert paths within the million calls.
    let layout = FilterPlan::new(300, 3, 100, 0.1, 0.2).unwrap();
    let mut bank = FilterBank::new(layout, 11);
    let spec = StreamSpec {
        length: 1_000_000,
        universe: Universe::Uniform(400),
        seed: 11,
    };
    let mut stream = GeneratedStream::new(spec);
    let mut prev = bank.ones_counts().to_vec();
    let mut violations = 0u64;
    let mut calls = 0u64;
    while let Some(element) = stream_next(&mut stream) {
        bank.process(&element);
        calls += 1;
        for (prev, &now) in prev.iter_mut().zip(bank.ones_counts()) {
            if (now as i64 - *prev as i64).abs() > 1 {
                violations += 1;
            }
            *prev = now;
        }
    }
    let ok = violations == 0 && calls == 1_000_000;
    println!(
        "ACCEPTANCE 05 step-invariant: {} ({calls} calls, {violations} violations)",
        verdict_word(ok)
    );
    assert_eq!(calls, 1_000_000);
    assert_eq!(violations, 0);
}

fn stream_next(stream: &mut GeneratedStream) -> Option<[u8; 8]> {
    use rsbf_core::harness::ElementSource;
    stream
        .next_element()
        .unwrap()
        .map(|e| e.try_into().unwrap())
}

/// Criterion 6: a thousand random duplicate-bearing streams of length s
/// show zero false negatives at every prefix.
#[test]
fn criterion_06_zero_early_false_negatives() {
    let s = 512u64;
    let layout = FilterPlan::new(2 * s, 2, s, 0.1, 0.03).unwrap();
    let mut total_duplicates = 0u64;
    for stream_seed in 0..1000u64 {
        let mut bank = FilterBank::new(layout, stream_seed);
        let spec = StreamSpec {
            length: s,
            universe: Universe::Uniform(128),
            seed: stream_seed,
        };
        let mut stream = GeneratedStream::new(spec);
        let mut seen: HashSet<[u8; 8]> = HashSet::new();
        let mut index = 0u64;
        while let Some(element) = stream_next(&mut stream) {
            index += 1;
            let duplicate = !seen.insert(element);
            let decision = bank.process(&element);
            if duplicate {
                total_duplicates += 1;
                assert_eq!(
                    decision.verdict,
                    Verdict::Duplicate,
                    "false negative at prefix {index} of stream {stream_seed}"
                );
            }
        }
    }
    println!(
        "ACCEPTANCE 06 zero-early-false-negatives: PASS (1000 streams of length {s}, \
         {total_duplicates} duplicates, 0 false negatives)"
    );
    assert!(
        total_duplicates > 100_000,
        "streams were not duplicate-heavy enough"
    );
}

// ---------------------------------------------------------------------
// Criterion 7 machinery: drive the real reservoir step from a pinned
// occupancy by hand-building snapshot bytes (the documented format), so
// each trial measures one step of the shipped dynamics.
// ---------------------------------------------------------------------

const TEMPLATE_HASH_SEED: u64 = 0x5EED;

fn occupancy_template(s: u64, ones: u64, elements_seen: u64) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"RSBF");
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&s.to_le_bytes()); // memory_bits
    out.extend_from_slice(&1u32.to_le_bytes()); // k = 1
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&s.to_le_bytes());
    out.extend_from_slice(&0.1f64.to_bits().to_le_bytes());
    out.extend_from_slice(&1e-12f64.to_bits().to_le_bytes()); // p* never fires
    out.extend_from_slice(&elements_seen.to_le_bytes());
    out.extend_from_slice(&TEMPLATE_HASH_SEED.to_le_bytes());
    out.extend_from_slice(&[0u8; 48]); // accept rng, patched per trial
    out.extend_from_slice(&[0u8; 48]); // evict rng, patched per trial
    let words = s.div_ceil(64);
    for w in 0..words {
        let word = match (ones / 64).cmp(&w) {
            std::cmp::Ordering::Greater => u64::MAX,
            std::cmp::Ordering::Equal => (1u64 << (ones % 64)) - 1,
            std::cmp::Ordering::Less => 0,
        };
        out.extend_from_slice(&word.to_le_bytes());
    }
    out
}

fn patch_rng_seeds(template: &mut [u8], trial: u64) {
    use rand::SeedableRng;
    let accept = rand_seed_bytes(0xACCE_5500_0000_0000 ^ trial);
    let evict = rand_seed_bytes(0xE51C_7700_0000_0000 ^ trial);
    template[64..96].copy_from_slice(&accept);
    template[96..112].copy_from_slice(&0u128.to_le_bytes());
    template[112..144].copy_from_slice(&evict);
    template[144..160].copy_from_slice(&0u128.to_le_bytes());

    fn rand_seed_bytes(seed: u64) -> [u8; 32] {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed).get_seed()
    }
}

struct MonteCarloPoint {
    occupancy: u64,
    insert_prob: f64,
    mean: f64,
    mean_target: f64,
    mean_se: f64,
    variance: f64,
    variance_target: f64,
    variance_se: f64,
}

fn one_step_trials(s: u64, occupancy: u64, insert_prob: f64, trials: u64) -> MonteCarloPoint {
    let position = (s as f64 / insert_prob).round() as u64;
    assert_eq!(
        s as f64 / position as f64,
        insert_prob,
        "i must hit p exactly"
    );
    let template = occupancy_template(s, occupancy, position - 1);

    let mut deltas = Vec::with_capacity(trials as usize);
    let mut bytes = template;
    for trial in 0..trials {
        patch_rng_seeds(&mut bytes, trial);
        let mut bank = FilterBank::restore(&bytes).expect("template restores");
        debug_assert_eq!(bank.ones_counts()[0], occupancy);
        bank.process(&trial.to_le_bytes());
        deltas.push(bank.ones_counts()[0] as f64 - occupancy as f64);
    }

    let n = trials as f64;
    let mean = deltas.iter().sum::<f64>() / n;
    let variance = deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    let fourth = deltas.iter().map(|d| (d - mean).powi(4)).sum::<f64>() / n;

    let step = theory::expected_ones_step(occupancy as f64, s, insert_prob);
    let beta = occupancy as f64 / s as f64;
    MonteCarloPoint {
        occupancy,
        insert_prob,
        mean,
        mean_target: insert_prob * step.epsilon,
        mean_se: (variance / n).sqrt(),
        variance,
        variance_target: theory::ones_variance(beta, insert_prob),
        variance_se: ((fourth - variance * variance) / n).sqrt(),
    }
}

/// Criterion 7: Monte-Carlo over the reservoir step at s = 4096. The
/// empirical mean one-step ones change matches `p * epsilon` within three
/// standard errors at every grid point. The closed-form variance target
/// `p(beta^2 + (beta-1)^2) - p^2` is also asserted; its `-p^2` term
/// presumes the drift term epsilon is 1, which is false away from an
/// empty filter, so at the larger insert probabilities the true one-step
/// variance (`E[X^2] - (p*epsilon)^2`) sits far above the target and
/// those grid points are expected to fail.
#[test]
fn criterion_07_stability_monte_carlo() {
    const TRIALS: u64 = 100_000;
    let mut mean_failures = Vec::new();
    let mut variance_failures = Vec::new();
    for occupancy in [1024u64, 2048, 3072] {
        for insert_prob in [0.5, 0.1, 0.01] {
            let point = one_step_trials(4096, occupancy, insert_prob, TRIALS);
            let mean_ok = (point.mean - point.mean_target).abs() <= 3.0 * point.mean_se;
            let var_ok = (point.variance - point.variance_target).abs() <= 3.0 * point.variance_se;
            println!(
                "ACCEPTANCE 07 stability-monte-carlo point lambda={} p={}: mean {} \
                 (got {:+.6}, want {:+.6}, se {:.6}); variance {} (got {:.6}, want {:.6}, se {:.6})",
                point.occupancy,
                point.insert_prob,
                verdict_word(mean_ok),
                point.mean,
                point.mean_target,
                point.mean_se,
                verdict_word(var_ok),
                point.variance,
                point.variance_target,
                point.variance_se,
            );
            if !mean_ok {
                mean_failures.push((point.occupancy, point.insert_prob));
            }
            if !var_ok {
                variance_failures.push((point.occupancy, point.insert_prob));
            }
        }
    }
    let ok = mean_failures.is_empty() && variance_failures.is_empty();
    println!(
        "ACCEPTANCE 07 stability-monte-carlo: {} (mean failures {:?}, variance failures {:?})",
        verdict_word(ok),
        mean_failures,
        variance_failures
    );
    assert!(
        mean_failures.is_empty(),
        "mean drift off at {mean_failures:?}"
    );
    assert!(
        variance_failures.is_empty(),
        "variance target missed at {variance_failures:?}; the target's -p^2 term assumes \
         epsilon = 1, but at these occupancies epsilon is near 1 - 2*lambda/s, so the \
         measured one-step variance of the pinned dynamics exceeds it by roughly \
         p^2*(1 - epsilon^2); the mean column confirms the implemented step follows the \
         intended transition probabilities exactly"
    );
}

/// Criterion 8: the classic Bloom baseline never reports a false negative
/// on a 100K stream, and its measured FPR tracks `(1 - e^(-kn/m))^k`
/// within 20% relative for m/n in {4, 8, 16}.
#[test]
fn criterion_08_classic_bloom_oracle_equivalence() {
    let universe = solve_universe(100_000, 0.5).unwrap();
    let mut bloom = ClassicBloom::new(1 << 17, 5, 21);
    let summary = run_summary(&mut bloom, 100_000, universe, 21);
    let fn_ok = summary.window_fn == 0;
    println!(
        "ACCEPTANCE 08 classic-bloom-no-false-negatives: {} ({} duplicates, {} false negatives)",
        verdict_word(fn_ok),
        summary.window_true_duplicate,
        summary.window_fn
    );
    assert!(summary.window_true_duplicate > 10_000);
    assert_eq!(summary.window_fn, 0);

    let inserted = 20_000u64;
    let probes = 400_000u64;
    for ratio in [4u64, 8, 16] {
        let bits = ratio * inserted;
        let hashes = theory::optimal_k(bits, inserted).round() as u32;
        let mut filter = ClassicBloom::new(bits, hashes, 0xB100 + ratio);
        for value in 0..inserted {
            filter.process(&value.to_le_bytes());
        }
        let mut false_positives = 0u64;
        for probe in 0..probes {
            if filter.probe(&(inserted + probe).to_le_bytes()) == Verdict::Duplicate {
                false_positives += 1;
            }
        }
        let observed = false_positives as f64 / probes as f64;
        let predicted = theory::classic_fpr(inserted, bits, hashes);
        let relative = (observed - predicted).abs() / predicted;
        let ok = relative < 0.2;
        println!(
            "ACCEPTANCE 08 classic-bloom-fpr m/n={ratio} k={hashes}: {} \
             (observed {observed:.6}, predicted {predicted:.6}, relative error {relative:.3})",
            verdict_word(ok)
        );
        assert!(
            relative < 0.2,
            "m/n={ratio}: observed {observed:.6} vs predicted {predicted:.6}"
        );
    }
}

/// Criterion 9: on a 3M-record stream with 16384 bits, the per-1K-window
/// ones drift settles below 0.5% of the total bit count before the
/// millionth record and stays there.
#[test]
fn criterion_09_convergence() {
    let layout = plan(16384, 0.1, 0.03).unwrap();
    let slots = layout.num_filters() as u64 * layout.filter_bits();
    let threshold = 0.005 * slots as f64;
    let universe = solve_universe(3_000_000, 0.76).unwrap();
    let mut bank = FilterBank::new(layout, 1);
    let spec = StreamSpec {
        length: 3_000_000,
        universe,
        seed: 1,
    };
    let rows = evaluate(&mut bank, &mut GeneratedStream::new(spec), 1000, 1).unwrap();
    let windows: Vec<&MetricsWindow> = rows.iter().filter(|r| !r.summary).collect();

    // Earliest window after which the drift never re-crosses the bound.
    let mut crossing = None;
    for start in 0..windows.len() {
        if windows[start..]
            .iter()
            .all(|w| (w.ones_delta.abs() as f64) < threshold)
        {
            crossing = Some(windows[start].end_index);
            break;
        }
    }
    let ok = matches!(crossing, Some(index) if index <= 1_000_000);
    println!(
        "ACCEPTANCE 09 convergence: {} (|ones_delta| < {threshold:.1} bits per 1K window \
         from record {crossing:?} onward, limit 1000000)",
        verdict_word(ok)
    );
    let crossing = crossing.expect("ones drift never settled");
    assert!(crossing <= 1_000_000, "settled only at record {crossing}");
}

/// Criterion 10 (advisory, not gating): comparative direction against the
/// reconstructed eviction baseline on a 10M-record stream with 15%
/// distinct records, at two matched memory budgets.
#[test]
fn criterion_10_comparative_direction_advisory() {
    let universe = solve_universe(10_000_000, 0.15).unwrap();
    for memory_bits in [16384u64, 4_194_304] {
        let layout = plan(memory_bits, 0.1, 0.03).unwrap();
        let mut bank = FilterBank::new(layout, 1);
        let rsbf_summary = run_summary(&mut bank, 10_000_000, universe, 1);

        let hashes = layout.num_filters();
        let decrements = SbfBank::default_decrements(hashes, 3);
        let mut sbf = SbfBank::new(memory_bits, hashes, 3, decrements, 1);
        let sbf_summary = run_summary(&mut sbf, 10_000_000, universe, 1);

        let direction_holds = rsbf_summary.cum_fnr < sbf_summary.cum_fnr;
        println!(
            "ACCEPTANCE 10 comparative-direction (ADVISORY) M={memory_bits}: {} \
             (rsbf cum_fnr={:.4} fpr={:.4}; sbf cum_fnr={:.4} fpr={:.4}; baseline is a \
             best-effort reconstruction, not gating)",
            if direction_holds {
                "holds"
            } else {
                "does not hold"
            },
            rsbf_summary.cum_fnr,
            rsbf_summary.cum_fpr,
            sbf_summary.cum_fnr,
            sbf_summary.cum_fpr,
        );
    }
    println!("ACCEPTANCE 10 comparative-direction: PASS (advisory only, outcomes logged above)");
}

/// Criterion 11: identical seeds give byte-identical CSV reports.
#[test]
fn criterion_11_deterministic_reports() {
    let dir = tempfile::tempdir().unwrap();
    let run_args = |report: &str| {
        vec![
            "run".to_string(),
            "--algo".into(),
            "rsbf".into(),
            "--memory-bits".into(),
            "16384".into(),
            "--fpr".into(),
            "0.1".into(),
            "--gen-length".into(),
            "20000".into(),
            "--gen-distinct".into(),
            "0.76".into(),
            "--seed".into(),
            "9".into(),
            "--report".into(),
            report.into(),
        ]
    };
    for report in ["a.csv", "b.csv"] {
        let out = Command::new(env!("CARGO_BIN_EXE_rsbf"))
            .args(run_args(report))
            .current_dir(dir.path())
            .env_remove("RSBF_SEED")
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    let ok = a == b && !a.is_empty();
    println!(
        "ACCEPTANCE 11 deterministic-reports: {} ({} byte reports identical)",
        verdict_word(ok),
        a.len()
    );
    assert!(!a.is_empty());
    assert_eq!(a, b);
}
