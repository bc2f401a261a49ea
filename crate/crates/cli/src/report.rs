//! Self-describing CSV reports.
//!
//! Every report opens with `# key=value` comment lines carrying the full
//! run configuration (tool version, hash family, seeds, filter
//! parameters), so a report can be reproduced from its own header. Data
//! rows follow a fixed schema; the final row repeats cumulative totals
//! with `summary=1`. Floats are printed in shortest round-trip form, so
//! identical runs produce byte-identical files.

use std::io::{self, Write};

use rsbf_core::harness::MetricsWindow;

pub const WINDOW_COLUMNS: &str = "end_index,window_fp,window_fn,window_true_distinct,\
window_true_duplicate,cum_fpr,cum_fnr,ones_total,ones_delta,summary";

pub fn write_header(out: &mut dyn Write, entries: &[(String, String)]) -> io::Result<()> {
    for (key, value) in entries {
        writeln!(out, "# {key}={value}")?;
    }
    Ok(())
}

pub fn write_windows(out: &mut dyn Write, rows: &[MetricsWindow]) -> io::Result<()> {
    writeln!(out, "{WINDOW_COLUMNS}")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            row.end_index,
            row.window_fp,
            row.window_fn,
            row.window_true_distinct,
            row.window_true_duplicate,
            row.cum_fpr,
            row.cum_fnr,
            row.ones_total,
            row.ones_delta,
            row.summary as u8,
        )?;
    }
    Ok(())
}

/// One line of human-readable summary from the final report row.
pub fn summary_line(summary: &MetricsWindow) -> String {
    format!(
        "records={} true_distinct={} true_duplicate={} fp={} fn={} cum_fpr={} cum_fnr={} ones={}",
        summary.end_index,
        summary.window_true_distinct,
        summary.window_true_duplicate,
        summary.window_fp,
        summary.window_fn,
        summary.cum_fpr,
        summary.cum_fnr,
        summary.ones_total,
    )
}
