//! Result rows as CSV, with atomic file output.
//!
//! Columns: `axis,value,policy,mean_delay,stderr,trials,truncated,seed`.
//! Reals carry 6 significant digits; `M` and `N` values print as integers;
//! a cell where every trial hit the slot cap has `mean_delay` `nan`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use idnc_core::sim::SweepRow;

pub const HEADER: &str = "axis,value,policy,mean_delay,stderr,trials,truncated,seed";

/// `%g`-style rendering with 6 significant digits.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    // exponent after rounding to 6 digits
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn render(rows: &[SweepRow]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        let value = if r.axis.is_integer() { format!("{}", r.value as u64) } else { format_sig(r.value) };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.axis,
            value,
            r.policy,
            format_sig(r.summary.mean_delay),
            format_sig(r.summary.stderr),
            r.summary.trials,
            r.summary.truncated,
            r.seed
        );
    }
    out
}

/// Human-readable table of the same rows.
pub fn table(rows: &[SweepRow]) -> String {
    let mut out = format!(
        "{:<6}{:>10}  {:<10}{:>12}{:>12}{:>9}{:>11}\n",
        "axis", "value", "policy", "mean_delay", "stderr", "trials", "truncated"
    );
    for r in rows {
        let value = if r.axis.is_integer() { format!("{}", r.value as u64) } else { format_sig(r.value) };
        let _ = writeln!(
            out,
            "{:<6}{:>10}  {:<10}{:>12}{:>12}{:>9}{:>11}",
            r.axis.to_string(),
            value,
            r.policy.to_string(),
            format_sig(r.summary.mean_delay),
            format_sig(r.summary.stderr),
            r.summary.trials,
            r.summary.truncated
        );
    }
    if let Some(r) = rows.first() {
        let _ = writeln!(out, "seed {}", r.seed);
    }
    out
}

/// Writes through a sibling temporary file renamed into place, so `path`
/// is either untouched or complete.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
