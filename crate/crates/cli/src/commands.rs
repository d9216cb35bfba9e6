//! Subcommand bodies. Each returns the text destined for stdout; `main`
//! does the printing and maps errors to exit codes.

use std::path::{Path, PathBuf};

use idnc_core::ssp::{SspInstance, DEFAULT_SIZE_BOUND};
use idnc_core::{run_sweep, IdncGraph};

use crate::config::{ExperimentSpec, Overrides};
use crate::verify::{run_suite, Suite, VerifyOptions};
use crate::{csv, fixture, with_threads, CliError};

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

pub struct SweepOutput {
    pub csv: String,
    pub table: String,
    /// Where the CSV was written; `None` means it belongs on stdout.
    pub written_to: Option<PathBuf>,
}

/// Parses, validates and runs a sweep, writing the CSV atomically when an
/// output path is set.
pub fn sweep(spec_path: &Path, overrides: &Overrides, threads: Option<usize>) -> Result<SweepOutput, CliError> {
    let spec = ExperimentSpec::parse(&read(spec_path)?, overrides)?;
    let rows = with_threads(threads, || run_sweep(&spec.base, spec.axis, &spec.values, &spec.policies))?
        .map_err(CliError::runtime)?;
    let out = SweepOutput { csv: csv::render(&rows), table: csv::table(&rows), written_to: spec.out.clone() };
    if let Some(path) = &spec.out {
        csv::write_atomic(path, &out.csv)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(out)
}

/// Report lines, or a verification error naming the failed checks.
pub fn verify(suite: Suite, opts: &VerifyOptions, threads: Option<usize>) -> Result<String, CliError> {
    let checks = with_threads(threads, || run_suite(suite, opts))??;
    let mut report: String = checks.iter().map(|c| format!("{c}\n")).collect();
    report.push_str(&format!("seed {}\n", opts.seed));
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(report)
    } else {
        Err(CliError::Verification(format!("{report}failed checks: {}", failed.join(", "))))
    }
}

fn set(items: &[usize]) -> String {
    let inner: Vec<String> = items.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", inner.join(", "))
}

/// Optimal expected completion delay of a fixture and its first optimal
/// transmission.
pub fn oracle(fixture_path: &Path, max_bits: Option<usize>) -> Result<String, CliError> {
    let state = fixture::parse_fixture(&read(fixture_path)?)?;
    let instance = SspInstance::new(state, max_bits.unwrap_or(DEFAULT_SIZE_BOUND)).map_err(CliError::runtime)?;
    let table = instance.solve().map_err(CliError::runtime)?;
    let mut out = format!("V = {:.3}\nlacking bits: {}\n", table.initial_value(), instance.bits().len());
    match table.optimal_clique(instance.initial_state()) {
        None => out.push_str("clique: empty, every receiver is complete\n"),
        Some(c) => {
            out.push_str(&format!("packets: {}\n", set(c.packets())));
            out.push_str(&format!("targeted primary: {}\n", set(c.targeted_primary())));
            out.push_str(&format!("targeted secondary: {}\n", set(c.targeted_secondary())));
        }
    }
    Ok(out)
}

pub fn dump_graph(fixture_path: &Path) -> Result<String, CliError> {
    let state = fixture::parse_fixture(&read(fixture_path)?)?;
    Ok(IdncGraph::build(&state).dump())
}
