//! Acceptance criteria: one line per criterion, exit status non-zero when any
//! criterion fails. Tolerances live in the suites themselves.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nmdyn::verify::{run_suite, Suite, SuiteReport, VerifyOptions};

const SUITES: [(u32, Suite); 11] = [
    (1, Suite::Gauge),
    (2, Suite::Quadrature),
    (3, Suite::LemmaBounds),
    (4, Suite::DuhamelOrder),
    (5, Suite::Energy),
    (6, Suite::Reversibility),
    (7, Suite::Gronwall),
    (8, Suite::Characteristic),
    (9, Suite::MvfiIdentity),
    (10, Suite::Moments),
    (11, Suite::FrameCovariance),
];

fn summarize(report: &SuiteReport) -> String {
    // A passing suite reports its first check; a failing one every failed check.
    let shown: Vec<_> = if report.passed {
        report.checks.iter().take(1).collect()
    } else {
        report.failed_checks().collect()
    };
    let total = report.checks.len();
    let lead = if report.passed {
        format!("{total}/{total} checks; ")
    } else {
        format!("{}/{total} checks failed; ", shown.len())
    };
    lead + &shown
        .iter()
        .map(|c| {
            let bound = match c.relation {
                nmdyn::verify::Relation::AtMost => format!("<= {:.1e}", c.tolerance),
                nmdyn::verify::Relation::AtLeast => format!(">= {}", c.tolerance),
                nmdyn::verify::Relation::Near { target } => format!("{target} +- {}", c.tolerance),
            };
            format!("{} = {:.4e} ({bound})", c.property, c.measured)
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn files_of(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).expect("output directory") {
        let path = entry.expect("entry").path();
        let name = path.strip_prefix(dir).expect("prefix").to_path_buf();
        out.insert(name, fs::read(&path).expect("readable output"));
    }
    out
}

/// Runs the binary with the same config and seed at 1 and 8 workers.
fn reproducibility() -> (bool, String) {
    let exe = env!("CARGO_BIN_EXE_nmdyn");
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/gaussian_ensemble.json");
    let scratch = tempfile::tempdir().expect("tempdir");
    let mut outputs = Vec::new();
    for threads in [1, 8] {
        let mut files = BTreeMap::new();
        let mut stdout = Vec::new();
        for args in [
            vec!["ensemble", "--config", config.to_str().unwrap()],
            vec!["simulate", "--config", config.with_file_name("two_charges.json").to_str().unwrap()],
            vec!["verify", "mvfi-identity"],
        ] {
            let out = scratch.path().join(format!("{}-{threads}", args[0]));
            let result = Command::new(exe)
                .args(&args)
                .args(["--seed", "5", "--threads", &threads.to_string(), "--out"])
                .arg(&out)
                .output()
                .expect("binary runs");
            if !result.status.success() {
                return (
                    false,
                    format!("`{}` exited with {}: {}", args.join(" "), result.status, String::from_utf8_lossy(&result.stderr)),
                );
            }
            stdout.push(result.stdout);
            for (name, bytes) in files_of(&out) {
                files.insert(Path::new(args[0]).join(name), bytes);
            }
        }
        outputs.push((files, stdout));
    }
    let (one, eight) = (&outputs[0], &outputs[1]);
    let names: Vec<String> = one.0.keys().map(|p| p.display().to_string()).collect();
    // Output directories differ between runs, so stdout lines naming them are dropped.
    let strip = |s: &[Vec<u8>]| -> Vec<String> {
        s.iter()
            .flat_map(|b| String::from_utf8_lossy(b).lines().map(str::to_owned).collect::<Vec<_>>())
            .filter(|l| !l.contains("output in"))
            .collect()
    };
    let identical = one.0 == eight.0 && strip(&one.1) == strip(&eight.1) && !one.0.is_empty();
    let differing: Vec<String> = one
        .0
        .iter()
        .filter(|(k, v)| eight.0.get(*k) != Some(*v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    let detail = if identical {
        format!("{} files byte-identical at 1 and 8 workers: {}", names.len(), names.join(", "))
    } else {
        format!("differing files: {}", differing.join(", "))
    };
    (identical, detail)
}

fn main() {
    // The libtest harness is off; `cargo test -- <filter>` arguments are ignored.
    let options = VerifyOptions::default();
    let mut failures = Vec::new();
    for (criterion, suite) in SUITES {
        let start = Instant::now();
        let line = match run_suite(suite, &options) {
            Ok(report) => {
                if !report.passed {
                    failures.push(criterion);
                }
                format!(
                    "{} [{:.1}s] {}",
                    if report.passed { "PASS" } else { "FAIL" },
                    start.elapsed().as_secs_f64(),
                    summarize(&report)
                )
            }
            Err(e) => {
                failures.push(criterion);
                format!("FAIL error: {e}")
            }
        };
        println!("criterion {criterion:>2} {:<16} {line}", suite.name());
    }
    let start = Instant::now();
    let (passed, detail) = reproducibility();
    if !passed {
        failures.push(12);
    }
    println!(
        "criterion 12 {:<16} {} [{:.1}s] {detail}",
        "reproducibility",
        if passed { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    if failures.is_empty() {
        println!("acceptance: all 12 criteria pass");
    } else {
        println!("acceptance: failing criteria {failures:?}");
        std::process::exit(1);
    }
}
