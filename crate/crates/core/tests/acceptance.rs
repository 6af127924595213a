//! Acceptance criteria 1 to 8 on the full suite, one line per criterion.

use std::process::ExitCode;

use cellhom::verify::{criterion, Suite, CRITERIA};

const SEED: u64 = 2024;

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for k in CRITERIA {
        let start = std::time::Instant::now();
        let rows = criterion(k, Suite::Full, SEED);
        let pass = !rows.is_empty() && rows.iter().all(|r| r.pass);
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {k}: {verdict} ({} rows, {:.1} s)", rows.len(), start.elapsed().as_secs_f64());
        for r in rows.iter().filter(|r| !r.pass) {
            println!(
                "    {} / {}: expected {:.6}, measured {:.6} ± {:.6}",
                r.fixture, r.quantity, r.expected, r.measured, r.stderr
            );
        }
        if !pass {
            failed.push(k);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: criteria failed: {failed:?}");
        ExitCode::FAILURE
    }
}
