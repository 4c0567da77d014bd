//! Acceptance battery with a fixed seed: one line per criterion, nonzero
//! exit status if any criterion fails.

use std::process::ExitCode;

use ultratree::suite::{run_criterion, SuiteConfig, CRITERIA};

const SEED: u64 = 20240229;

fn main() -> ExitCode {
    let cfg = SuiteConfig {
        seed: SEED,
        ..SuiteConfig::default()
    };
    println!("acceptance suite, seed {SEED}, tolerance {:e}", cfg.tol.rel);
    let mut failed = 0;
    for (id, _) in CRITERIA {
        let c = run_criterion(id, &cfg);
        let mark = if c.passed { "PASS" } else { "FAIL" };
        println!("[{mark}] criterion {:>2} {}: {} ({:.2} s)", c.id, c.name, c.detail, c.elapsed_seconds);
        if !c.passed {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("all {} criteria passed", CRITERIA.len());
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", CRITERIA.len());
        ExitCode::FAILURE
    }
}
