//! Runs every verification suite at its default size and prints one line per criterion.

use domeforge::suites::{run_suite, SuiteConfig, SUITES};
use std::process::ExitCode;
use std::time::Instant;

fn main() -> ExitCode {
    let t0 = Instant::now();
    let mut failed = 0;
    for (k, name) in SUITES.iter().enumerate() {
        let cfg = SuiteConfig::new(name);
        match run_suite(&cfg) {
            Ok(rep) => {
                let bad: Vec<_> = rep.failures().collect();
                println!(
                    "criterion {:>2} {:<12} {}  records={} violations={} worst_margin={:.3e} time={:.1}s",
                    k + 1,
                    name,
                    if rep.pass { "PASS" } else { "FAIL" },
                    rep.records.len(),
                    bad.len(),
                    rep.worst_margin(),
                    rep.wall_time
                );
                for r in bad.iter().take(5) {
                    println!("      violated: {} [{}] measured={} bound={} margin={:.3e}", r.check, r.input, r.measured, r.bound, r.margin);
                }
                if !rep.pass {
                    failed += 1;
                    for n in &rep.notes {
                        println!("      note: {n}");
                    }
                }
            }
            Err(e) => {
                failed += 1;
                println!("criterion {:>2} {:<12} FAIL  error: {e}", k + 1, name);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass in {:.1}s", SUITES.len() - failed, SUITES.len(), t0.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
