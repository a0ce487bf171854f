//! Runs the nine acceptance criteria and prints one line per criterion.

use std::process::ExitCode;

use qbc_core::verify;

fn main() -> ExitCode {
    let reports = verify::run_all();
    for r in &reports {
        println!("{}", r.summary_line());
        for c in r.checks.iter().filter(|c| !c.passed) {
            println!("    {}: {}", c.name, c.detail);
        }
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("acceptance: {} of {} criteria passed", reports.len() - failed, reports.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
