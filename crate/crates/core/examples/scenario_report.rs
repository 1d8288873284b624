// Runs one of the six canned scenarios and prints its summary.
//
// ```text
// cargo run --release --example scenario_report -- 3
// ```

use costas_lab::experiments::run_example;
use costas_lab::Result;

pub fn run_id(id: u8) -> Result<bool> {
    let report = run_example(id)?;
    print!("{report}");
    Ok(report.passed())
}

pub fn run() -> Result<()> {
    run_id(6).map(|_| ())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let id = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    run_id(id)?;
    Ok(())
}
