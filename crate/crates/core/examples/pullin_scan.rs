// Pull-in and hold-in of the lead-lag classic loop over a detuning grid.

use std::f64::consts::FRAC_PI_2;

use costas_lab::analysis::{pullin_probe, ClassicStart, LockCriterion};
use costas_lab::experiments::{bistable_params, bistable_reference_config};
use costas_lab::Result;

pub fn run() -> Result<()> {
    let p = bistable_params();
    let grid: Vec<f64> = (0..=7).map(|k| 20.0 * k as f64).collect();
    let ics: Vec<ClassicStart> = [0.0, 0.004, 0.008]
        .iter()
        .flat_map(|&x| [-FRAC_PI_2, 0.0].map(|theta_delta| ClassicStart { x, theta_delta }))
        .collect();

    let report = pullin_probe(&p, &grid, &ics, &bistable_reference_config(), &LockCriterion::default())?;
    for r in &report.rows {
        println!(
            "detuning {:>5}: {:?} ({} of {} escape), hold-in {:?}",
            r.omega_delta, r.verdict, r.escapes, r.runs, r.hold_in
        );
    }
    println!(
        "pull-in boundary between {:?} and {:?}",
        report.largest_all_lock(),
        report.smallest_some_escape()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
