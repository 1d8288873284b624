// Distance between the modified loop and its averaged counterpart as the
// carrier frequency doubles. The fitted slope should sit near -1.

use std::f64::consts::PI;

use costas_lab::analysis::{averaging_discrepancy, loglog_slope, AveragingPair, AveragingStart};
use costas_lab::{IntegratorConfig, LoopParams, Result};

pub fn run() -> Result<()> {
    let p = LoopParams::reference().with_omega_delta_free(1e4);
    let start = AveragingStart::at_rest(&p, 1.0);
    let omegas: Vec<f64> = [1e5, 2e5, 4e5, 8e5].iter().map(|f| 2.0 * PI * f).collect();

    for pair in [AveragingPair::ModifiedVsClassic, AveragingPair::SimplifiedVsPhaseSpace] {
        let rows = averaging_discrepancy(&p, pair, &start, &omegas, |w| {
            let dt = 2.0 * PI / w / 100.0;
            IntegratorConfig::fixed(dt, 2e-4).with_sample_dt(10.0 * dt)
        })?;
        println!("{:?}", pair.kinds());
        for r in &rows {
            println!(
                "  omega1 {:.4e}  sup theta error {:.4e}{}",
                r.omega1,
                r.sup_theta_error,
                if r.condition_violated() {
                    "  (detuning too large)"
                } else {
                    ""
                }
            );
        }
        println!("  slope {:.3}", loglog_slope(&rows).unwrap_or(f64::NAN));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
