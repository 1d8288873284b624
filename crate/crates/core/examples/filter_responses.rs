// Impulse and step responses of the three loop filters in the crate.

use costas_lab::{FilterSs, LoopParams, Result};

pub fn run() -> Result<()> {
    let arm = FilterSs::first_order_lowpass(LoopParams::REF_OMEGA3, 1.0)?;
    let pi = FilterSs::pi_loop_filter(LoopParams::REF_TAU1, LoopParams::REF_TAU2)?;
    let lead_lag = FilterSs::lead_lag(0.1, 0.029)?;

    println!("arm low-pass: DC gain {:?}", arm.dc_gain());
    for k in [1, 2, 5, 10] {
        let t = k as f64 * 1e-7;
        println!(
            "  t = {t:.1e}  h(t) = {:.6e}  s(t) = {:.6}",
            arm.impulse_response(t),
            arm.step_response(t)
        );
    }

    // an integrator has no DC gain; its step response ramps
    println!(
        "PI filter: DC gain {:?}, abscissa {}",
        pi.dc_gain(),
        pi.spectral_abscissa()
    );
    for k in [0, 1, 10, 100] {
        let t = k as f64 * 1e-6;
        println!("  t = {t:.1e}  s(t) = {:.6}", pi.step_response(t));
    }

    println!("lead-lag: DC gain {:?}", lead_lag.dc_gain());
    for t in [0.0, 0.05, 0.1, 0.5] {
        println!("  t = {t}  s(t) = {:.6}", lead_lag.step_response(t));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
