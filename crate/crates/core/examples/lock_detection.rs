// How the lock verdict responds to its tolerances.

use costas_lab::analysis::{detect_lock, LockCriterion};
use costas_lab::{integrate, IntegratorConfig, LoopParams, ModelKind, Result, StateVector};

pub fn run() -> Result<()> {
    let kind = ModelKind::PhaseSpace;
    let cfg = IntegratorConfig::adaptive(1e-9, 1e-12, 1e-6, 2e-3).with_sample_dt(1e-7);

    for detuning in [1e4, 5e5, 1.5e6] {
        let p = LoopParams::reference().with_omega_delta_free(detuning);
        let traj = integrate(kind, &p, &StateVector::initial(kind, &p), &cfg)?;
        for freq_tol in [1e-3, 1.0, 1e7] {
            let crit = LockCriterion {
                freq_tol,
                ..LockCriterion::default()
            };
            let r = detect_lock(&traj, &crit)?;
            println!(
                "detuning {detuning:>9.1e}  freq_tol {freq_tol:>6.0e}  locked={:<5}  err {:.3e}  span {:.3e}",
                r.locked, r.tail_mean_freq_error, r.tail_phase_span
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
