// The five models side by side at a large detuning: where each one settles
// and how far apart their phase trajectories drift.

use costas_lab::analysis::{detect_lock, LockCriterion};
use costas_lab::experiments::{compare_models, config_for, ModelRun};
use costas_lab::{integrate, LoopParams, ModelKind, Result, StateVector};

pub fn run_with(t_end: f64) -> Result<()> {
    let p = LoopParams::reference().with_omega_delta_free(6e5);
    let crit = LockCriterion::default();

    for kind in ModelKind::ALL {
        let traj = integrate(kind, &p, &StateVector::initial(kind, &p), &config_for(kind, t_end))?;
        let lock = detect_lock(&traj, &crit)?;
        println!(
            "{:<24} locked={:<5} steady theta = {:?}",
            kind.name(),
            lock.locked,
            lock.steady_theta_delta
        );
    }

    let runs: Vec<ModelRun> = [
        ModelKind::SignalSpace,
        ModelKind::SimplifiedSignalSpace,
        ModelKind::PhaseSpace,
    ]
    .into_iter()
    .map(|kind| ModelRun {
        kind,
        initial: StateVector::initial(kind, &p),
        config: config_for(kind, t_end),
    })
    .collect();
    for c in compare_models(&p, &runs, &crit)? {
        println!(
            "{} vs {}: sup |d theta| = {:.3e}, steady difference {:?}",
            c.a, c.b, c.sup_theta_diff, c.steady_theta_diff
        );
    }
    Ok(())
}

pub fn run() -> Result<()> {
    run_with(1e-3)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_with(5e-3)
}
