// Full signal-space simulation of the reference loop at 2 rad/s detuning,
// once from rest and once with a charged arm filter that keeps it from locking.
//
// Pass `--csv <dir>` to keep both trajectories.

use std::path::PathBuf;

use costas_lab::analysis::{detect_lock, LockCriterion};
use costas_lab::cli::write_trajectory_csv;
use costas_lab::{integrate, IntegratorConfig, LoopParams, ModelKind, Result, StateVector};

pub fn run_with(t_end: f64, csv_dir: Option<PathBuf>) -> Result<()> {
    let p = LoopParams::reference().with_omega_delta_free(2.0);
    let kind = ModelKind::SignalSpace;
    let cfg = IntegratorConfig::fixed(2e-9, t_end).with_sample_dt(1e-7);

    let starts = [
        ("rest", StateVector::initial(kind, &p)),
        ("x1=0.02", StateVector::initial(kind, &p).with_x1(&[0.02])?),
    ];
    for (name, s0) in starts {
        let traj = integrate(kind, &p, &s0, &cfg)?;
        let lock = detect_lock(&traj, &LockCriterion::default())?;
        println!(
            "{name:>8}: locked={} freq_err={:.3e} rad/s steps={}",
            lock.locked,
            lock.tail_mean_freq_error,
            traj.stats().accepted
        );
        if let Some(dir) = &csv_dir {
            std::fs::create_dir_all(dir)?;
            write_trajectory_csv(&dir.join(format!("{name}.csv")), &traj)?;
        }
    }
    Ok(())
}

pub fn run() -> Result<()> {
    run_with(1e-3, None)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let dir = args
        .iter()
        .position(|a| a == "--csv")
        .and_then(|i| args.get(i + 1))
        .map(PathBuf::from);
    run_with(5e-3, dir)
}
