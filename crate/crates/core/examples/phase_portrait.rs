// Writes a phase portrait of the lead-lag classic loop as CSV files, one
// per initial condition, and reports which trajectories were captured.

use std::path::Path;

use costas_lab::analysis::{detect_lock, LockCriterion};
use costas_lab::cli::fmt_f64;
use costas_lab::experiments::{bistable_params, bistable_reference_config};
use costas_lab::{integrate, ModelKind, Result, StateVector};

pub fn run_in(dir: &Path) -> Result<()> {
    let p = bistable_params();
    let kind = ModelKind::ClassicPhaseSpace;
    let cfg = bistable_reference_config().with_t_end(5.0);
    std::fs::create_dir_all(dir)?;

    let mut n = 0;
    for x in [0.0, 0.0055, 0.0075, 0.012] {
        for theta in [-1.5, 0.0, 1.5] {
            let s0 = StateVector::zeros(kind, &p).with_x(&[x])?.with_angle(theta);
            let traj = integrate(kind, &p, &s0, &cfg)?;
            let captured = detect_lock(&traj, &LockCriterion::default())?.locked;

            let mut w = csv::Writer::from_path(dir.join(format!("portrait_{n:02}.csv")))?;
            w.write_record(["t", "x", "theta_delta"])?;
            for i in 0..traj.len() {
                let s = traj.state(i);
                w.write_record([fmt_f64(traj.times()[i]), fmt_f64(s[0]), fmt_f64(s[1])])?;
            }
            w.flush()?;
            println!(
                "#{n:02} x0={x:<7} theta0={theta:<5} {}",
                if captured { "captured" } else { "rotational" }
            );
            n += 1;
        }
    }
    Ok(())
}

pub fn run() -> Result<()> {
    let dir = std::env::temp_dir().join(format!("costas_portrait_{}", std::process::id()));
    run_in(&dir)?;
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "portrait".into());
    run_in(Path::new(&out))?;
    println!("CSV files in {out}/");
    Ok(())
}
