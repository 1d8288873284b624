// The same initial condition, the same model, two fixed step sizes, two
// different answers to "does the loop lock?".

use costas_lab::analysis::{detect_lock, LockCriterion};
use costas_lab::experiments::{bistable_params, BISTABLE_THETA0, BISTABLE_T_END, BISTABLE_X0};
use costas_lab::{integrate, IntegratorConfig, ModelKind, Result, StateVector};

pub fn run() -> Result<()> {
    let p = bistable_params();
    let kind = ModelKind::ClassicPhaseSpace;
    let s0 = StateVector::zeros(kind, &p)
        .with_x(&[BISTABLE_X0])?
        .with_angle(BISTABLE_THETA0);

    let mut configs = vec![(
        "adaptive".to_string(),
        IntegratorConfig::adaptive(1e-10, 1e-13, 1e-3, BISTABLE_T_END).with_sample_dt(1e-3),
    )];
    for dt in [0.001, 0.01, 0.05, 0.07, 0.09] {
        configs.push((format!("rk4 dt={dt}"), IntegratorConfig::fixed(dt, BISTABLE_T_END)));
    }
    for (name, cfg) in configs {
        let traj = integrate(kind, &p, &s0, &cfg)?;
        let r = detect_lock(&traj, &LockCriterion::default())?;
        println!(
            "{name:<12} locked={:<5} tail frequency error {:.3e}",
            r.locked, r.tail_mean_freq_error
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
