// Fixed-step RK4 against adaptive Dormand-Prince on the classic model:
// accuracy at the end point and the work each needed.

use costas_lab::{integrate, IntegratorConfig, LoopParams, ModelKind, Result, StateVector};

pub fn run() -> Result<()> {
    let p = LoopParams::reference().with_omega_delta_free(5e5);
    let kind = ModelKind::ClassicPhaseSpace;
    let s0 = StateVector::initial(kind, &p);
    let t_end = 2e-4;

    let reference = integrate(kind, &p, &s0, &IntegratorConfig::adaptive(1e-13, 1e-16, 1e-7, t_end))?;
    let exact = reference.final_state();

    let mut configs = vec![];
    for dt in [4e-8, 2e-8, 1e-8] {
        configs.push((format!("rk4 dt={dt:.0e}"), IntegratorConfig::fixed(dt, t_end)));
    }
    for tol in [1e-6, 1e-9] {
        configs.push((
            format!("dp45 rtol={tol:.0e}"),
            IntegratorConfig::adaptive(tol, tol * 1e-3, f64::INFINITY, t_end),
        ));
    }

    for (name, cfg) in configs {
        let tr = integrate(kind, &p, &s0, &cfg)?;
        let end = tr.final_state();
        let err = (end.angle() - exact.angle())
            .abs()
            .max((end.x()[0] - exact.x()[0]).abs());
        let st = tr.stats();
        println!(
            "{name:<16} error {err:.2e}  accepted {:>6}  rejected {:>3}  rhs evals {:>7}",
            st.accepted, st.rejected, st.rhs_evals
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
