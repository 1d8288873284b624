use std::f64::consts::FRAC_PI_2;

use costas_lab::analysis::{
    find_limit_cycles, hold_in, ideal_lpf_error, pullin_probe, return_map, ClassicStart, CycleSearch, PullInVerdict,
    Stability,
};
use costas_lab::experiments::{
    bistable_cycles, bistable_params, bistable_reference_config, bistable_section_config, BISTABLE_BRACKET,
    BISTABLE_SECTION,
};
use costas_lab::{integrate, IntegratorConfig, LockCriterion, LoopParams, ModelKind, StateVector};

fn search() -> CycleSearch {
    CycleSearch {
        grid_points: 400,
        ..CycleSearch::default()
    }
}

#[test]
fn lead_lag_loop_has_a_stable_and_an_unstable_cycle() {
    let report = bistable_cycles(&bistable_params()).unwrap();
    assert!(report.has_bistable_pair(), "{report:?}");
    let stable: Vec<_> = report.stable().collect();
    let unstable: Vec<_> = report.unstable().collect();
    assert_eq!((stable.len(), unstable.len()), (1, 1));
    assert!(stable[0].multiplier.abs() < 1.0 && unstable[0].multiplier.abs() > 1.0);
    // the unstable cycle separates the stable one from the captured region
    assert!(stable[0].fixed_point_x < unstable[0].fixed_point_x);
    for c in &report.cycles {
        assert!(c.residual < 1e-9, "{c:?}");
    }
}

#[test]
fn cycles_survive_a_halved_tolerance() {
    let p = bistable_params();
    let coarse = find_limit_cycles(
        &p,
        BISTABLE_BRACKET,
        BISTABLE_SECTION,
        &bistable_section_config(),
        &search(),
    )
    .unwrap();
    let fine_cfg = IntegratorConfig::adaptive(5e-12, 5e-15, 1e-3, 1.0);
    let fine = find_limit_cycles(&p, BISTABLE_BRACKET, BISTABLE_SECTION, &fine_cfg, &search()).unwrap();
    assert_eq!(coarse.cycles.len(), fine.cycles.len());
    for (a, b) in coarse.cycles.iter().zip(&fine.cycles) {
        assert_eq!(a.stability, b.stability);
        assert!((a.fixed_point_x - b.fixed_point_x).abs() < 1e-7, "{a:?} vs {b:?}");
    }
}

#[test]
fn zero_detuning_has_no_rotational_cycles() {
    let p = bistable_params().with_omega_delta_free(0.0);
    let report = find_limit_cycles(
        &p,
        BISTABLE_BRACKET,
        BISTABLE_SECTION,
        &bistable_section_config(),
        &search(),
    )
    .unwrap();
    assert!(report.cycles.is_empty(), "{report:?}");
}

#[test]
fn beyond_hold_in_only_the_stable_cycle_remains() {
    let p = bistable_params().with_omega_delta_free(160.0);
    assert_eq!(hold_in(&p), Some(false));
    let report = find_limit_cycles(&p, (0.0, 0.05), BISTABLE_SECTION, &bistable_section_config(), &search()).unwrap();
    assert_eq!(report.cycles.len(), 1, "{report:?}");
    assert_eq!(report.cycles[0].stability, Stability::Stable);
}

#[test]
fn return_map_is_odd_under_reversed_detuning() {
    let p = bistable_params();
    let q = bistable_params().with_omega_delta_free(-p.omega_delta_free());
    let cfg = bistable_section_config();
    for k in 0..10 {
        let x = 0.0008 * k as f64;
        let fwd = return_map(&p, x, BISTABLE_SECTION, &cfg).unwrap().x_out();
        let back = return_map(&q, -x, -BISTABLE_SECTION, &cfg).unwrap().x_out();
        match (fwd, back) {
            (Some(a), Some(b)) => assert!((a + b).abs() < 1e-8, "x = {x}: {a} vs {b}"),
            (None, None) => {}
            other => panic!("x = {x}: {other:?}"),
        }
    }
}

#[test]
fn every_start_locks_without_detuning() {
    let p = bistable_params();
    let ics: Vec<ClassicStart> = [-0.01, 0.0, 0.01]
        .iter()
        .flat_map(|&x| [-FRAC_PI_2, 0.0, 1.0].map(|theta_delta| ClassicStart { x, theta_delta }))
        .collect();
    let cfg = bistable_reference_config().with_t_end(10.0);
    let report = pullin_probe(&p, &[0.0], &ics, &cfg, &LockCriterion::default()).unwrap();
    assert_eq!(report.rows[0].verdict, PullInVerdict::AllLock);
    assert_eq!(report.rows[0].escapes, 0);
    assert_eq!(report.largest_all_lock(), Some(0.0));
}

#[test]
fn arm_filters_settle_near_the_ideal_outputs() {
    let p = LoopParams::reference().with_omega_delta_free(1e4);
    let kind = ModelKind::SimplifiedSignalSpace;
    let cfg = IntegratorConfig::fixed(2e-9, 5e-4).with_sample_dt(1e-7);
    let tr = integrate(kind, &p, &StateVector::initial(kind, &p), &cfg).unwrap();
    let (e1, e2) = ideal_lpf_error(&tr, 0.2).unwrap();
    let (w3, w1) = (LoopParams::REF_OMEGA3, p.omega1);
    let ripple = 0.5 * w3 / (w3 * w3 + 4.0 * w1 * w1).sqrt();
    for e in [e1, e2] {
        assert!((e - ripple).abs() < 0.01, "error {e}, double-carrier ripple {ripple}");
    }

    let classic = integrate(
        ModelKind::ClassicPhaseSpace,
        &p,
        &StateVector::initial(ModelKind::ClassicPhaseSpace, &p),
        &IntegratorConfig::fixed(1e-8, 1e-5),
    )
    .unwrap();
    assert!(ideal_lpf_error(&classic, 0.2).is_err());
}
