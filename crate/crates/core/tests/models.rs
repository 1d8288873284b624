use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_abs_diff_eq;
use costas_lab::models::{ideal_lpf_outputs, rhs, wrap_half_period};
use costas_lab::{integrate, pd_characteristic, IntegratorConfig, LoopParams, ModelKind, StateVector};
use proptest::prelude::*;

#[test]
fn full_and_simplified_signal_space_agree_over_a_short_run() {
    let p = LoopParams::reference().with_omega_delta_free(1e5);
    let cfg = IntegratorConfig::fixed(2e-9, 1e-4).with_stride(50);
    let a = integrate(
        ModelKind::SignalSpace,
        &p,
        &StateVector::initial(ModelKind::SignalSpace, &p),
        &cfg,
    )
    .unwrap();
    let b = integrate(
        ModelKind::SimplifiedSignalSpace,
        &p,
        &StateVector::initial(ModelKind::SimplifiedSignalSpace, &p),
        &cfg,
    )
    .unwrap();
    assert_eq!(a.len(), b.len());
    let (ta, tb) = (a.theta_delta(), b.theta_delta());
    let sup = ta.iter().zip(&tb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(sup < 1e-8, "sup |d theta| = {sup:e}");
}

#[test]
fn characteristic_is_the_average_of_the_arm_product() {
    let n = 4000;
    for theta in [-2.0, -0.3, 0.0, 0.7, 1.5] {
        let h = 2.0 * PI / n as f64;
        let mean: f64 = (0..n)
            .map(|k| {
                let s = (k as f64 + 0.5) * h;
                let (i, q) = (s.sin() * (s - theta).cos(), s.sin() * (s - theta).sin());
                i * q
            })
            .sum::<f64>()
            / n as f64;
        let (i, q) = ideal_lpf_outputs(theta, 1.0);
        assert_abs_diff_eq!(i * q, pd_characteristic(theta), epsilon = 1e-15);
        assert_abs_diff_eq!(mean, pd_characteristic(theta), epsilon = 1e-14);
    }
}

#[test]
fn integration_is_bit_for_bit_repeatable() {
    let p = LoopParams::reference().with_omega_delta_free(3e5);
    for kind in ModelKind::ALL {
        let s0 = StateVector::initial(kind, &p);
        let cfg = IntegratorConfig::adaptive(1e-8, 1e-11, 1e-6, 5e-5);
        let a = integrate(kind, &p, &s0, &cfg).unwrap();
        let b = integrate(kind, &p, &s0, &cfg).unwrap();
        assert_eq!(a.times(), b.times(), "{kind}");
        assert_eq!(a.final_state().values(), b.final_state().values(), "{kind}");
    }
}

#[test]
fn locked_classic_loop_rests_at_a_multiple_of_pi() {
    let p = LoopParams::reference().with_omega_delta_free(0.0);
    let kind = ModelKind::ClassicPhaseSpace;
    let s0 = StateVector::initial(kind, &p).with_angle(1.0);
    let tr = integrate(kind, &p, &s0, &IntegratorConfig::adaptive(1e-10, 1e-13, 1e-6, 2e-3)).unwrap();
    assert_abs_diff_eq!(wrap_half_period(tr.final_state().angle()), 0.0, epsilon = 1e-6);
}

proptest! {
    #[test]
    fn characteristic_is_odd_and_pi_periodic(theta in -20.0f64..20.0) {
        prop_assert!((pd_characteristic(-theta) + pd_characteristic(theta)).abs() < 1e-15);
        prop_assert!((pd_characteristic(theta + PI) - pd_characteristic(theta)).abs() < 1e-14);
        prop_assert!(pd_characteristic(theta).abs() <= 0.125 + 1e-15);
    }

    #[test]
    fn classic_vector_field_is_symmetric(x in -0.05f64..0.05, theta in -4.0f64..4.0) {
        let p = LoopParams::reference().with_omega_delta_free(0.0);
        let kind = ModelKind::ClassicPhaseSpace;
        let s = StateVector::zeros(kind, &p).with_x(&[x]).unwrap().with_angle(theta);
        let m = StateVector::zeros(kind, &p).with_x(&[-x]).unwrap().with_angle(-theta);
        let s_pi = StateVector::zeros(kind, &p).with_x(&[x]).unwrap().with_angle(theta + PI);
        let (mut f, mut g, mut h) = ([0.0; 2], [0.0; 2], [0.0; 2]);
        rhs(kind, 0.0, &s, &p, &mut f).unwrap();
        rhs(kind, 0.0, &m, &p, &mut g).unwrap();
        rhs(kind, 0.0, &s_pi, &p, &mut h).unwrap();
        for k in 0..2 {
            let scale = f[k].abs().max(1.0);
            prop_assert!((f[k] + g[k]).abs() <= 1e-12 * scale);
            prop_assert!((f[k] - h[k]).abs() <= 1e-9 * scale);
        }
    }
}

#[test]
fn characteristic_peaks_at_a_quarter_period() {
    assert_abs_diff_eq!(pd_characteristic(FRAC_PI_2 / 2.0), 0.125, epsilon = 1e-16);
}
