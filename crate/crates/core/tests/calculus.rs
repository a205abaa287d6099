use std::f64::consts::PI;

use dqgrid::phasor::{
    derivative_rule_residual, inverse_park, park_transform, phases_from_space_phasor, sequence_coefficients,
    sliding_coefficient, space_phasor, DerivativeCheck, Envelope, Frame, FrameAngle, KernelSign, Representation,
    ThreePhaseSample, UniformSamples, OMEGA_S,
};
use proptest::prelude::*;

fn sample() -> impl Strategy<Value = ThreePhaseSample> {
    (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(a, b, c)| ThreePhaseSample::new(a, b, c))
}

fn max_abs(x: ThreePhaseSample) -> f64 {
    x.as_array().iter().fold(0.0, |m, v| m.max(v.abs()))
}

proptest! {
    #[test]
    fn park_round_trip(x in sample(), rho in -20.0..20.0f64) {
        let angle = FrameAngle::new(Frame::Synchronous, rho, 1.0);
        let (p, z) = park_transform(&x, &angle);
        let back = inverse_park(&p, z, &angle).unwrap();
        prop_assert!(max_abs(back - x) < 1e-12 * (1.0 + max_abs(x)));
    }

    #[test]
    fn park_is_linear(x in sample(), y in sample(), a in -3.0..3.0f64, b in -3.0..3.0f64, rho in -7.0..7.0f64) {
        let angle = FrameAngle::new(Frame::Synchronous, rho, 1.0);
        let (px, zx) = park_transform(&x, &angle);
        let (py, zy) = park_transform(&y, &angle);
        let (p, z) = park_transform(&(x * a + y * b), &angle);
        prop_assert!((p.complex() - (px.complex() * a + py.complex() * b)).norm() < 1e-12);
        prop_assert!((z - (a * zx + b * zy)).abs() < 1e-12);
    }

    #[test]
    fn balanced_sets_have_no_zero_sequence(amp in 0.0..5.0f64, phi in -7.0..7.0f64, rho in -7.0..7.0f64) {
        let x = ThreePhaseSample::balanced(amp, phi);
        prop_assert!(x.is_balanced(1e-12));
        let (p, z) = park_transform(&x, &FrameAngle::new(Frame::Synchronous, rho, 1.0));
        prop_assert!(z.abs() < 1e-12);
        prop_assert!((p.norm() - amp).abs() < 1e-12);
    }

    #[test]
    fn space_phasor_round_trip_for_balanced(amp in 0.0..5.0f64, phi in -7.0..7.0f64) {
        let x = ThreePhaseSample::balanced(amp, phi);
        let back = phases_from_space_phasor(&space_phasor(&x));
        prop_assert!(max_abs(back - x) < 1e-12);
    }

    #[test]
    fn fourier_coefficients_of_real_signals_are_conjugate_symmetric(
        x in 0.1..3.0f64, theta in -3.0..3.0f64, dc in -1.0..1.0f64, k in 1i32..4,
    ) {
        let s = UniformSamples::from_fn(0.0, 1e-4, 400, |t| dc + x * (k as f64 * OMEGA_S * t + theta).cos());
        let t = s.time(399);
        let period = 2.0 * PI / OMEGA_S;
        let pos = sliding_coefficient(&s, k, period, t).unwrap().value;
        let neg = sliding_coefficient(&s, -k, period, t).unwrap().value;
        prop_assert!((pos - neg.conj()).norm() < 1e-12);
        if k == 1 {
            prop_assert!((pos - num_complex::Complex64::from_polar(x / 2.0, theta)).norm() < 1e-6);
        }
    }
}

#[test]
fn positive_sequence_set_has_no_negative_or_zero_sequence() {
    let fs = 10_000.0;
    let phase = |shift: f64| UniformSamples::from_fn(0.0, 1.0 / fs, 400, move |t| (OMEGA_S * t + 0.2 - shift).cos());
    let (a, b, c) = (phase(0.0), phase(2.0 * PI / 3.0), phase(4.0 * PI / 3.0));
    let seq = sequence_coefficients([&a, &b, &c], 1, 2.0 * PI / OMEGA_S, a.time(399), KernelSign::Analysis).unwrap();
    assert!(seq.neg.norm() < 1e-6 && seq.zero.norm() < 1e-6);
    assert!(seq.pos.norm() > 0.1);
}

fn check_for(env: &Envelope) -> DerivativeCheck<'_> {
    DerivativeCheck {
        envelope: env,
        omega_s: OMEGA_S,
        frame: None,
        t_start: 0.05,
        t_end: 0.1,
        sample_rate: 10_000.0,
    }
}

#[test]
fn synchronous_space_phasor_rule_matches_baseband_rule() {
    let env = Envelope::new(
        |t| 1.0 + 0.1 * (2.0 * PI * 5.0 * t).sin(),
        |t| PI * (2.0 * PI * 5.0 * t).cos(),
        |t| 0.05 * t,
        |_| 0.05,
        2.0 * PI * 5.0,
    );
    let c = check_for(&env);
    let bb = derivative_rule_residual(Representation::Baseband, &c).unwrap();
    let sp = derivative_rule_residual(Representation::SpacePhasor, &c).unwrap();
    assert!(bb < 1e-6 && sp < 1e-6);
    assert!((bb - sp).abs() < 1e-8);
}

#[test]
fn space_phasor_rule_holds_in_an_off_nominal_frame() {
    let env = Envelope::constant(1.0, 0.4);
    let frame = |t: f64| (0.98 * OMEGA_S * t + 0.1, 0.98 * OMEGA_S);
    let c = DerivativeCheck { frame: Some(&frame), ..check_for(&env) };
    assert!(derivative_rule_residual(Representation::SpacePhasor, &c).unwrap() < 1e-6);
}

#[test]
fn averaging_rule_for_a_ramped_carrier() {
    let env = Envelope::new(|t| 1.0 + 0.1 * t, |_| 0.1, |_| 0.0, |_| 0.0, 1.0);
    let r = derivative_rule_residual(Representation::GeneralizedAveraging { k: 1 }, &check_for(&env)).unwrap();
    assert!(r < 1e-4);
}

#[test]
fn second_harmonic_of_a_pure_carrier_vanishes() {
    let s = UniformSamples::from_fn(0.0, 1e-4, 400, |t| (OMEGA_S * t).cos());
    let c = sliding_coefficient(&s, 2, 2.0 * PI / OMEGA_S, s.time(399)).unwrap();
    assert!(c.value.norm() < 1e-6);
}
