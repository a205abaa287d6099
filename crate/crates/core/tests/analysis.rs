mod common;

use std::f64::consts::PI;

use dqgrid::analysis::eigen::modes;
use dqgrid::analysis::linearize::{linearize, LinearModel};
use dqgrid::analysis::prony::{prony_fit, suggest_order};
use dqgrid::analysis::sweep::{log_grid, sigma_max_sweep};
use dqgrid::assembly::{build, Framework};
use dqgrid::config::Method;
use dqgrid::sim::{integrate, record_channels, LinearSystem, SimOptions};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// `Q diag(λ) Q⁻¹` with separated real eigenvalues and a well-conditioned `Q`.
fn diagonalizable(n: usize, noise: &[f64]) -> DMatrix<f64> {
    let q = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.3 * noise[i * n + j] });
    let d = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| -1.0 - 2.0 * i as f64));
    &q * d * q.try_inverse().unwrap()
}

fn sorted_participation(a: &DMatrix<f64>) -> Vec<(f64, Vec<f64>)> {
    let mut out: Vec<(f64, Vec<f64>)> = modes(a).unwrap().iter().map(|m| (m.lambda.re, m.participation())).collect();
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn participation_is_invariant_under_diagonal_scaling(
        noise in prop::collection::vec(-1.0..1.0f64, 25),
        scale in prop::collection::vec(-2.0..2.0f64, 5),
    ) {
        let a = diagonalizable(5, &noise);
        let t: Vec<f64> = scale.iter().map(|s| 10f64.powf(*s / 2.0)).collect();
        let scaled = DMatrix::from_fn(5, 5, |i, j| a[(i, j)] * t[j] / t[i]);
        for ((l1, p1), (l2, p2)) in sorted_participation(&a).iter().zip(sorted_participation(&scaled).iter()) {
            prop_assert!((l1 - l2).abs() < 1e-8);
            for (x, y) in p1.iter().zip(p2) {
                prop_assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn prony_recovers_up_to_five_modes(
        modes in prop::collection::vec((0.0..8.0f64, -3.0..0.5f64, 0.2..1.0f64, -3.0..3.0f64), 1..=5),
    ) {
        let dt = 2.5e-3;
        let truth: Vec<(f64, f64, f64, f64)> = modes
            .iter()
            .enumerate()
            .map(|(i, &(f, s, a, phi))| (4.0 + 16.0 * i as f64 + f, s, a, phi))
            .collect();
        let y: Vec<f64> = (0..800)
            .map(|k| {
                let t = k as f64 * dt;
                truth.iter().map(|(f, s, a, phi)| a * (s * t).exp() * (2.0 * PI * f * t + phi).cos()).sum()
            })
            .collect();
        let fit = prony_fit(&y, dt, 2 * truth.len()).unwrap();
        for (f, s, _, _) in &truth {
            let m = fit.nearest(*f).unwrap();
            prop_assert!((m.frequency_hz() - f).abs() < 1e-3 * f, "f {} vs {f}", m.frequency_hz());
            let magnitude = s.hypot(2.0 * PI * f);
            prop_assert!((m.sigma() - s).abs() < 1e-3 * magnitude, "sigma {} vs {s} at {f} Hz", m.sigma());
        }
        prop_assert!(fit.residual < 1e-2, "residual {}", fit.residual);
        prop_assert_eq!(suggest_order(&y, 60, 1e-8), 2 * truth.len());
    }
}

#[test]
fn output_matrix_matches_recorded_channels() {
    let (model, op) = build(&common::case1(), Framework::Spc).unwrap();
    let lm = linearize(&model, &op.x0, &op.u0);
    let n = model.n_states();
    let dx: Vec<f64> = (0..n).map(|k| 1e-7 * ((k as f64 * 1.7).sin() + 0.2)).collect();
    let x: Vec<f64> = op.x0.iter().zip(&dx).map(|(a, b)| a + b).collect();
    let y0 = record_channels(&model, &op.x0);
    let y1 = record_channels(&model, &x);
    let predicted = &lm.c * DVector::from_vec(dx);
    for (k, (a, b)) in y1.iter().zip(&y0).enumerate() {
        let actual = a - b;
        assert!((actual - predicted[k]).abs() < 1e-6 * predicted.amax().max(1e-12), "output {k}");
    }
}

fn oscillator() -> LinearSystem {
    LinearSystem {
        a: DMatrix::from_row_slice(2, 2, &[-1.0, 20.0, -20.0, -1.0]),
        b: DMatrix::zeros(2, 1),
        c: DMatrix::identity(2, 2),
    }
}

fn final_error(method: Method, dt: f64) -> f64 {
    let opts = SimOptions {
        dt,
        t_end: 1.0,
        method,
        decimation: 1,
        disturbances: vec![],
    };
    let r = integrate(&oscillator(), &[1.0, 0.0], &[0.0], &opts).unwrap();
    let decay = (-1.0f64).exp();
    let exact = [decay * 20f64.cos(), -decay * 20f64.sin()];
    (r.final_state[0] - exact[0]).hypot(r.final_state[1] - exact[1])
}

#[test]
fn integrators_converge_at_their_design_order() {
    let rk = final_error(Method::Rk4, 2e-3) / final_error(Method::Rk4, 1e-3);
    assert!((rk.log2() - 4.0).abs() < 0.2, "rk4 ratio {rk}");
    let tr = final_error(Method::Trapezoidal, 2e-3) / final_error(Method::Trapezoidal, 1e-3);
    assert!((tr.log2() - 2.0).abs() < 0.2, "trapezoidal ratio {tr}");
}

#[test]
fn sweep_of_a_first_order_lag_matches_its_gain() {
    let lm = LinearModel {
        a: DMatrix::from_element(1, 1, -2.0),
        b: DMatrix::from_element(1, 1, 1.0),
        c: DMatrix::from_element(1, 1, 3.0),
        d: DMatrix::zeros(1, 1),
        states: vec!["x".into()],
        inputs: vec!["u".into()],
        outputs: vec!["y".into()],
    };
    let grid = log_grid(0.01, 100.0, 50).unwrap();
    let sigma = sigma_max_sweep(&lm, &grid).unwrap();
    for (f, s) in grid.iter().zip(&sigma) {
        let w = 2.0 * PI * f;
        assert!((s - 3.0 / (4.0 + w * w).sqrt()).abs() < 1e-12);
    }
}
