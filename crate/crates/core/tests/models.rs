mod common;

use dqgrid::assembly::{build, Device, Framework};
use dqgrid::config::Method;
use dqgrid::gfc;
use dqgrid::sim::{integrate, SimOptions};
use num_complex::Complex64;

#[test]
fn initialization_is_an_equilibrium_for_every_case_and_framework() {
    for cfg in [common::case1(), common::case2()] {
        for fw in [Framework::Spc, Framework::Qpc] {
            let (model, op) = build(&cfg, fw).unwrap();
            let f = model.eval(&op.x0, &op.u0);
            assert!(common::inf_norm(&f) < 1e-8, "{} {fw}: {}", cfg.name, common::inf_norm(&f));
            assert!((op.residual - common::inf_norm(&f)).abs() < 1e-12);
        }
    }
}

#[test]
fn device_states_agree_between_frameworks() {
    for cfg in [common::case1(), common::case2()] {
        let (spc, xs) = build(&cfg, Framework::Spc).unwrap();
        let (qpc, xq) = build(&cfg, Framework::Qpc).unwrap();
        let ls = spc.state_labels();
        for (k, label) in qpc.state_labels().iter().enumerate() {
            let j = ls.iter().position(|l| l == label).expect("QPC states are a subset");
            let (a, b) = (xs.x0[j], xq.x0[k]);
            assert!((a - b).abs() < 1e-6 * (1.0 + a.abs()), "{} {label}: {a} vs {b}", cfg.name);
        }
    }
}

#[test]
fn converters_align_the_pcc_voltage_with_their_d_axis() {
    let (model, op) = build(&common::case2(), Framework::Spc).unwrap();
    let v = model.node_voltages(&op.x0);
    for (k, dev) in model.devices.iter().enumerate() {
        if let Device::Gfc(_) = dev {
            let delta = op.x0[model.offsets[k] + gfc::DELTA];
            let node = model.network.topology.device_nodes[k];
            let v_pcc = v[node] * Complex64::from_polar(1.0, -delta);
            assert!(v_pcc.im.abs() < 1e-8, "{}", v_pcc.im);
        }
    }
}

#[test]
fn stable_model_rests_at_its_operating_point() {
    let (model, op) = build(&common::case1(), Framework::Qpc).unwrap();
    let opts = SimOptions {
        dt: 1e-4,
        t_end: 1.0,
        method: Method::Trapezoidal,
        decimation: 100,
        disturbances: vec![],
    };
    let r = integrate(&model, &op.x0, &op.u0, &opts).unwrap();
    assert!(r.events.is_empty());
    let drift = r.final_state.iter().zip(&op.x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-6, "drift {drift}");
}

#[test]
fn rounding_scale_perturbation_grows_in_the_unstable_model() {
    let (model, op) = build(&common::case1(), Framework::Spc).unwrap();
    let labels = model.state_labels();
    let k = labels.iter().position(|l| l == "line5-6.iD").unwrap();
    let mut x = op.x0.clone();
    x[k] += 1e-9;
    let opts = SimOptions {
        dt: 2e-5,
        t_end: 4.0,
        method: Method::Rk4,
        decimation: 50,
        disturbances: vec![],
    };
    let r = integrate(&model, &x, &op.u0, &opts).unwrap();
    let drift = r.final_state.iter().zip(&op.x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(drift > 1e-6, "drift {drift}");
}
