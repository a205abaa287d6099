mod common;

use dqgrid::analysis::linearize::linearize;
use dqgrid::assembly::{build, Framework};
use dqgrid::network::{power_balance, Branch, Load, SpcNetwork, Topology};
use dqgrid::phasor::OMEGA_S;
use num_complex::Complex64;
use proptest::prelude::*;

fn ladder(params: &[(f64, f64, f64, f64, f64)]) -> Topology {
    let n = params.len() + 1;
    let names = (0..n).map(|k| k.to_string()).collect();
    let branches = params
        .iter()
        .enumerate()
        .map(|(k, &(r, l, c, _, _))| Branch {
            name: format!("{k}-{}", k + 1),
            from: k,
            to: k + 1,
            r,
            l,
            c,
        })
        .collect();
    let loads = params
        .iter()
        .enumerate()
        .map(|(k, &(_, _, _, p, q))| Load::from_power(k + 1, p, q, 1.0, 0.0))
        .collect();
    Topology::new(names, branches, vec![0], loads).unwrap()
}

proptest! {
    #[test]
    fn phasor_solution_is_an_spc_equilibrium(
        params in prop::collection::vec((0.0..0.05f64, 0.01..0.5f64, 0.01..0.3f64, 0.1..3.0f64, -0.5..1.0f64), 1..6),
        re in -2.0..2.0f64,
        im in -2.0..2.0f64,
    ) {
        let net = SpcNetwork::new(ladder(&params), OMEGA_S).unwrap();
        let inj = [Complex64::new(re, im)];
        let eq = net.equilibrium(&inj).unwrap();
        let d = net.derivatives(&eq, &inj);
        let worst = d.i_l.iter().chain(&d.v_n).chain(&d.i_load).map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-8 * OMEGA_S * (1.0 + re.abs() + im.abs()));
    }
}

#[test]
fn losses_balance_injections_at_the_case_equilibrium() {
    let (model, op) = build(&common::case1(), Framework::Spc).unwrap();
    let inj = model.injections(&op.x0, &op.u0);
    let v = model.node_voltages(&op.x0);
    let (injected, dissipated) = power_balance(&model.network.topology, &v, &inj);
    assert!((injected - dissipated).abs() < 1e-6, "{injected} vs {dissipated}");
}

#[test]
fn both_frameworks_share_bus_voltages() {
    for cfg in [common::case1(), common::case2()] {
        let (spc, op_s) = build(&cfg, Framework::Spc).unwrap();
        let (qpc, op_q) = build(&cfg, Framework::Qpc).unwrap();
        let vs = spc.node_voltages(&op_s.x0);
        let vq = qpc.node_voltages(&op_q.x0);
        let worst = vs.iter().zip(&vq).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{}: {worst}", cfg.name);
    }
}

#[test]
fn network_block_of_the_jacobian_is_the_analytic_network_matrix() {
    let (model, op) = build(&common::case1(), Framework::Spc).unwrap();
    let lm = linearize(&model, &op.x0, &op.u0);
    let o = model.network_offset();
    let n = model.network.n_states();
    let block = lm.a.view((o, o), (n, n)).into_owned();
    let exact = model.network.state_matrix();
    let err = (&block - &exact).amax() / exact.amax();
    assert!(err < 1e-6, "relative error {err}");
}
