//! Eigenvalues of both frameworks, the unstable mode and its participation
//! factors and mode shape.

use dqgrid::assembly::Framework;
use dqgrid::cli::CASE1;
use dqgrid::config::CaseConfig;
use dqgrid::study::Analysis;

fn main() -> dqgrid::Result<()> {
    let cfg = CaseConfig::from_toml(CASE1, "case1.cfg")?;
    for fw in [Framework::Spc, Framework::Qpc] {
        let a = Analysis::run(&cfg, fw)?;
        println!("{fw}: {} states, residual {:.1e}", a.linear.states.len(), a.op.residual);
        println!("  least damped modes:");
        for m in a.modes.iter().filter(|m| m.is_oscillatory()).take(5) {
            println!("  {:>10.4} {:+10.4}j  {:8.3} Hz  zeta {:7.3} %", m.lambda.re, m.lambda.im, m.f_hz, m.zeta_pct);
        }
        for m in a.unstable_pairs() {
            println!("  unstable: {:.3} Hz, zeta {:.2} %", m.f_hz, m.zeta_pct);
            for (k, (name, p)) in a.top_participants(m, 6).into_iter().enumerate() {
                let idx = a.linear.states.iter().position(|s| *s == name).unwrap_or(0);
                println!("    {k}: {name:<14} p = {p:.3}  angle {:7.1} deg", m.shape_angle[idx]);
            }
        }
    }
    Ok(())
}
