//! Nonlinear simulation of a short power-reference pulse, then Prony
//! analysis of the converter current against the linearized mode.

use dqgrid::assembly::Framework;
use dqgrid::cli::CASE1;
use dqgrid::config::CaseConfig;
use dqgrid::study::{time_domain, Analysis};

fn main() -> dqgrid::Result<()> {
    let cfg = CaseConfig::from_toml(CASE1, "case1.cfg")?;
    let lin = Analysis::run(&cfg, Framework::Spc)?;
    let td = time_domain(&cfg, Framework::Spc)?;
    let sim = &td.sim;
    println!("{} samples up to t = {:.3} s", sim.time.len(), sim.time.last().copied().unwrap_or(0.0));
    for e in &sim.events {
        println!("event at {:.4} s: {}", e.time, e.message);
    }
    println!("Prony fit of {} (residual {:.2e}):", td.channel, td.fit.residual);
    for m in td.fit.modes.iter().take(5) {
        println!(
            "  {:8.3} Hz  sigma {:8.3} 1/s  zeta {:7.3} %  amplitude {:.3e}",
            m.frequency_hz(),
            m.sigma(),
            100.0 * m.damping_ratio(),
            m.amplitude()
        );
    }
    if let (Some(l), Some(p)) = (lin.unstable_pairs().first(), lin.unstable_pairs().first().and_then(|l| td.fit.nearest(l.f_hz))) {
        println!(
            "linearized {:.3} Hz / {:.2} %, Prony {:.3} Hz / {:.2} %",
            l.f_hz,
            l.zeta_pct,
            p.frequency_hz(),
            100.0 * p.damping_ratio()
        );
    }
    Ok(())
}
