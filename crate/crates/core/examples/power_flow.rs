//! Power flow of the two-area system with the tie flow held at 400 MW.

use dqgrid::assembly::run_power_flow;
use dqgrid::cli::CASE1;
use dqgrid::config::CaseConfig;

fn main() -> dqgrid::Result<()> {
    let cfg = CaseConfig::from_toml(CASE1, "case1.cfg")?;
    let pf = run_power_flow(&cfg)?;
    let r = &pf.result;
    println!("converged in {} iterations, mismatch {:.1e}", r.iterations, r.mismatch);
    println!("{:>6} {:>8} {:>10} {:>9} {:>9}", "bus", "|V|", "angle", "P", "Q");
    for (k, bus) in pf.buses.iter().enumerate() {
        println!(
            "{bus:>6} {:>8.4} {:>10.3} {:>9.4} {:>9.4}",
            r.magnitude(k),
            r.angle(k).to_degrees(),
            r.p[k],
            r.q[k]
        );
    }
    if let Some(t) = pf.tie_flow {
        println!("tie flow 7 -> 8: {t:.6} pu");
    }
    if let Some((bus, p)) = pf.adjusted_load {
        println!("load at bus {bus}: {p:.4} pu");
    }
    Ok(())
}
